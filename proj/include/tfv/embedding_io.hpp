#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace tfv {

/// Row-major n_frames x dim matrix of binary32 values. Row t is the embedding
/// of the frame with t_index == t.
struct EmbeddingMatrix {
  std::string case_id;
  std::string channel;
  std::uint32_t n_frames = 0;
  std::uint32_t dim = 0;
  std::vector<float> values;

  std::span<const float> row(std::uint32_t t) const {
    return {values.data() + static_cast<std::size_t>(t) * dim, dim};
  }

  bool operator==(const EmbeddingMatrix&) const = default;
};

// On-disk layout: "TFV1", u32 n_frames, u32 dim (both little-endian), then
// n_frames*dim little-endian binary32 values. No padding, no trailer.
inline constexpr std::size_t kEmbeddingHeaderBytes = 12;

std::string encode_embedding(const EmbeddingMatrix& m);
EmbeddingMatrix decode_embedding(std::string_view bytes);

EmbeddingMatrix read_embedding_file(const std::filesystem::path& path);
void write_embedding_file(const EmbeddingMatrix& m, const std::filesystem::path& path);

}  // namespace tfv
