#include "tfv/embedding_io.hpp"

#include <bit>
#include <cstring>

#include "tfv/digest.hpp"
#include "tfv/error.hpp"

namespace tfv {
namespace {

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

std::uint32_t get_u32(std::string_view in, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i)
    v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[at + i])) << (8 * i);
  return v;
}

}  // namespace

std::string encode_embedding(const EmbeddingMatrix& m) {
  const std::size_t count = static_cast<std::size_t>(m.n_frames) * m.dim;
  if (m.values.size() != count)
    throw Error(ErrorCode::ShapeMismatch, "embedding value count does not match n_frames*dim");
  std::string out;
  out.reserve(kEmbeddingHeaderBytes + 4 * count);
  out.append("TFV1");
  put_u32(out, m.n_frames);
  put_u32(out, m.dim);
  for (float f : m.values) put_u32(out, std::bit_cast<std::uint32_t>(f));
  return out;
}

EmbeddingMatrix decode_embedding(std::string_view bytes) {
  if (bytes.size() < 4 || bytes.substr(0, 3) != "TFV")
    throw Error(ErrorCode::BadMagic, "embedding file does not start with TFV magic");
  if (bytes[3] != '1')
    throw Error(ErrorCode::UnsupportedVersion,
                std::string("unsupported embedding format version '") + bytes[3] + "'");
  if (bytes.size() < kEmbeddingHeaderBytes)
    throw Error(ErrorCode::TruncatedPayload, "embedding header truncated");

  EmbeddingMatrix m;
  m.n_frames = get_u32(bytes, 4);
  m.dim = get_u32(bytes, 8);
  const std::size_t count = static_cast<std::size_t>(m.n_frames) * m.dim;
  const std::size_t expected = kEmbeddingHeaderBytes + 4 * count;
  if (bytes.size() != expected)
    throw Error(ErrorCode::TruncatedPayload,
                "embedding payload is " + std::to_string(bytes.size()) + " bytes, expected " +
                    std::to_string(expected));
  m.values.resize(count);
  for (std::size_t i = 0; i < count; ++i)
    m.values[i] = std::bit_cast<float>(get_u32(bytes, kEmbeddingHeaderBytes + 4 * i));
  return m;
}

EmbeddingMatrix read_embedding_file(const std::filesystem::path& path) {
  return decode_embedding(read_file_bytes(path));
}

void write_embedding_file(const EmbeddingMatrix& m, const std::filesystem::path& path) {
  write_file_atomic(path, encode_embedding(m));
}

}  // namespace tfv
