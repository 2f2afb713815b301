#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "tfv/embedding_io.hpp"

namespace tfv {

/// Initial conditions of one simulation case. Documented dataset ranges:
/// pressure 0.8-2.1 MPa, temperature 565-830 K, water vapour 7.8-14 %.
/// Only positivity and finiteness are enforced.
struct CaseParams {
  double p_static_mpa = 0.0;
  double t_static_k = 0.0;
  double h2o_pct = 0.0;

  bool operator==(const CaseParams&) const = default;
};

struct FrameRef {
  std::string case_id;
  std::string channel;
  std::uint32_t t_index = 0;
  double time_ms = 0.0;
  std::string image_path;  // relative to the dataset root
};

struct ChannelData {
  std::vector<FrameRef> frames;  // ordered by t_index
  EmbeddingMatrix embedding;
};

struct CaseRecord {
  std::string case_id;
  CaseParams params;
  std::map<std::string, ChannelData> channels;

  std::size_t frame_count(const std::string& channel) const;
};

/// Closed interval; a missing end is unbounded.
struct Interval {
  std::optional<double> min;
  std::optional<double> max;

  bool contains(double v) const {
    return (!min || v >= *min) && (!max || v <= *max);
  }
};

struct ParamFilter {
  Interval p_mpa;
  Interval t_k;
  Interval h2o_pct;
};

/// Immutable after construction; safe to share across reader threads.
class Dataset {
 public:
  /// Validates every record (frame contiguity, embedding shape, finiteness,
  /// positive params). Throws tfv::Error on the first violation.
  Dataset(std::string name, std::vector<std::string> channels, std::vector<CaseRecord> cases,
          std::filesystem::path root, std::string embedding_provenance = {});

  const std::string& name() const { return name_; }
  const std::vector<std::string>& channels() const { return channels_; }
  const std::filesystem::path& root() const { return root_; }
  const std::string& embedding_provenance() const { return provenance_; }

  std::size_t case_count() const { return cases_.size(); }
  std::size_t frame_count(const std::string& channel) const;
  std::size_t total_frame_count() const;
  std::vector<std::string> case_ids() const;

  bool has_case(const std::string& id) const { return cases_.contains(id); }
  const CaseRecord& at(const std::string& id) const;
  const ChannelData& channel_data(const std::string& case_id, const std::string& channel) const;
  const std::map<std::string, CaseRecord>& cases() const { return cases_; }

  /// Case ids (ascending) whose params fall inside all three closed intervals.
  std::vector<std::string> filter(const ParamFilter& f) const;

 private:
  std::string name_;
  std::vector<std::string> channels_;
  std::map<std::string, CaseRecord> cases_;
  std::filesystem::path root_;
  std::string provenance_;
};

using DatasetHandle = std::shared_ptr<const Dataset>;

DatasetHandle load_dataset(const std::filesystem::path& manifest_path);

std::vector<std::string> filter_cases(const Dataset& dataset, const ParamFilter& f);

}  // namespace tfv
