#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tfv/annotations.hpp"
#include "tfv/dataset.hpp"
#include "tfv/vlm_client.hpp"

namespace tfv {

inline constexpr std::string_view kPromptVersion = "v1";
inline constexpr std::size_t kDefaultContextK = 3;
inline constexpr std::size_t kMaxCaseImages = 12;

inline constexpr std::string_view kSystemPrompt =
    "You are an expert in scramjet combustion analysis. Describe flow-field frames using the "
    "terminology of the provided expert-annotated examples. Be concise and physically precise.";
inline constexpr std::string_view kFrameInstruction =
    "Describe this frame's combustion state, referencing surge position, flame structure, and "
    "combustion mode.";
inline constexpr std::string_view kCaseInstruction =
    "Summarize how this case's combustion state evolves over time, referencing the frame "
    "descriptions above, any mode transitions, and whether the flow settles into a stable mode.";

enum class ReportKind { Frame, Case, Transition };

std::string_view to_string(ReportKind k);
ReportKind parse_report_kind(std::string_view s);

struct ContextRef {
  int cluster_id = 0;
  FrameKey centroid;
  double distance = 0.0;
  std::uint32_t annotation_version = 0;
};

struct Report {
  ReportKind kind = ReportKind::Frame;
  std::string clustering_id;
  std::string case_id;
  std::optional<std::uint32_t> t_index;  // frame: target; transition: later frame
  std::string text;
  std::vector<ContextRef> context_refs;  // ascending distance
  std::string model_id;
  std::string generated_at;
  bool edited = false;
  std::string prompt_version{kPromptVersion};
  std::string prompt_sha256;
};

nlohmann::json to_json(const Report& r);
Report report_from_json(const nlohmann::json& j);

/// Append-only report history; the latest record per target wins.
class ReportStore {
 public:
  explicit ReportStore(std::optional<std::filesystem::path> path = std::nullopt);

  void save(const Report& report);
  std::optional<Report> find(ReportKind kind, const std::string& clustering_id,
                             const std::string& case_id,
                             std::optional<std::uint32_t> t_index = std::nullopt) const;
  /// Stores a copy of the latest report with replaced text and edited = true.
  Report edit(ReportKind kind, const std::string& clustering_id, const std::string& case_id,
              std::optional<std::uint32_t> t_index, const std::string& text);
  std::size_t log_size() const { return log_.size(); }

 private:
  using Key = std::tuple<int, std::string, std::string, std::int64_t>;
  static Key key_of(ReportKind kind, const std::string& clustering_id, const std::string& case_id,
                    std::optional<std::uint32_t> t_index);

  AppendLog log_;
  mutable std::mutex mu_;
  std::map<Key, Report> latest_;
};

struct Transition {
  std::uint32_t t_index = 0;  // index of the first frame carrying the new label
  int from_cluster = 0;
  int to_cluster = 0;
  bool involves_noise = false;
};

/// Consecutive frames of the case whose labels differ; noise-to-noise pairs
/// never differ, so they are never reported.
std::vector<Transition> detect_transitions(const std::string& case_id, const ClusterModel& model);

/// t_index values sent with a case summary: all frames when n <= max_images,
/// otherwise max_images indices at uniform stride that include 0 and n-1.
std::vector<std::uint32_t> subsample_frames(std::uint32_t n_frames,
                                            std::size_t max_images = kMaxCaseImages);

/// Data URL (base64) of a frame image.
std::string image_data_url(const Dataset& dataset, const std::string& channel, const FrameKey& frame);

/// Assembles prompts and generates reports over one clustering of one
/// projection. Holds references; all referenced objects must outlive it.
class ReportGenerator {
 public:
  ReportGenerator(const Dataset& dataset, const ProjectionResult& projection,
                  const ClusterModel& model, const AnnotationStore& annotations,
                  ReportStore& reports, VlmBackend& vlm);

  VlmRequest frame_request(const std::vector<FrameKey>& targets,
                           const std::vector<ContextEntry>& context) const;

  /// Rebuilds the exact request behind a stored frame or transition report
  /// from its context refs and the referenced annotation versions.
  VlmRequest rebuild_request(const Report& report) const;

  Report generate_frame_report(const FrameKey& frame, std::size_t k = kDefaultContextK);
  Report generate_transition_report(const std::string& case_id, const Transition& transition,
                                    std::size_t k = kDefaultContextK);
  /// Reuses stored frame reports and generates the missing ones first.
  Report generate_case_summary(const std::string& case_id, std::size_t k = kDefaultContextK);

  VlmRequest case_request(const std::string& case_id,
                          const std::vector<std::string>& frame_texts) const;

 private:
  Point2 coord_of(const FrameKey& frame) const;
  Report run(ReportKind kind, const std::string& case_id, std::optional<std::uint32_t> t_index,
             const std::vector<ContextEntry>& context, const VlmRequest& request);

  const Dataset& dataset_;
  const ProjectionResult& projection_;
  const ClusterModel& model_;
  const AnnotationStore& annotations_;
  ReportStore& reports_;
  VlmBackend& vlm_;
};

}  // namespace tfv
