#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tfv/append_log.hpp"
#include "tfv/clustering.hpp"

namespace tfv {

struct ClusterKey {
  std::string clustering_id;
  int cluster_id = 0;

  auto operator<=>(const ClusterKey&) const = default;
};

struct AnnotationRecord {
  ClusterKey key;
  FrameKey centroid;
  std::string text;
  std::string author;
  std::string created_at;
  std::string updated_at;
  std::uint32_t version = 1;  // 1-based, per cluster key
};

/// Expert descriptions of cluster centroids. Every save appends a version;
/// reads return the latest.
class AnnotationStore {
 public:
  explicit AnnotationStore(std::optional<std::filesystem::path> path = std::nullopt);

  /// Throws UnknownCluster for noise or ids absent from `model`, EmptyText
  /// for blank text.
  AnnotationRecord save(const ClusterModel& model, int cluster_id, const std::string& text,
                        const std::string& author);

  std::optional<AnnotationRecord> latest(const ClusterKey& key) const;
  std::optional<AnnotationRecord> version(const ClusterKey& key, std::uint32_t version) const;
  std::vector<AnnotationRecord> history(const ClusterKey& key) const;
  std::vector<AnnotationRecord> latest_for(const std::string& clustering_id) const;
  std::size_t log_size() const { return log_.size(); }

 private:
  void index(AnnotationRecord rec);

  AppendLog log_;
  mutable std::mutex mu_;
  std::map<ClusterKey, std::vector<AnnotationRecord>> versions_;
};

struct ContextEntry {
  int cluster_id = 0;
  FrameKey centroid;
  Point2 centroid_coord;
  double distance = 0.0;
  std::string annotation;
  std::uint32_t annotation_version = 0;
};

/// The k annotated centroids nearest to `coord`, ascending distance, ties by
/// cluster id. Throws NoAnnotatedCentroids when no cluster is annotated.
std::vector<ContextEntry> nearest_annotated_centroids(const ClusterModel& model,
                                                      const AnnotationStore& store,
                                                      const Point2& coord, std::size_t k);

}  // namespace tfv
