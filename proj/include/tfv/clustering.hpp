#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "tfv/projection.hpp"

namespace tfv {

inline constexpr int kNoiseLabel = -1;

struct ClusteringParams {
  double eps = 0.0;
  std::uint32_t min_samples = 1;
  std::string projection_id;
};

struct ClusterModel {
  std::string id;  // content hash of params
  ClusteringParams params;
  std::map<FrameKey, int> labels;  // -1 = noise, 0..k-1 = clusters
  int cluster_count = 0;
  std::map<int, FrameKey> centroids;
  std::map<int, Point2> centroid_coords;

  std::vector<FrameKey> members(int cluster_id) const;
};

std::string clustering_id(const ClusteringParams& params);

/// Brute-force DBSCAN in the projected plane. Neighbourhoods are closed balls
/// that include the point itself. Points are scanned in ascending
/// (case_id, t_index) order; cluster ids follow discovery order and a border
/// point joins the first cluster whose expansion reaches it.
ClusterModel dbscan(const CoordMap& coords, double eps, std::uint32_t min_samples,
                    std::string projection_id = {});

inline ClusterModel dbscan(const ProjectionResult& projection, double eps,
                           std::uint32_t min_samples) {
  return dbscan(projection.coords, eps, min_samples, projection.id);
}

/// Fills centroids: the member nearest to the cluster's coordinate mean, ties
/// broken by ascending (case_id, t_index).
ClusterModel select_centroids(ClusterModel model, const CoordMap& coords);

std::string format_labels_csv(const ClusterModel& model);
std::string format_centroids_csv(const ClusterModel& model);

}  // namespace tfv
