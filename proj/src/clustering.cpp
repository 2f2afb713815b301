#include "tfv/clustering.hpp"

#include <deque>
#include <limits>
#include <sstream>

#include <nlohmann/json.hpp>

#include "tfv/digest.hpp"
#include "tfv/error.hpp"

namespace tfv {
namespace {

constexpr int kUnvisited = -2;

std::vector<std::size_t> region_query(const std::vector<Point2>& pts, std::size_t i, double eps) {
  std::vector<std::size_t> out;
  for (std::size_t j = 0; j < pts.size(); ++j)
    if (distance(pts[i], pts[j]) <= eps) out.push_back(j);
  return out;
}

}  // namespace

std::vector<FrameKey> ClusterModel::members(int cluster_id) const {
  std::vector<FrameKey> out;
  for (const auto& [k, label] : labels)
    if (label == cluster_id) out.push_back(k);
  return out;
}

std::string clustering_id(const ClusteringParams& params) {
  nlohmann::json j;
  j["projection_id"] = params.projection_id;
  j["eps"] = params.eps;
  j["min_samples"] = params.min_samples;
  return short_digest(j.dump());
}

ClusterModel dbscan(const CoordMap& coords, double eps, std::uint32_t min_samples,
                    std::string projection_id) {
  if (coords.empty()) throw Error(ErrorCode::InvalidArgument, "cannot cluster an empty projection");
  if (!(eps > 0.0) || !std::isfinite(eps))
    throw Error(ErrorCode::InvalidArgument, "eps must be positive");
  if (min_samples < 1) throw Error(ErrorCode::InvalidArgument, "min_samples must be >= 1");

  std::vector<const FrameKey*> keys;
  std::vector<Point2> pts;
  keys.reserve(coords.size());
  pts.reserve(coords.size());
  for (const auto& [k, p] : coords) {
    keys.push_back(&k);
    pts.push_back(p);
  }

  std::vector<int> label(pts.size(), kUnvisited);
  int next_cluster = 0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (label[i] != kUnvisited) continue;
    auto seeds = region_query(pts, i, eps);
    if (seeds.size() < min_samples) {
      label[i] = kNoiseLabel;
      continue;
    }
    const int cid = next_cluster++;
    label[i] = cid;
    std::deque<std::size_t> queue(seeds.begin(), seeds.end());
    while (!queue.empty()) {
      const auto j = queue.front();
      queue.pop_front();
      if (label[j] == kNoiseLabel) {
        label[j] = cid;  // border point
        continue;
      }
      if (label[j] != kUnvisited) continue;
      label[j] = cid;
      auto nb = region_query(pts, j, eps);
      if (nb.size() >= min_samples) queue.insert(queue.end(), nb.begin(), nb.end());
    }
  }

  ClusterModel model;
  model.params = {eps, min_samples, std::move(projection_id)};
  model.id = clustering_id(model.params);
  model.cluster_count = next_cluster;
  for (std::size_t i = 0; i < pts.size(); ++i) model.labels.emplace(*keys[i], label[i]);
  return model;
}

ClusterModel select_centroids(ClusterModel model, const CoordMap& coords) {
  std::vector<Point2> sums(static_cast<std::size_t>(model.cluster_count));
  std::vector<std::size_t> counts(sums.size(), 0);
  for (const auto& [k, label] : model.labels) {
    if (label < 0) continue;
    auto it = coords.find(k);
    if (it == coords.end())
      throw Error(ErrorCode::MissingFrameCoordinate, "labelled frame missing from projection");
    sums[label].x += it->second.x;
    sums[label].y += it->second.y;
    ++counts[label];
  }

  std::vector<double> best(sums.size(), std::numeric_limits<double>::infinity());
  model.centroids.clear();
  model.centroid_coords.clear();
  for (const auto& [k, label] : model.labels) {
    if (label < 0) continue;
    const Point2 mean{sums[label].x / static_cast<double>(counts[label]),
                      sums[label].y / static_cast<double>(counts[label])};
    const auto& p = coords.at(k);
    const double d = distance(p, mean);
    if (d < best[label]) {  // strict: first (lowest key) wins ties
      best[label] = d;
      model.centroids[label] = k;
      model.centroid_coords[label] = p;
    }
  }
  return model;
}

std::string format_labels_csv(const ClusterModel& model) {
  std::ostringstream out;
  out << "case_id,t_index,label\n";
  for (const auto& [k, label] : model.labels) out << k.case_id << ',' << k.t_index << ',' << label << '\n';
  return out.str();
}

std::string format_centroids_csv(const ClusterModel& model) {
  std::ostringstream out;
  out.precision(17);
  out << "cluster_id,case_id,t_index,x,y\n";
  for (const auto& [cid, k] : model.centroids) {
    const auto& p = model.centroid_coords.at(cid);
    out << cid << ',' << k.case_id << ',' << k.t_index << ',' << p.x << ',' << p.y << '\n';
  }
  return out.str();
}

}  // namespace tfv
