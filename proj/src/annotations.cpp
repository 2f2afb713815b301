#include "tfv/annotations.hpp"

#include <algorithm>
#include <cctype>
#include <limits>
#include <tuple>

#include "tfv/error.hpp"

namespace tfv {
namespace {

using nlohmann::json;

json to_json(const AnnotationRecord& r) {
  return {{"clustering_id", r.key.clustering_id},
          {"cluster_id", r.key.cluster_id},
          {"centroid", {{"case_id", r.centroid.case_id}, {"t_index", r.centroid.t_index}}},
          {"text", r.text},
          {"author", r.author},
          {"created_at", r.created_at},
          {"updated_at", r.updated_at},
          {"version", r.version}};
}

AnnotationRecord from_json(const json& j) {
  AnnotationRecord r;
  r.key.clustering_id = j.at("clustering_id").get<std::string>();
  r.key.cluster_id = j.at("cluster_id").get<int>();
  r.centroid.case_id = j.at("centroid").at("case_id").get<std::string>();
  r.centroid.t_index = j.at("centroid").at("t_index").get<std::uint32_t>();
  r.text = j.at("text").get<std::string>();
  r.author = j.value("author", std::string{});
  r.created_at = j.value("created_at", std::string{});
  r.updated_at = j.value("updated_at", std::string{});
  r.version = j.at("version").get<std::uint32_t>();
  return r;
}

bool blank(const std::string& s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
}

}  // namespace

AnnotationStore::AnnotationStore(std::optional<std::filesystem::path> path) : log_(std::move(path)) {
  for (const auto& j : log_.records()) index(from_json(j));
}

void AnnotationStore::index(AnnotationRecord rec) {
  versions_[rec.key].push_back(std::move(rec));
}

AnnotationRecord AnnotationStore::save(const ClusterModel& model, int cluster_id,
                                       const std::string& text, const std::string& author) {
  if (cluster_id < 0 || !model.centroids.contains(cluster_id))
    throw Error(ErrorCode::UnknownCluster, "clustering " + model.id + " has no cluster " +
                                               std::to_string(cluster_id));
  if (blank(text)) throw Error(ErrorCode::EmptyText, "annotation text is empty");

  std::lock_guard lock(mu_);
  AnnotationRecord rec;
  rec.key = {model.id, cluster_id};
  rec.centroid = model.centroids.at(cluster_id);
  rec.text = text;
  rec.author = author;
  rec.updated_at = utc_timestamp();
  auto it = versions_.find(rec.key);
  if (it != versions_.end() && !it->second.empty()) {
    rec.created_at = it->second.front().created_at;
    rec.version = it->second.back().version + 1;
  } else {
    rec.created_at = rec.updated_at;
    rec.version = 1;
  }
  log_.append(to_json(rec));
  index(rec);
  return rec;
}

std::optional<AnnotationRecord> AnnotationStore::latest(const ClusterKey& key) const {
  std::lock_guard lock(mu_);
  auto it = versions_.find(key);
  if (it == versions_.end() || it->second.empty()) return std::nullopt;
  return it->second.back();
}

std::optional<AnnotationRecord> AnnotationStore::version(const ClusterKey& key,
                                                         std::uint32_t version) const {
  std::lock_guard lock(mu_);
  auto it = versions_.find(key);
  if (it == versions_.end()) return std::nullopt;
  for (const auto& r : it->second)
    if (r.version == version) return r;
  return std::nullopt;
}

std::vector<AnnotationRecord> AnnotationStore::history(const ClusterKey& key) const {
  std::lock_guard lock(mu_);
  auto it = versions_.find(key);
  return it == versions_.end() ? std::vector<AnnotationRecord>{} : it->second;
}

std::vector<AnnotationRecord> AnnotationStore::latest_for(const std::string& clustering_id) const {
  std::lock_guard lock(mu_);
  std::vector<AnnotationRecord> out;
  for (auto it = versions_.lower_bound({clustering_id, std::numeric_limits<int>::min()});
       it != versions_.end() && it->first.clustering_id == clustering_id; ++it)
    if (!it->second.empty()) out.push_back(it->second.back());
  return out;
}

std::vector<ContextEntry> nearest_annotated_centroids(const ClusterModel& model,
                                                      const AnnotationStore& store,
                                                      const Point2& coord, std::size_t k) {
  if (k < 1) throw Error(ErrorCode::InvalidArgument, "k must be >= 1");
  std::vector<ContextEntry> entries;
  for (const auto& ann : store.latest_for(model.id)) {
    auto c = model.centroids.find(ann.key.cluster_id);
    if (c == model.centroids.end() || c->second != ann.centroid) continue;
    ContextEntry e;
    e.cluster_id = ann.key.cluster_id;
    e.centroid = c->second;
    e.centroid_coord = model.centroid_coords.at(e.cluster_id);
    e.distance = distance(e.centroid_coord, coord);
    e.annotation = ann.text;
    e.annotation_version = ann.version;
    entries.push_back(std::move(e));
  }
  if (entries.empty())
    throw Error(ErrorCode::NoAnnotatedCentroids,
                "clustering " + model.id + " has no annotated centroids");
  std::sort(entries.begin(), entries.end(), [](const ContextEntry& a, const ContextEntry& b) {
    return std::tie(a.distance, a.cluster_id) < std::tie(b.distance, b.cluster_id);
  });
  if (entries.size() > k) entries.resize(k);
  return entries;
}

}  // namespace tfv
