#pragma once

#include <cmath>
#include <compare>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "tfv/dataset.hpp"

namespace tfv {

struct FrameKey {
  std::string case_id;
  std::uint32_t t_index = 0;

  auto operator<=>(const FrameKey&) const = default;
  bool operator==(const FrameKey&) const = default;
};

struct Point2 {
  double x = 0.0;
  double y = 0.0;

  bool operator==(const Point2&) const = default;
};

inline double distance(const Point2& a, const Point2& b) { return std::hypot(a.x - b.x, a.y - b.y); }

enum class ProjectionMethod { Pca, External };

std::string_view to_string(ProjectionMethod m);
ProjectionMethod parse_projection_method(std::string_view s);

struct ProjectionSpec {
  std::string channel;
  ProjectionMethod method = ProjectionMethod::Pca;
  std::vector<std::string> scope;  // ascending, unique
  std::optional<std::filesystem::path> external_file;
  // Provenance only (e.g. n_neighbors=15, min_dist=0.1 for an imported UMAP layout).
  std::map<std::string, std::string> method_params;
};

struct PcaFitStats {
  double eigenvalues[2] = {0.0, 0.0};
  std::vector<double> mean;
  Eigen::MatrixXd components;  // dim x 2, unit-norm columns
  bool degenerate = false;     // all embeddings identical; coords are zero
};

/// Ordered by (case_id, t_index); every frame of every in-scope case appears once.
using CoordMap = std::map<FrameKey, Point2>;

struct ProjectionResult {
  std::string id;  // content hash of the ProjectionSpec
  ProjectionSpec spec;
  CoordMap coords;
  std::optional<PcaFitStats> fit_stats;
};

/// Result of the dense PCA on a raw row matrix (one observation per row).
struct Pca2d {
  PcaFitStats stats;
  Eigen::MatrixX2d coords;  // n x 2
};

/// Projects rows onto the two leading principal components of their sample
/// covariance (denominator n-1). Within each component the entry of largest
/// magnitude (lowest index on ties) is made non-negative.
Pca2d pca_2d(const Eigen::MatrixXd& rows);

/// Canonical digest of a ProjectionSpec. External layouts are identified by file
/// content, not path.
std::string projection_id(const ProjectionSpec& spec);

ProjectionResult fit_pca_2d(const Dataset& dataset, const std::string& channel,
                            std::vector<std::string> scope);

struct ExternalRow {
  FrameKey key;
  Point2 point;
};

/// Parses `case_id,t_index,x,y` rows (header required).
std::vector<ExternalRow> parse_projection_csv(std::string_view text);
std::string format_projection_csv(const CoordMap& coords);

ProjectionResult import_external_projection(const Dataset& dataset, const std::string& channel,
                                            std::vector<std::string> scope,
                                            const std::filesystem::path& file,
                                            std::map<std::string, std::string> method_params = {});

/// Content-addressed store of projection results, persisted as
/// `<dir>/projections/<id>/coords.tfv` (coords in the embedding binary format,
/// one row per frame in key order) plus `spec.json`. Results pass through the
/// binary32 format on insertion so fresh and reloaded coords are identical.
class ProjectionCache {
 public:
  explicit ProjectionCache(std::optional<std::filesystem::path> dir = std::nullopt);

  std::shared_ptr<const ProjectionResult> find(const std::string& id) const;
  std::shared_ptr<const ProjectionResult> insert(ProjectionResult result);

 private:
  std::optional<std::shared_ptr<const ProjectionResult>> load_from_disk(const std::string& id) const;
  void persist(const ProjectionResult& result) const;

  std::optional<std::filesystem::path> dir_;
  mutable std::mutex mu_;
  mutable std::map<std::string, std::shared_ptr<const ProjectionResult>> entries_;
};

/// Rounds every coordinate to binary32, the precision of the cache format.
void quantize_coords(CoordMap& coords);

}  // namespace tfv
