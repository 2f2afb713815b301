#pragma once

#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tfv/projection.hpp"

namespace tfv {

struct TrajectoryPoint {
  std::uint32_t t_index = 0;
  Point2 p;

  bool operator==(const TrajectoryPoint&) const = default;
};

struct Trajectory {
  std::string case_id;
  std::string channel;
  std::vector<TrajectoryPoint> points;  // strictly increasing t_index

  std::size_t size() const { return points.size(); }
};

Trajectory build_trajectory(const ProjectionResult& projection, const std::string& case_id,
                            const std::string& channel);
inline Trajectory build_trajectory(const ProjectionResult& projection, const std::string& case_id) {
  return build_trajectory(projection, case_id, projection.spec.channel);
}

/// One trajectory per case present in the coordinates, ascending case_id.
std::vector<Trajectory> build_all_trajectories(const CoordMap& coords, const std::string& channel);

inline constexpr std::size_t kDefaultConvergenceWindow = 5;

struct ConvergenceStats {
  std::size_t k_window = kDefaultConvergenceWindow;
  Point2 tail_mean;
  double radius = 0.0;
};

/// Mean distance of the last min(K, length) points to their mean.
ConvergenceStats convergence_radius(const Trajectory& traj,
                                    std::size_t k_window = kDefaultConvergenceWindow);

double mean_convergence_radius(std::span<const Trajectory> trajectories, std::size_t k_window);

/// Relative reduction, in percent, of the mean convergence radius of
/// `focused` against `baseline`: (mean_B - mean_A) / mean_B * 100.
double compare_embedding_variants(std::span<const Trajectory> focused,
                                  std::span<const Trajectory> baseline, std::size_t k_window);

inline constexpr double kMotionFloor = 1e-9;

struct DissimilarityResult {
  std::string case_a;
  std::string case_b;
  double value = 0.0;
  // Zero-based positions (a, b) into the two point lists, from (0, 0) to
  // (len_a - 1, len_b - 1).
  std::vector<std::pair<std::uint32_t, std::uint32_t>> path;
};

/// Local motion magnitudes; the first entry uses the forward difference.
std::vector<double> local_motion(const Trajectory& traj);

/// Motion-normalised DTW: minimises the sum over the alignment path of
/// |pa - pb| / max(m_a + m_b, 1e-9). On equal cost the backtrack prefers the
/// diagonal step, then advancing `a`, then advancing `b`.
DissimilarityResult trajectory_dissimilarity(const Trajectory& a, const Trajectory& b);

/// Sum of pair costs along `path`, accumulated in path order.
double path_cost(const Trajectory& a, const Trajectory& b,
                 std::span<const std::pair<std::uint32_t, std::uint32_t>> path);

/// Symmetric memo of dissimilarity values keyed by (projection id, case pair).
class DissimilarityCache {
 public:
  std::optional<double> find(const std::string& projection_id, const std::string& a,
                             const std::string& b) const;
  void insert(const std::string& projection_id, const std::string& a, const std::string& b,
              double value);
  std::size_t size() const;

 private:
  using Key = std::tuple<std::string, std::string, std::string>;
  static Key make_key(const std::string& pid, const std::string& a, const std::string& b);

  mutable std::mutex mu_;
  std::map<Key, double> values_;
};

struct SimilarCase {
  std::string case_id;
  double value = 0.0;

  bool operator==(const SimilarCase&) const = default;
};

inline constexpr std::size_t kDefaultTopK = 6;

/// Ranks every other in-scope case with at least two frames by ascending
/// dissimilarity to `case_id` (ties by case_id) and returns the first k.
std::vector<SimilarCase> top_k_similar(const ProjectionResult& projection,
                                       const std::string& case_id, std::size_t k = kDefaultTopK,
                                       DissimilarityCache* cache = nullptr);

struct SimilarityMatrix {
  std::vector<std::string> case_ids;  // cases with >= 2 frames
  std::vector<std::string> excluded;  // shorter cases
  std::vector<double> values;         // row-major, symmetric, zero diagonal

  double at(std::size_t i, std::size_t j) const { return values[i * case_ids.size() + j]; }
};

SimilarityMatrix similarity_matrix(const ProjectionResult& projection,
                                   DissimilarityCache* cache = nullptr);

std::string format_similarity_csv(const SimilarityMatrix& m);

}  // namespace tfv
