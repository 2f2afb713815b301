#include "tfv/trajectory.hpp"

#include <algorithm>
#include <atomic>
#include <limits>
#include <set>
#include <sstream>
#include <thread>
#include <tuple>

#include "tfv/error.hpp"

namespace tfv {
namespace {

// Runs fn(i) for i in [0, n) on up to hardware_concurrency threads.
template <typename Fn>
void parallel_for(std::size_t n, Fn fn) {
  const std::size_t workers =
      std::min<std::size_t>(n, std::max(1u, std::thread::hardware_concurrency()));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (auto i = next++; i < n; i = next++) fn(i);
    });
}

double cached_value(const ProjectionResult& projection, const Trajectory& a, const Trajectory& b,
                    DissimilarityCache* cache) {
  if (cache) {
    if (auto v = cache->find(projection.id, a.case_id, b.case_id)) return *v;
  }
  const double v = trajectory_dissimilarity(a, b).value;
  if (cache) cache->insert(projection.id, a.case_id, b.case_id, v);
  return v;
}

}  // namespace

Trajectory build_trajectory(const ProjectionResult& projection, const std::string& case_id,
                            const std::string& channel) {
  if (channel != projection.spec.channel)
    throw Error(ErrorCode::UnknownChannel, "projection " + projection.id + " is for channel " +
                                               projection.spec.channel + ", not " + channel);
  Trajectory traj;
  traj.case_id = case_id;
  traj.channel = channel;
  // Map order is (case_id, t_index), so this range is already chronological.
  for (auto it = projection.coords.lower_bound({case_id, 0});
       it != projection.coords.end() && it->first.case_id == case_id; ++it)
    traj.points.push_back({it->first.t_index, it->second});
  if (traj.points.empty())
    throw Error(ErrorCode::UnknownCase, "case " + case_id + " is not in projection " + projection.id);
  return traj;
}

std::vector<Trajectory> build_all_trajectories(const CoordMap& coords, const std::string& channel) {
  std::vector<Trajectory> out;
  for (const auto& [k, p] : coords) {
    if (out.empty() || out.back().case_id != k.case_id) out.push_back({k.case_id, channel, {}});
    out.back().points.push_back({k.t_index, p});
  }
  return out;
}

ConvergenceStats convergence_radius(const Trajectory& traj, std::size_t k_window) {
  if (traj.points.empty())
    throw Error(ErrorCode::TrajectoryTooShort, "empty trajectory " + traj.case_id);
  if (k_window < 1) throw Error(ErrorCode::InvalidArgument, "convergence window must be >= 1");
  const std::size_t n = std::min(k_window, traj.points.size());
  const auto tail = std::span(traj.points).last(n);

  ConvergenceStats s;
  s.k_window = k_window;
  for (const auto& tp : tail) {
    s.tail_mean.x += tp.p.x;
    s.tail_mean.y += tp.p.y;
  }
  s.tail_mean.x /= static_cast<double>(n);
  s.tail_mean.y /= static_cast<double>(n);
  for (const auto& tp : tail) s.radius += distance(tp.p, s.tail_mean);
  s.radius /= static_cast<double>(n);
  return s;
}

double mean_convergence_radius(std::span<const Trajectory> trajectories, std::size_t k_window) {
  if (trajectories.empty()) throw Error(ErrorCode::EmptySet, "no trajectories");
  double sum = 0.0;
  for (const auto& t : trajectories) sum += convergence_radius(t, k_window).radius;
  return sum / static_cast<double>(trajectories.size());
}

double compare_embedding_variants(std::span<const Trajectory> focused,
                                  std::span<const Trajectory> baseline, std::size_t k_window) {
  if (focused.empty() || baseline.empty()) throw Error(ErrorCode::EmptySet, "empty trajectory set");
  std::set<std::string> ids_a, ids_b;
  for (const auto& t : focused) ids_a.insert(t.case_id);
  for (const auto& t : baseline) ids_b.insert(t.case_id);
  if (ids_a != ids_b || ids_a.size() != focused.size() || ids_b.size() != baseline.size())
    throw Error(ErrorCode::CaseSetMismatch, "variant sets must cover the same cases once each");
  const double a = mean_convergence_radius(focused, k_window);
  const double b = mean_convergence_radius(baseline, k_window);
  if (b == 0.0) {
    if (a == 0.0) return 0.0;
    throw Error(ErrorCode::InvalidArgument, "baseline mean radius is zero");
  }
  return (b - a) / b * 100.0;
}

std::vector<double> local_motion(const Trajectory& traj) {
  const auto& pts = traj.points;
  if (pts.size() < 2)
    throw Error(ErrorCode::TrajectoryTooShort,
                "trajectory " + traj.case_id + " needs at least 2 points");
  std::vector<double> m(pts.size());
  m[0] = distance(pts[1].p, pts[0].p);
  for (std::size_t i = 1; i < pts.size(); ++i) m[i] = distance(pts[i].p, pts[i - 1].p);
  return m;
}

namespace {

struct PairCost {
  const Trajectory& a;
  const Trajectory& b;
  std::vector<double> ma;
  std::vector<double> mb;

  PairCost(const Trajectory& a_, const Trajectory& b_)
      : a(a_), b(b_), ma(local_motion(a_)), mb(local_motion(b_)) {}

  double operator()(std::size_t i, std::size_t j) const {
    return distance(a.points[i].p, b.points[j].p) / std::max(ma[i] + mb[j], kMotionFloor);
  }
};

}  // namespace

double path_cost(const Trajectory& a, const Trajectory& b,
                 std::span<const std::pair<std::uint32_t, std::uint32_t>> path) {
  const PairCost cost(a, b);
  double sum = 0.0;
  for (const auto& [i, j] : path) sum += cost(i, j);
  return sum;
}

DissimilarityResult trajectory_dissimilarity(const Trajectory& a, const Trajectory& b) {
  const PairCost cost(a, b);
  const std::size_t n = a.size();
  const std::size_t m = b.size();
  constexpr double kInf = std::numeric_limits<double>::infinity();

  std::vector<double> acc(n * m, kInf);
  auto at = [&](std::size_t i, std::size_t j) -> double& { return acc[i * m + j]; };
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      double prev = 0.0;
      if (i > 0 || j > 0) {
        prev = kInf;
        if (i > 0 && j > 0) prev = std::min(prev, at(i - 1, j - 1));
        if (i > 0) prev = std::min(prev, at(i - 1, j));
        if (j > 0) prev = std::min(prev, at(i, j - 1));
      }
      at(i, j) = prev + cost(i, j);
    }
  }

  DissimilarityResult r;
  r.case_a = a.case_id;
  r.case_b = b.case_id;
  r.value = at(n - 1, m - 1);

  std::size_t i = n - 1, j = m - 1;
  r.path.emplace_back(i, j);
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0) {
      const double diag = at(i - 1, j - 1);
      const double up = at(i - 1, j);
      const double left = at(i, j - 1);
      if (diag <= up && diag <= left) {
        --i;
        --j;
      } else if (up <= left) {
        --i;
      } else {
        --j;
      }
    } else if (i > 0) {
      --i;
    } else {
      --j;
    }
    r.path.emplace_back(i, j);
  }
  std::reverse(r.path.begin(), r.path.end());
  return r;
}

DissimilarityCache::Key DissimilarityCache::make_key(const std::string& pid, const std::string& a,
                                                     const std::string& b) {
  return a < b ? Key{pid, a, b} : Key{pid, b, a};
}

std::optional<double> DissimilarityCache::find(const std::string& projection_id,
                                               const std::string& a, const std::string& b) const {
  std::lock_guard lock(mu_);
  auto it = values_.find(make_key(projection_id, a, b));
  if (it == values_.end()) return std::nullopt;
  return it->second;
}

void DissimilarityCache::insert(const std::string& projection_id, const std::string& a,
                                const std::string& b, double value) {
  std::lock_guard lock(mu_);
  values_.emplace(make_key(projection_id, a, b), value);
}

std::size_t DissimilarityCache::size() const {
  std::lock_guard lock(mu_);
  return values_.size();
}

std::vector<SimilarCase> top_k_similar(const ProjectionResult& projection,
                                       const std::string& case_id, std::size_t k,
                                       DissimilarityCache* cache) {
  if (k < 1) throw Error(ErrorCode::InvalidArgument, "k must be >= 1");
  const auto target = build_trajectory(projection, case_id);
  if (target.size() < 2)
    throw Error(ErrorCode::TrajectoryTooShort,
                "case " + case_id + " has fewer than 2 frames; similarity undefined");

  std::vector<Trajectory> candidates;
  for (auto& t : build_all_trajectories(projection.coords, projection.spec.channel))
    if (t.case_id != case_id && t.size() >= 2) candidates.push_back(std::move(t));

  std::vector<SimilarCase> ranked(candidates.size());
  parallel_for(candidates.size(), [&](std::size_t i) {
    ranked[i] = {candidates[i].case_id, cached_value(projection, target, candidates[i], cache)};
  });
  std::sort(ranked.begin(), ranked.end(), [](const SimilarCase& x, const SimilarCase& y) {
    return std::tie(x.value, x.case_id) < std::tie(y.value, y.case_id);
  });
  if (ranked.size() > k) ranked.resize(k);
  return ranked;
}

SimilarityMatrix similarity_matrix(const ProjectionResult& projection, DissimilarityCache* cache) {
  SimilarityMatrix out;
  std::vector<Trajectory> trajs;
  for (auto& t : build_all_trajectories(projection.coords, projection.spec.channel)) {
    if (t.size() >= 2) {
      out.case_ids.push_back(t.case_id);
      trajs.push_back(std::move(t));
    } else {
      out.excluded.push_back(t.case_id);
    }
  }
  const std::size_t n = trajs.size();
  out.values.assign(n * n, 0.0);
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) pairs.emplace_back(i, j);
  parallel_for(pairs.size(), [&](std::size_t p) {
    const auto [i, j] = pairs[p];
    const double v = cached_value(projection, trajs[i], trajs[j], cache);
    out.values[i * n + j] = v;
    out.values[j * n + i] = v;
  });
  return out;
}

std::string format_similarity_csv(const SimilarityMatrix& m) {
  std::ostringstream out;
  out.precision(17);
  out << "case_id";
  for (const auto& id : m.case_ids) out << ',' << id;
  out << '\n';
  for (std::size_t i = 0; i < m.case_ids.size(); ++i) {
    out << m.case_ids[i];
    for (std::size_t j = 0; j < m.case_ids.size(); ++j) out << ',' << m.at(i, j);
    out << '\n';
  }
  return out.str();
}

}  // namespace tfv
