#pragma once

// Brute-force reference implementations used only by the tests. Nothing
// here calls into the library's algorithms.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numeric>
#include <utility>
#include <vector>

namespace oracle {

using Pt = std::array<double, 2>;
using Matrix = std::vector<std::vector<double>>;

inline double dist(const Pt& a, const Pt& b) { return std::hypot(a[0] - b[0], a[1] - b[1]); }

struct Eigen {
  std::vector<double> values;    // descending
  std::vector<std::vector<double>> vectors;  // vectors[k] is the k-th eigenvector
};

// Cyclic Jacobi rotations on a symmetric matrix.
inline Eigen jacobi_eigen(Matrix a) {
  const std::size_t n = a.size();
  Matrix v(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) v[i][i] = 1.0;
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += a[p][q] * a[p][q];
    if (off < 1e-30) break;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        if (std::abs(a[p][q]) < 1e-300) continue;
        const double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a[k][p], akq = a[k][q];
          a[k][p] = c * akp - s * akq;
          a[k][q] = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a[p][k], aqk = a[q][k];
          a[p][k] = c * apk - s * aqk;
          a[q][k] = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v[k][p], vkq = v[k][q];
          v[k][p] = c * vkp - s * vkq;
          v[k][q] = s * vkp + c * vkq;
        }
      }
    }
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto i, auto j) { return a[i][i] > a[j][j]; });
  Eigen out;
  for (auto i : order) {
    out.values.push_back(a[i][i]);
    std::vector<double> vec(n);
    for (std::size_t k = 0; k < n; ++k) vec[k] = v[k][i];
    out.vectors.push_back(std::move(vec));
  }
  return out;
}

// Projection of rows onto the two leading covariance eigenvectors with the
// largest-magnitude entry of each made non-negative.
struct Pca {
  std::vector<Pt> coords;
  double lambda[2];
};

inline Pca pca_2d(const Matrix& rows) {
  const std::size_t n = rows.size(), d = rows[0].size();
  std::vector<double> mean(d, 0.0);
  for (const auto& r : rows)
    for (std::size_t j = 0; j < d; ++j) mean[j] += r[j] / static_cast<double>(n);
  Matrix cov(d, std::vector<double>(d, 0.0));
  for (const auto& r : rows)
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j)
        cov[i][j] += (r[i] - mean[i]) * (r[j] - mean[j]) / static_cast<double>(n - 1);
  auto eig = jacobi_eigen(cov);
  for (int k = 0; k < 2; ++k) {
    auto& v = eig.vectors[k];
    std::size_t best = 0;
    for (std::size_t i = 1; i < d; ++i)
      if (std::abs(v[i]) > std::abs(v[best])) best = i;
    if (v[best] < 0)
      for (auto& x : v) x = -x;
  }
  Pca out;
  out.lambda[0] = eig.values[0];
  out.lambda[1] = eig.values[1];
  for (const auto& r : rows) {
    Pt p{0.0, 0.0};
    for (std::size_t j = 0; j < d; ++j) {
      p[0] += (r[j] - mean[j]) * eig.vectors[0][j];
      p[1] += (r[j] - mean[j]) * eig.vectors[1][j];
    }
    out.coords.push_back(p);
  }
  return out;
}

// Textbook DBSCAN: core points, connected components of the core graph,
// borders attached to the earliest component (ordered by smallest core
// index) that has a core within eps. Labels follow that component order.
inline std::vector<int> dbscan(const std::vector<Pt>& pts, double eps, std::size_t min_samples) {
  const std::size_t n = pts.size();
  std::vector<std::vector<std::size_t>> nb(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (dist(pts[i], pts[j]) <= eps) nb[i].push_back(j);
  std::vector<bool> core(n);
  for (std::size_t i = 0; i < n; ++i) core[i] = nb[i].size() >= min_samples;

  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  std::function<std::size_t(std::size_t)> find = [&](std::size_t x) {
    return parent[x] == x ? x : parent[x] = find(parent[x]);
  };
  for (std::size_t i = 0; i < n; ++i)
    if (core[i])
      for (auto j : nb[i])
        if (core[j]) parent[find(i)] = find(j);

  std::vector<int> comp_label(n, -1);
  std::vector<int> label(n, -1);
  int next = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!core[i]) continue;
    auto r = find(i);
    if (comp_label[r] < 0) comp_label[r] = next++;
    label[i] = comp_label[r];
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (core[i]) continue;
    int best = -1;
    for (auto j : nb[i])
      if (core[j] && (best < 0 || label[j] < best)) best = label[j];
    label[i] = best;
  }
  return label;
}

// Member index nearest the cluster mean; lowest index on ties.
inline std::size_t centroid(const std::vector<Pt>& members) {
  Pt mean{0, 0};
  for (const auto& p : members) {
    mean[0] += p[0];
    mean[1] += p[1];
  }
  mean[0] /= static_cast<double>(members.size());
  mean[1] /= static_cast<double>(members.size());
  std::size_t best = 0;
  for (std::size_t i = 1; i < members.size(); ++i)
    if (dist(members[i], mean) < dist(members[best], mean)) best = i;
  return best;
}

// Motion-normalised cost of aligning a[i] with b[j] (forward difference at
// the first point, 1e-9 denominator floor).
inline double pair_cost(const std::vector<Pt>& a, const std::vector<Pt>& b, std::size_t i, std::size_t j) {
  auto motion = [](const std::vector<Pt>& t, std::size_t k) {
    return k == 0 ? dist(t[1], t[0]) : dist(t[k], t[k - 1]);
  };
  return dist(a[i], b[j]) / std::max(motion(a, i) + motion(b, j), 1e-9);
}

// Minimum over every monotone path of the path-ordered cost sum.
inline double dtw_enumerate(const std::vector<Pt>& a, const std::vector<Pt>& b) {
  double best = std::numeric_limits<double>::infinity();
  std::function<void(std::size_t, std::size_t, double)> walk = [&](std::size_t i, std::size_t j, double acc) {
    acc = acc + pair_cost(a, b, i, j);
    if (i == a.size() - 1 && j == b.size() - 1) {
      best = std::min(best, acc);
      return;
    }
    if (i + 1 < a.size() && j + 1 < b.size()) walk(i + 1, j + 1, acc);
    if (i + 1 < a.size()) walk(i + 1, j, acc);
    if (j + 1 < b.size()) walk(i, j + 1, acc);
  };
  walk(0, 0, 0.0);
  return best;
}

}  // namespace oracle
