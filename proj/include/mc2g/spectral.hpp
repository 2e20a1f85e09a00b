#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <vector>

#include "mc2g/core.hpp"
#include "mc2g/rng.hpp"

namespace mc2g {

// The cluster count is passed to each call; this holds solver settings.
struct SpectralConfig {
  double eig_tol = 1e-6;
  int eig_max_iter = 300;
  int kmeans_restarts = 10;
  int kmeans_max_iter = 100;
  std::uint64_t seed = 0;
  // Zero out nodes whose degree exceeds trim_factor times the average.
  bool trim = false;
  double trim_factor = 20.0;

  void validate() const {
    if (!(eig_tol > 0.0)) throw Error("SpectralConfig: eig_tol must be positive");
    if (eig_max_iter < 1 || kmeans_restarts < 1 || kmeans_max_iter < 1) {
      throw Error("SpectralConfig: iteration counts must be positive");
    }
  }
};

struct SpectralEmbedding {
  Eigen::MatrixXd vectors;  // n x k, orthonormal columns
  Eigen::VectorXd values;   // Ritz values, |values| non-increasing
  int iterations = 0;
  bool converged = false;
  double subspace_change = 0.0;
};

namespace detail {

// y = A x for the (optionally trimmed) adjacency matrix.
inline void adjacency_multiply(const SimpleGraph& g, const std::vector<char>& keep, const Eigen::MatrixXd& x,
                               Eigen::MatrixXd& y) {
  y.setZero(x.rows(), x.cols());
  for (std::size_t i = 0; i < g.num_nodes(); ++i) {
    if (!keep[i]) continue;
    for (std::uint32_t j : g.neighbors(i)) {
      if (keep[j]) y.row(static_cast<Eigen::Index>(i)) += x.row(j);
    }
  }
}

inline Eigen::MatrixXd orthonormalize(const Eigen::MatrixXd& m) {
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(m);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(m.rows(), m.cols());
  // Fix column signs so the result depends only on span and input order.
  const Eigen::MatrixXd r = qr.matrixQR().topRows(m.cols()).triangularView<Eigen::Upper>();
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    if (r(c, c) < 0.0) q.col(c) *= -1.0;
  }
  return q;
}

}  // namespace detail

/// Top-k eigenvectors (by eigenvalue magnitude) of the adjacency matrix via
/// orthogonal iteration, with a Rayleigh-Ritz rotation on exit.
inline SpectralEmbedding spectral_embed(const SimpleGraph& g, int k, const SpectralConfig& cfg) {
  cfg.validate();
  const std::size_t n = g.num_nodes();
  if (n == 0) throw Error("spectral_embed: empty graph");
  if (k < 1 || static_cast<std::size_t>(k) >= n) throw Error("spectral_embed: need 1 <= k < n");

  std::vector<char> keep(n, 1);
  if (cfg.trim && g.num_edges() > 0) {
    const double avg = 2.0 * static_cast<double>(g.num_edges()) / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
      if (static_cast<double>(g.degree(i)) > cfg.trim_factor * avg) keep[i] = 0;
    }
  }

  Rng rng(cfg.seed);
  const auto rows = static_cast<Eigen::Index>(n);
  Eigen::MatrixXd q(rows, k);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < k; ++c) q(r, c) = rng.normal();
  }
  q = detail::orthonormalize(q);

  SpectralEmbedding out;
  Eigen::MatrixXd y;
  for (int it = 1; it <= cfg.eig_max_iter; ++it) {
    detail::adjacency_multiply(g, keep, q, y);
    if (y.norm() == 0.0) {
      // Zero operator on this subspace (e.g. no edges): any basis is invariant.
      out.iterations = it;
      out.converged = true;
      out.subspace_change = 0.0;
      break;
    }
    Eigen::MatrixXd next = detail::orthonormalize(y);
    out.subspace_change = (next - q * (q.transpose() * next)).norm();
    q = std::move(next);
    out.iterations = it;
    if (out.subspace_change < cfg.eig_tol) {
      out.converged = true;
      break;
    }
  }

  detail::adjacency_multiply(g, keep, q, y);
  Eigen::MatrixXd t = q.transpose() * y;
  t = 0.5 * (t + t.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(t);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(k));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    return std::abs(eig.eigenvalues()(a)) > std::abs(eig.eigenvalues()(b));
  });
  Eigen::MatrixXd rot(k, k);
  out.values.resize(k);
  for (Eigen::Index c = 0; c < k; ++c) {
    rot.col(c) = eig.eigenvectors().col(order[static_cast<std::size_t>(c)]);
    out.values(c) = eig.eigenvalues()(order[static_cast<std::size_t>(c)]);
  }
  out.vectors = q * rot;
  return out;
}

// ---------------------------------------------------------------------------
// k-means with k-means++ seeding.

struct KMeansOptions {
  int restarts = 10;
  int max_iter = 100;
};

struct KMeansResult {
  std::vector<int> labels;
  Eigen::MatrixXd centroids;  // k x d
  double wcss = 0.0;
};

namespace detail {

// Nearest centroid, lowest index on ties.
inline int nearest(const Eigen::MatrixXd& points, Eigen::Index i, const Eigen::MatrixXd& centroids, double* dist) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (Eigen::Index c = 0; c < centroids.rows(); ++c) {
    const double d = (points.row(i) - centroids.row(c)).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(c);
    }
  }
  if (dist) *dist = best_d;
  return best;
}

inline Eigen::MatrixXd kmeanspp_seed(const Eigen::MatrixXd& points, int k, Rng& rng) {
  const Eigen::Index n = points.rows();
  Eigen::MatrixXd centroids(k, points.cols());
  centroids.row(0) = points.row(static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n))));
  std::vector<double> d2(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) d2[static_cast<std::size_t>(i)] = (points.row(i) - centroids.row(0)).squaredNorm();
  for (int c = 1; c < k; ++c) {
    const double total = std::accumulate(d2.begin(), d2.end(), 0.0);
    const Eigen::Index pick = total > 0.0 ? static_cast<Eigen::Index>(rng.categorical(d2))
                                          : static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n)));
    centroids.row(c) = points.row(pick);
    for (Eigen::Index i = 0; i < n; ++i) {
      d2[static_cast<std::size_t>(i)] = std::min(d2[static_cast<std::size_t>(i)], (points.row(i) - centroids.row(c)).squaredNorm());
    }
  }
  return centroids;
}

inline KMeansResult lloyd(const Eigen::MatrixXd& points, Eigen::MatrixXd centroids, int max_iter) {
  const Eigen::Index n = points.rows();
  const auto k = centroids.rows();
  KMeansResult res;
  res.labels.assign(static_cast<std::size_t>(n), -1);
  for (int it = 0; it < max_iter; ++it) {
    bool changed = false;
    for (Eigen::Index i = 0; i < n; ++i) {
      const int c = nearest(points, i, centroids, nullptr);
      if (c != res.labels[static_cast<std::size_t>(i)]) {
        res.labels[static_cast<std::size_t>(i)] = c;
        changed = true;
      }
    }
    if (!changed) break;
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, points.cols());
    std::vector<std::size_t> counts(static_cast<std::size_t>(k), 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      sums.row(res.labels[static_cast<std::size_t>(i)]) += points.row(i);
      ++counts[static_cast<std::size_t>(res.labels[static_cast<std::size_t>(i)])];
    }
    for (Eigen::Index c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] > 0) centroids.row(c) = sums.row(c) / static_cast<double>(counts[static_cast<std::size_t>(c)]);
    }
  }
  res.wcss = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    res.wcss += (points.row(i) - centroids.row(res.labels[static_cast<std::size_t>(i)])).squaredNorm();
  }
  res.centroids = std::move(centroids);
  return res;
}

// Moves the point farthest from the largest cluster's centroid into each
// empty cluster until none is empty.
inline void repair_empty_clusters(const Eigen::MatrixXd& points, KMeansResult& res) {
  const auto k = static_cast<std::size_t>(res.centroids.rows());
  while (true) {
    std::vector<std::size_t> counts(k, 0);
    for (int a : res.labels) ++counts[static_cast<std::size_t>(a)];
    const auto empty = std::find(counts.begin(), counts.end(), std::size_t{0});
    if (empty == counts.end()) return;
    const auto largest = static_cast<int>(std::max_element(counts.begin(), counts.end()) - counts.begin());
    if (counts[static_cast<std::size_t>(largest)] < 2) return;
    Eigen::RowVectorXd centroid = Eigen::RowVectorXd::Zero(points.cols());
    for (std::size_t i = 0; i < res.labels.size(); ++i) {
      if (res.labels[i] == largest) centroid += points.row(static_cast<Eigen::Index>(i));
    }
    centroid /= static_cast<double>(counts[static_cast<std::size_t>(largest)]);
    std::size_t far = 0;
    double far_d = -1.0;
    for (std::size_t i = 0; i < res.labels.size(); ++i) {
      if (res.labels[i] != largest) continue;
      const double d = (points.row(static_cast<Eigen::Index>(i)) - centroid).squaredNorm();
      if (d > far_d) {
        far_d = d;
        far = i;
      }
    }
    const auto target = static_cast<int>(empty - counts.begin());
    res.labels[far] = target;
    res.centroids.row(target) = points.row(static_cast<Eigen::Index>(far));
    res.centroids.row(largest) = centroid;
  }
}

}  // namespace detail

/// Best of `restarts` k-means++ / Lloyd runs by within-cluster sum of squares.
inline KMeansResult kmeans(const Eigen::MatrixXd& points, int k, const KMeansOptions& opts, std::uint64_t seed) {
  if (k < 1 || points.rows() < k) throw Error("kmeans: need at least k points");
  Rng rng(seed);
  KMeansResult best;
  best.wcss = std::numeric_limits<double>::infinity();
  for (int r = 0; r < opts.restarts; ++r) {
    auto res = detail::lloyd(points, detail::kmeanspp_seed(points, k, rng), opts.max_iter);
    if (res.wcss < best.wcss) best = std::move(res);
  }
  detail::repair_empty_clusters(points, best);
  return best;
}

/// Weak recovery: k-means on the rows of the adjacency spectral embedding.
inline ClusterLabels spectral_cluster(const SimpleGraph& g, int k, const SpectralConfig& cfg) {
  if (k < 2) throw Error("spectral_cluster: k must be at least 2");
  const auto emb = spectral_embed(g, k, cfg);
  auto res = kmeans(emb.vectors, k, {cfg.kmeans_restarts, cfg.kmeans_max_iter}, derive_seed(cfg.seed, 0x6b6d));
  return ClusterLabels(std::move(res.labels), k);
}

}  // namespace mc2g
