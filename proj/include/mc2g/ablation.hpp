#pragma once

// Cluster initialization from rating profiles, used when a side has no
// similarity graph. This is a controlled stand-in for single-graph
// baselines, not part of the two-graph algorithm.

#include <Eigen/Dense>
#include <limits>
#include <optional>
#include <vector>

#include "mc2g/core.hpp"
#include "mc2g/rng.hpp"
#include "mc2g/spectral.hpp"

namespace mc2g {

enum class Side { kUsers, kItems };

namespace detail {

inline double global_mean(const RatingObservation& obs, const RatingAlphabet& alphabet) {
  if (obs.size() == 0) return 0.0;
  double s = 0.0;
  for (const auto& r : obs.triplets()) s += alphabet.value(r.symbol);
  return s / static_cast<double>(obs.size());
}

inline std::span<const Rating> ratings_of(const RatingObservation& obs, Side side, std::size_t e) {
  return side == Side::kUsers ? obs.user_ratings(e) : obs.item_ratings(e);
}

inline std::size_t counterpart(const Rating& r, Side side) { return side == Side::kUsers ? r.item : r.user; }

// k-means over mean-imputed full profiles. A profile is stored as its sparse
// deviation from the global mean, so imputed coordinates are zero.
inline std::vector<int> sparse_profile_kmeans(const RatingObservation& obs, Side side, int k, const RatingAlphabet& alphabet,
                                              const KMeansOptions& opts, std::uint64_t seed) {
  const std::size_t n = side == Side::kUsers ? obs.n_users() : obs.n_items();
  const std::size_t dim = side == Side::kUsers ? obs.n_items() : obs.n_users();
  if (n < static_cast<std::size_t>(k)) throw Error("profile k-means: fewer entities than clusters");
  const double mu = global_mean(obs, alphabet);
  std::vector<double> sq(n, 0.0);
  for (std::size_t e = 0; e < n; ++e) {
    for (const auto& r : ratings_of(obs, side, e)) {
      const double d = alphabet.value(r.symbol) - mu;
      sq[e] += d * d;
    }
  }
  auto dot = [&](std::size_t e, const std::vector<double>& c) {
    double s = 0.0;
    for (const auto& r : ratings_of(obs, side, e)) s += (alphabet.value(r.symbol) - mu) * c[counterpart(r, side)];
    return s;
  };
  auto densify = [&](std::size_t e) {
    std::vector<double> c(dim, 0.0);
    for (const auto& r : ratings_of(obs, side, e)) c[counterpart(r, side)] = alphabet.value(r.symbol) - mu;
    return c;
  };
  auto norm2 = [](const std::vector<double>& c) {
    double s = 0.0;
    for (double x : c) s += x * x;
    return s;
  };

  Rng rng(seed);
  std::vector<int> best;
  double best_wcss = std::numeric_limits<double>::infinity();
  for (int restart = 0; restart < opts.restarts; ++restart) {
    std::vector<std::vector<double>> centers;
    std::vector<double> cn;
    centers.push_back(densify(rng.below(n)));
    cn.push_back(norm2(centers.back()));
    std::vector<double> d2(n);
    for (std::size_t e = 0; e < n; ++e) d2[e] = std::max(0.0, sq[e] - 2.0 * dot(e, centers[0]) + cn[0]);
    for (int c = 1; c < k; ++c) {
      double total = 0.0;
      for (double x : d2) total += x;
      const std::size_t pick = total > 0.0 ? rng.categorical(d2) : rng.below(n);
      centers.push_back(densify(pick));
      cn.push_back(norm2(centers.back()));
      for (std::size_t e = 0; e < n; ++e) d2[e] = std::min(d2[e], std::max(0.0, sq[e] - 2.0 * dot(e, centers.back()) + cn.back()));
    }
    std::vector<int> labels(n, -1);
    double wcss = 0.0;
    for (int it = 0; it < opts.max_iter; ++it) {
      bool changed = false;
      wcss = 0.0;
      for (std::size_t e = 0; e < n; ++e) {
        int arg = 0;
        double bd = std::numeric_limits<double>::infinity();
        for (int c = 0; c < k; ++c) {
          const double d = sq[e] - 2.0 * dot(e, centers[static_cast<std::size_t>(c)]) + cn[static_cast<std::size_t>(c)];
          if (d < bd) {
            bd = d;
            arg = c;
          }
        }
        wcss += std::max(0.0, bd);
        if (arg != labels[e]) {
          labels[e] = arg;
          changed = true;
        }
      }
      if (!changed) break;
      std::vector<std::vector<double>> sums(static_cast<std::size_t>(k), std::vector<double>(dim, 0.0));
      std::vector<std::size_t> counts(static_cast<std::size_t>(k), 0);
      for (std::size_t e = 0; e < n; ++e) {
        const auto c = static_cast<std::size_t>(labels[e]);
        ++counts[c];
        for (const auto& r : ratings_of(obs, side, e)) sums[c][counterpart(r, side)] += alphabet.value(r.symbol) - mu;
      }
      for (std::size_t c = 0; c < static_cast<std::size_t>(k); ++c) {
        if (counts[c] == 0) continue;
        for (double& x : sums[c]) x /= static_cast<double>(counts[c]);
        centers[c] = std::move(sums[c]);
        cn[c] = norm2(centers[c]);
      }
    }
    if (wcss < best_wcss) {
      best_wcss = wcss;
      best = labels;
    }
  }
  return best;
}

}  // namespace detail

/// Clusters one side of the rating matrix by k-means over mean-imputed
/// rating profiles. With labels for the other side, an entity's profile is
/// its mean rating within each other-side cluster (k_other coordinates);
/// without them it is the full row or column.
inline ClusterLabels profile_cluster(const RatingObservation& obs, Side side, int k, const RatingAlphabet& alphabet,
                                     const std::optional<ClusterLabels>& other, const KMeansOptions& opts, std::uint64_t seed) {
  if (!other) {
    auto labels = detail::sparse_profile_kmeans(obs, side, k, alphabet, opts, seed);
    // An empty cluster takes the first member of the largest one.
    std::vector<std::size_t> counts(static_cast<std::size_t>(k), 0);
    for (int a : labels) ++counts[static_cast<std::size_t>(a)];
    for (int c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] > 0) continue;
      const auto largest = static_cast<int>(std::max_element(counts.begin(), counts.end()) - counts.begin());
      for (auto& a : labels) {
        if (a == largest) {
          a = c;
          --counts[static_cast<std::size_t>(largest)];
          ++counts[static_cast<std::size_t>(c)];
          break;
        }
      }
    }
    return ClusterLabels(std::move(labels), k);
  }
  const std::size_t n = side == Side::kUsers ? obs.n_users() : obs.n_items();
  const int ko = other->k();
  const double mu = detail::global_mean(obs, alphabet);
  Eigen::MatrixXd points = Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(n), ko, mu);
  for (std::size_t e = 0; e < n; ++e) {
    std::vector<double> sum(static_cast<std::size_t>(ko), 0.0);
    std::vector<std::size_t> cnt(static_cast<std::size_t>(ko), 0);
    for (const auto& r : detail::ratings_of(obs, side, e)) {
      const auto o = static_cast<std::size_t>((*other)[detail::counterpart(r, side)]);
      sum[o] += alphabet.value(r.symbol);
      ++cnt[o];
    }
    for (int o = 0; o < ko; ++o) {
      if (cnt[static_cast<std::size_t>(o)] > 0) points(static_cast<Eigen::Index>(e), o) = sum[static_cast<std::size_t>(o)] / static_cast<double>(cnt[static_cast<std::size_t>(o)]);
    }
  }
  auto res = kmeans(points, k, opts, seed);
  return ClusterLabels(std::move(res.labels), k);
}

}  // namespace mc2g
