#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cstdint>
#include <span>
#include <vector>

#include "mc2g/core.hpp"
#include "mc2g/genmodel.hpp"

namespace mc2g {

struct EstimationOptions {
  // Clamp connectivity estimates to [1/n^2, 1 - 1/n^2].
  bool clamp = true;
  // Pseudo-count added to every symbol count of a personalization block.
  double smoothing = 1.0;
};

struct ConnectivityEstimate {
  ConnectivityMatrix matrix;
  std::vector<int> degenerate;  // clusters with fewer than two members
};

/// Plug-in connectivity estimate: within-cluster edge density over C(|U_a|, 2)
/// pairs, between-cluster density over |U_a| |U_a'| pairs.
inline ConnectivityEstimate estimate_connectivity(const SimpleGraph& g, const ClusterLabels& labels,
                                                  const EstimationOptions& opts = {}) {
  if (labels.size() != g.num_nodes()) throw Error("estimate_connectivity: labels do not cover the graph");
  const int k = labels.k();
  const auto sizes = labels.cluster_sizes();
  Eigen::MatrixXd edges = Eigen::MatrixXd::Zero(k, k);
  for (const auto& [u, v] : g.edges()) {
    const int a = labels[u];
    const int b = labels[v];
    edges(a, b) += 1.0;
    if (a != b) edges(b, a) += 1.0;
  }
  const double n = static_cast<double>(g.num_nodes());
  const double floor = opts.clamp ? 1.0 / (n * n) : 0.0;
  const double ceil = opts.clamp ? 1.0 - floor : 1.0;
  ConnectivityEstimate out;
  Eigen::MatrixXd probs(k, k);
  for (int a = 0; a < k; ++a) {
    const double sa = static_cast<double>(sizes[static_cast<std::size_t>(a)]);
    if (sizes[static_cast<std::size_t>(a)] < 2) out.degenerate.push_back(a);
    for (int b = a; b < k; ++b) {
      const double sb = static_cast<double>(sizes[static_cast<std::size_t>(b)]);
      const double pairs = a == b ? sa * (sa - 1.0) / 2.0 : sa * sb;
      double x = pairs > 0.0 ? edges(a, b) / pairs : floor;
      x = std::clamp(x, floor, ceil);
      probs(a, b) = x;
      probs(b, a) = x;
    }
  }
  out.matrix = ConnectivityMatrix(std::move(probs));
  return out;
}

/// k1 x k2 table of distributions over the alphabet.
class PersonalizationTable {
 public:
  PersonalizationTable() = default;
  PersonalizationTable(int k1, int k2, std::size_t alphabet_size)
      : k1_(k1), k2_(k2), s_(alphabet_size), probs_(static_cast<std::size_t>(k1 * k2) * alphabet_size, 0.0) {}

  int k1() const noexcept { return k1_; }
  int k2() const noexcept { return k2_; }
  std::size_t alphabet_size() const noexcept { return s_; }

  std::span<double> at(int a, int b) { return std::span<double>(probs_).subspan(offset(a, b), s_); }
  std::span<const double> at(int a, int b) const { return std::span<const double>(probs_).subspan(offset(a, b), s_); }

  bool operator==(const PersonalizationTable&) const = default;

 private:
  std::size_t offset(int a, int b) const { return (static_cast<std::size_t>(a) * static_cast<std::size_t>(k2_) + static_cast<std::size_t>(b)) * s_; }

  int k1_ = 0;
  int k2_ = 0;
  std::size_t s_ = 0;
  std::vector<double> probs_;
};

/// Observed symbol counts per (user cluster, item cluster) block.
inline std::vector<std::uint64_t> block_symbol_counts(const RatingObservation& obs, const ClusterLabels& users,
                                                      const ClusterLabels& items, std::size_t alphabet_size) {
  std::vector<std::uint64_t> counts(static_cast<std::size_t>(users.k() * items.k()) * alphabet_size, 0);
  for (const auto& r : obs.triplets()) {
    if (r.symbol >= alphabet_size) throw Error("block_symbol_counts: symbol outside alphabet");
    const auto block = static_cast<std::size_t>(users[r.user] * items.k() + items[r.item]);
    ++counts[block * alphabet_size + r.symbol];
  }
  return counts;
}

/// Empirical symbol frequencies per block with add-`smoothing` pseudo-counts.
/// A block with no observations and no smoothing is set to uniform.
inline PersonalizationTable estimate_personalization(const RatingObservation& obs, const ClusterLabels& users,
                                                     const ClusterLabels& items, std::size_t alphabet_size,
                                                     const EstimationOptions& opts = {}) {
  if (users.size() != obs.n_users() || items.size() != obs.n_items()) {
    throw Error("estimate_personalization: labels do not cover the rating matrix");
  }
  if (opts.smoothing < 0.0) throw Error("estimate_personalization: smoothing must be nonnegative");
  const auto counts = block_symbol_counts(obs, users, items, alphabet_size);
  PersonalizationTable q(users.k(), items.k(), alphabet_size);
  for (int a = 0; a < users.k(); ++a) {
    for (int b = 0; b < items.k(); ++b) {
      const auto base = static_cast<std::size_t>(a * items.k() + b) * alphabet_size;
      double total = 0.0;
      for (std::size_t z = 0; z < alphabet_size; ++z) total += static_cast<double>(counts[base + z]) + opts.smoothing;
      auto cell = q.at(a, b);
      for (std::size_t z = 0; z < alphabet_size; ++z) {
        cell[z] = total > 0.0 ? (static_cast<double>(counts[base + z]) + opts.smoothing) / total
                              : 1.0 / static_cast<double>(alphabet_size);
      }
    }
  }
  return q;
}

struct ModelEstimates {
  ConnectivityMatrix b_user;
  ConnectivityMatrix b_item;
  PersonalizationTable q_hat;
  std::vector<int> degenerate_user;
  std::vector<int> degenerate_item;
};

inline ModelEstimates estimate_model(const RatingObservation& obs, const SimpleGraph& user_graph,
                                     const SimpleGraph& item_graph, const ClusterLabels& users,
                                     const ClusterLabels& items, std::size_t alphabet_size,
                                     const EstimationOptions& opts = {}) {
  auto bu = estimate_connectivity(user_graph, users, opts);
  auto bi = estimate_connectivity(item_graph, items, opts);
  return {std::move(bu.matrix), std::move(bi.matrix), estimate_personalization(obs, users, items, alphabet_size, opts),
          std::move(bu.degenerate), std::move(bi.degenerate)};
}

}  // namespace mc2g
