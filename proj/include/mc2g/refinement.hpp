#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <utility>
#include <vector>

#include "mc2g/core.hpp"
#include "mc2g/estimation.hpp"

namespace mc2g {

/// Per-candidate-cluster likelihood scores for one user or item.
struct LikelihoodBreakdown {
  std::vector<double> graph_term;
  std::vector<double> rating_term;
  std::vector<double> score;
  int argmax = 0;
  double margin = std::numeric_limits<double>::infinity();  // best minus runner-up
};

namespace detail {

inline int argmax_lowest(std::span<const double> v) {
  int best = 0;
  for (std::size_t a = 1; a < v.size(); ++a) {
    if (v[a] > v[static_cast<std::size_t>(best)]) best = static_cast<int>(a);
  }
  return best;
}

// Log-odds and log-probability tables shared by every entity in a pass.
struct LikelihoodTables {
  Eigen::MatrixXd user_logit;  // log(B/(1-B)), k1 x k1
  Eigen::MatrixXd item_logit;  // k2 x k2
  std::vector<double> log_q;   // (a * k2 + b) * s + z
  int k1 = 0;
  int k2 = 0;
  std::size_t s = 0;

  explicit LikelihoodTables(const ModelEstimates& est)
      : k1(est.q_hat.k1()), k2(est.q_hat.k2()), s(est.q_hat.alphabet_size()) {
    auto logit = [](const Eigen::MatrixXd& b) { return Eigen::MatrixXd((b.array() / (1.0 - b.array())).log()); };
    user_logit = logit(est.b_user.matrix());
    item_logit = logit(est.b_item.matrix());
    if (user_logit.rows() != k1 || item_logit.rows() != k2) throw Error("refinement: estimate dimensions disagree");
    log_q.resize(static_cast<std::size_t>(k1 * k2) * s);
    for (int a = 0; a < k1; ++a) {
      for (int b = 0; b < k2; ++b) {
        const auto cell = est.q_hat.at(a, b);
        for (std::size_t z = 0; z < s; ++z) log_q[static_cast<std::size_t>(a * k2 + b) * s + z] = std::log(cell[z]);
      }
    }
  }

  double lq(int a, int b, std::size_t z) const { return log_q[static_cast<std::size_t>(a * k2 + b) * s + z]; }
};

// `self_logit` is the connectivity log-odds table of the entity's own side,
// `edge_counts[c]` its edges into initial cluster c, `rating_counts[o * s + z]`
// its observed symbol-z ratings against other-side initial cluster o.
template <typename LogQ>
LikelihoodBreakdown score_entity(const Eigen::MatrixXd& self_logit, const std::vector<std::uint64_t>& edge_counts,
                                 const std::vector<std::uint64_t>& rating_counts, int k_other, std::size_t s, LogQ log_q) {
  const auto k_self = static_cast<int>(self_logit.rows());
  LikelihoodBreakdown out;
  out.graph_term.assign(static_cast<std::size_t>(k_self), 0.0);
  out.rating_term.assign(static_cast<std::size_t>(k_self), 0.0);
  out.score.assign(static_cast<std::size_t>(k_self), 0.0);
  for (int a = 0; a < k_self; ++a) {
    double g = 0.0;
    for (int c = 0; c < k_self; ++c) {
      if (edge_counts[static_cast<std::size_t>(c)] > 0) g += static_cast<double>(edge_counts[static_cast<std::size_t>(c)]) * self_logit(a, c);
    }
    double r = 0.0;
    for (int o = 0; o < k_other; ++o) {
      for (std::size_t z = 0; z < s; ++z) {
        const auto cnt = rating_counts[static_cast<std::size_t>(o) * s + z];
        if (cnt > 0) r += static_cast<double>(cnt) * log_q(a, o, z);
      }
    }
    out.graph_term[static_cast<std::size_t>(a)] = g;
    out.rating_term[static_cast<std::size_t>(a)] = r;
    out.score[static_cast<std::size_t>(a)] = g + r;
  }
  out.argmax = argmax_lowest(out.score);
  for (int a = 0; a < k_self; ++a) {
    if (a != out.argmax) out.margin = std::min(out.margin, out.score[static_cast<std::size_t>(out.argmax)] - out.score[static_cast<std::size_t>(a)]);
  }
  return out;
}

inline LikelihoodBreakdown score_user(std::size_t i, const RatingObservation& obs, const SimpleGraph& g,
                                      const ClusterLabels& users, const ClusterLabels& items, const LikelihoodTables& t) {
  std::vector<std::uint64_t> edges(static_cast<std::size_t>(t.k1), 0);
  for (std::uint32_t nb : g.neighbors(i)) ++edges[static_cast<std::size_t>(users[nb])];
  std::vector<std::uint64_t> ratings(static_cast<std::size_t>(t.k2) * t.s, 0);
  for (const auto& r : obs.user_ratings(i)) ++ratings[static_cast<std::size_t>(items[r.item]) * t.s + r.symbol];
  return score_entity(t.user_logit, edges, ratings, t.k2, t.s, [&](int a, int b, std::size_t z) { return t.lq(a, b, z); });
}

inline LikelihoodBreakdown score_item(std::size_t j, const RatingObservation& obs, const SimpleGraph& g,
                                      const ClusterLabels& users, const ClusterLabels& items, const LikelihoodTables& t) {
  std::vector<std::uint64_t> edges(static_cast<std::size_t>(t.k2), 0);
  for (std::uint32_t nb : g.neighbors(j)) ++edges[static_cast<std::size_t>(items[nb])];
  std::vector<std::uint64_t> ratings(static_cast<std::size_t>(t.k1) * t.s, 0);
  for (const auto& r : obs.item_ratings(j)) ++ratings[static_cast<std::size_t>(users[r.user]) * t.s + r.symbol];
  return score_entity(t.item_logit, edges, ratings, t.k1, t.s, [&](int b, int a, std::size_t z) { return t.lq(a, b, z); });
}

inline void check_refinement_inputs(const RatingObservation& obs, const SimpleGraph& gu, const SimpleGraph& gi,
                                    const ClusterLabels& users, const ClusterLabels& items, const ModelEstimates& est) {
  if (users.size() != obs.n_users() || items.size() != obs.n_items()) throw Error("refinement: labels do not cover ratings");
  if (gu.num_nodes() != users.size() || gi.num_nodes() != items.size()) throw Error("refinement: graph sizes disagree with labels");
  if (est.q_hat.k1() != users.k() || est.q_hat.k2() != items.k()) throw Error("refinement: estimate dimensions disagree with labels");
}

}  // namespace detail

/// Local maximum-likelihood cluster for user i against frozen initial labels.
/// Lowest cluster index wins ties.
inline std::pair<int, LikelihoodBreakdown> refine_user(std::size_t i, const RatingObservation& obs,
                                                       const SimpleGraph& user_graph_b, const ClusterLabels& init_users,
                                                       const ClusterLabels& init_items, const ModelEstimates& est) {
  detail::check_refinement_inputs(obs, user_graph_b, SimpleGraph::empty(init_items.size()), init_users, init_items, est);
  const detail::LikelihoodTables t(est);
  auto lb = detail::score_user(i, obs, user_graph_b, init_users, init_items, t);
  return {lb.argmax, std::move(lb)};
}

/// Item-side counterpart of refine_user.
inline std::pair<int, LikelihoodBreakdown> refine_item(std::size_t j, const RatingObservation& obs,
                                                       const SimpleGraph& item_graph_b, const ClusterLabels& init_users,
                                                       const ClusterLabels& init_items, const ModelEstimates& est) {
  detail::check_refinement_inputs(obs, SimpleGraph::empty(init_users.size()), item_graph_b, init_users, init_items, est);
  const detail::LikelihoodTables t(est);
  auto lb = detail::score_item(j, obs, item_graph_b, init_users, init_items, t);
  return {lb.argmax, std::move(lb)};
}

/// One refinement pass over every user and item. Each entity is scored
/// against the initial labels only, never against other refined entities.
inline std::pair<ClusterLabels, ClusterLabels> refine_all(const RatingObservation& obs, const SimpleGraph& user_graph_b,
                                                          const SimpleGraph& item_graph_b, const ClusterLabels& init_users,
                                                          const ClusterLabels& init_items, const ModelEstimates& est) {
  detail::check_refinement_inputs(obs, user_graph_b, item_graph_b, init_users, init_items, est);
  const detail::LikelihoodTables t(est);
  std::vector<int> users(init_users.size()), items(init_items.size());
  for (std::size_t i = 0; i < users.size(); ++i) users[i] = detail::score_user(i, obs, user_graph_b, init_users, init_items, t).argmax;
  for (std::size_t j = 0; j < items.size(); ++j) items[j] = detail::score_item(j, obs, item_graph_b, init_users, init_items, t).argmax;
  return {ClusterLabels(std::move(users), init_users.k()), ClusterLabels(std::move(items), init_items.k())};
}

// ---------------------------------------------------------------------------
// Nominal matrix reconstruction.

/// Block (a, b) takes the most probable symbol of the estimated distribution.
inline NominalMatrix reconstruct_nominal_argmax(const ClusterLabels& users, const ClusterLabels& items, const ModelEstimates& est) {
  if (est.q_hat.k1() != users.k() || est.q_hat.k2() != items.k()) throw Error("reconstruct: estimate dimensions disagree");
  std::vector<Symbol> blocks;
  for (int a = 0; a < users.k(); ++a) {
    for (int b = 0; b < items.k(); ++b) blocks.push_back(static_cast<Symbol>(detail::argmax_lowest(est.q_hat.at(a, b))));
  }
  return NominalMatrix(std::move(blocks), users, items, est.q_hat.alphabet_size());
}

/// Block (a, b) takes the most frequent observed symbol; empty blocks take
/// symbol 0 and are reported in `empty_blocks`.
inline NominalMatrix reconstruct_nominal_majority(const ClusterLabels& users, const ClusterLabels& items,
                                                  const RatingObservation& obs, std::size_t alphabet_size,
                                                  std::vector<std::pair<int, int>>* empty_blocks = nullptr) {
  const auto counts = block_symbol_counts(obs, users, items, alphabet_size);
  std::vector<Symbol> blocks;
  std::vector<double> cell(alphabet_size);
  for (int a = 0; a < users.k(); ++a) {
    for (int b = 0; b < items.k(); ++b) {
      const auto base = static_cast<std::size_t>(a * items.k() + b) * alphabet_size;
      std::uint64_t total = 0;
      for (std::size_t z = 0; z < alphabet_size; ++z) {
        cell[z] = static_cast<double>(counts[base + z]);
        total += counts[base + z];
      }
      if (total == 0 && empty_blocks) empty_blocks->emplace_back(a, b);
      blocks.push_back(static_cast<Symbol>(detail::argmax_lowest(cell)));
    }
  }
  return NominalMatrix(std::move(blocks), users, items, alphabet_size);
}

}  // namespace mc2g
