#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mc2g/core.hpp"
#include "mc2g/rng.hpp"

namespace mc2g {

/// A graph routed into a part for weak recovery (a) and a part for
/// estimation and refinement (b).
struct SplitGraphs {
  SimpleGraph part_a;
  SimpleGraph part_b;
  double split_probability = 1.0;  // 1.0 marks the identity split
};

enum class SplitMode { kSimplified, kAnalyzed };

inline SplitMode parse_split_mode(std::string_view s) {
  if (s == "simplified") return SplitMode::kSimplified;
  if (s == "analyzed") return SplitMode::kAnalyzed;
  throw Error("unknown split mode '" + std::string(s) + "' (expected analyzed or simplified)");
}

inline std::string_view to_string(SplitMode m) { return m == SplitMode::kSimplified ? "simplified" : "analyzed"; }

inline double default_split_probability(std::size_t n_nodes) {
  if (n_nodes < 3) throw Error("default_split_probability: need at least 3 nodes");
  return 1.0 / std::sqrt(std::log(static_cast<double>(n_nodes)));
}

/// Sends each edge to part_a with probability q, otherwise to part_b.
/// Coin flips on G's edges are distributed like intersecting G with an
/// independent Erdos-Renyi split of the complete graph.
inline SplitGraphs split_graph(const SimpleGraph& g, std::optional<double> q, std::uint64_t seed) {
  const double prob = q ? *q : default_split_probability(g.num_nodes());
  if (!(prob > 0.0 && prob < 1.0)) throw Error("split_graph: q must lie in (0, 1)");
  Rng rng(seed);
  std::vector<Edge> a, b;
  for (const auto& e : g.edges()) (rng.bernoulli(prob) ? a : b).push_back(e);
  return {SimpleGraph(g.num_nodes(), std::move(a)), SimpleGraph(g.num_nodes(), std::move(b)), prob};
}

inline SplitGraphs identity_split(const SimpleGraph& g) { return {g, g, 1.0}; }

}  // namespace mc2g
