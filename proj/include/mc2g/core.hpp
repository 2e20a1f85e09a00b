#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace mc2g {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Symbol = std::uint16_t;

/// Assignment of entities to clusters 0..k-1.
class ClusterLabels {
 public:
  ClusterLabels() = default;
  ClusterLabels(std::vector<int> assignments, int k) : assignments_(std::move(assignments)), k_(k) {
    if (k_ < 1) throw Error("ClusterLabels: k must be positive");
    for (std::size_t i = 0; i < assignments_.size(); ++i) {
      if (assignments_[i] < 0 || assignments_[i] >= k_) {
        throw Error("ClusterLabels: entity " + std::to_string(i) + " has label " +
                    std::to_string(assignments_[i]) + " outside [0, " + std::to_string(k_) + ")");
      }
    }
  }

  std::size_t size() const noexcept { return assignments_.size(); }
  int k() const noexcept { return k_; }
  int operator[](std::size_t i) const { return assignments_[i]; }
  std::span<const int> assignments() const noexcept { return assignments_; }

  std::vector<std::size_t> cluster_sizes() const {
    std::vector<std::size_t> sizes(static_cast<std::size_t>(k_), 0);
    for (int a : assignments_) ++sizes[static_cast<std::size_t>(a)];
    return sizes;
  }

  // Members of each cluster, ascending.
  std::vector<std::vector<std::size_t>> members() const {
    std::vector<std::vector<std::size_t>> out(static_cast<std::size_t>(k_));
    for (std::size_t i = 0; i < assignments_.size(); ++i) {
      out[static_cast<std::size_t>(assignments_[i])].push_back(i);
    }
    return out;
  }

  bool operator==(const ClusterLabels&) const = default;

 private:
  std::vector<int> assignments_;
  int k_ = 1;
};

/// Ordered set of raw rating values. Ratings are handled as indices into it.
class RatingAlphabet {
 public:
  RatingAlphabet() = default;
  explicit RatingAlphabet(std::vector<int> symbols) : symbols_(std::move(symbols)) {
    if (symbols_.size() < 2) throw Error("RatingAlphabet: need at least two symbols");
    if (symbols_.size() > std::numeric_limits<Symbol>::max()) throw Error("RatingAlphabet: too many symbols");
    auto sorted = symbols_;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
      throw Error("RatingAlphabet: duplicate symbol");
    }
  }

  std::size_t size() const noexcept { return symbols_.size(); }
  int value(std::size_t index) const { return symbols_.at(index); }
  std::span<const int> values() const noexcept { return symbols_; }

  Symbol index_of(int value) const {
    auto it = std::find(symbols_.begin(), symbols_.end(), value);
    if (it == symbols_.end()) throw Error("RatingAlphabet: value " + std::to_string(value) + " not in alphabet");
    return static_cast<Symbol>(it - symbols_.begin());
  }

  bool operator==(const RatingAlphabet&) const = default;

 private:
  std::vector<int> symbols_;
};

struct Rating {
  std::uint32_t user = 0;
  std::uint32_t item = 0;
  Symbol symbol = 0;

  bool operator==(const Rating&) const = default;
};

/// Sparse set of observed ratings; an absent (user, item) pair is an erasure.
/// Triplets are kept sorted by (user, item) with an item-major index beside them.
class RatingObservation {
 public:
  RatingObservation() = default;
  RatingObservation(std::size_t n_users, std::size_t n_items, std::vector<Rating> triplets,
                    std::size_t alphabet_size = std::numeric_limits<Symbol>::max() + std::size_t{1})
      : n_users_(n_users), n_items_(n_items), triplets_(std::move(triplets)) {
    for (const auto& t : triplets_) {
      if (t.user >= n_users_ || t.item >= n_items_) {
        throw Error("RatingObservation: index (" + std::to_string(t.user) + ", " + std::to_string(t.item) +
                    ") out of range");
      }
      if (t.symbol >= alphabet_size) throw Error("RatingObservation: symbol index out of range");
    }
    std::sort(triplets_.begin(), triplets_.end(), [](const Rating& a, const Rating& b) {
      return a.user != b.user ? a.user < b.user : a.item < b.item;
    });
    for (std::size_t t = 1; t < triplets_.size(); ++t) {
      if (triplets_[t].user == triplets_[t - 1].user && triplets_[t].item == triplets_[t - 1].item) {
        throw Error("RatingObservation: duplicate rating for (" + std::to_string(triplets_[t].user) + ", " +
                    std::to_string(triplets_[t].item) + ")");
      }
    }
    build_index();
  }

  std::size_t n_users() const noexcept { return n_users_; }
  std::size_t n_items() const noexcept { return n_items_; }
  std::size_t size() const noexcept { return triplets_.size(); }
  std::span<const Rating> triplets() const noexcept { return triplets_; }

  // Ratings made by one user, ordered by item.
  std::span<const Rating> user_ratings(std::size_t user) const {
    return std::span<const Rating>(triplets_).subspan(user_offsets_[user], user_offsets_[user + 1] - user_offsets_[user]);
  }

  // Ratings received by one item, ordered by user.
  std::span<const Rating> item_ratings(std::size_t item) const {
    return std::span<const Rating>(by_item_).subspan(item_offsets_[item], item_offsets_[item + 1] - item_offsets_[item]);
  }

  // Same ratings with the roles of users and items exchanged.
  RatingObservation transposed() const {
    std::vector<Rating> t;
    t.reserve(triplets_.size());
    for (const auto& r : triplets_) t.push_back({r.item, r.user, r.symbol});
    return RatingObservation(n_items_, n_users_, std::move(t));
  }

  bool operator==(const RatingObservation& o) const {
    return n_users_ == o.n_users_ && n_items_ == o.n_items_ && triplets_ == o.triplets_;
  }

 private:
  void build_index() {
    user_offsets_.assign(n_users_ + 1, 0);
    item_offsets_.assign(n_items_ + 1, 0);
    for (const auto& t : triplets_) {
      ++user_offsets_[t.user + 1];
      ++item_offsets_[t.item + 1];
    }
    std::partial_sum(user_offsets_.begin(), user_offsets_.end(), user_offsets_.begin());
    std::partial_sum(item_offsets_.begin(), item_offsets_.end(), item_offsets_.begin());
    by_item_.resize(triplets_.size());
    std::vector<std::size_t> cursor(item_offsets_.begin(), item_offsets_.end() - 1);
    for (const auto& t : triplets_) by_item_[cursor[t.item]++] = t;
  }

  std::size_t n_users_ = 0;
  std::size_t n_items_ = 0;
  std::vector<Rating> triplets_;
  std::vector<Rating> by_item_;
  std::vector<std::size_t> user_offsets_{0};
  std::vector<std::size_t> item_offsets_{0};
};

using Edge = std::pair<std::uint32_t, std::uint32_t>;

/// Undirected simple graph. Edges are stored once as (u, v) with u < v,
/// sorted, plus a CSR neighbor index.
class SimpleGraph {
 public:
  SimpleGraph() : offsets_{0} {}

  // Duplicate edges (in either orientation) are merged; self-loops are rejected.
  SimpleGraph(std::size_t n_nodes, std::vector<Edge> edges) : n_nodes_(n_nodes), edges_(std::move(edges)) {
    for (auto& [u, v] : edges_) {
      if (u >= n_nodes_ || v >= n_nodes_) {
        throw Error("SimpleGraph: edge (" + std::to_string(u) + ", " + std::to_string(v) + ") out of range");
      }
      if (u == v) throw Error("SimpleGraph: self-loop at node " + std::to_string(u));
      if (u > v) std::swap(u, v);
    }
    std::sort(edges_.begin(), edges_.end());
    edges_.erase(std::unique(edges_.begin(), edges_.end()), edges_.end());
    build_index();
  }

  static SimpleGraph empty(std::size_t n_nodes) { return SimpleGraph(n_nodes, {}); }

  std::size_t num_nodes() const noexcept { return n_nodes_; }
  std::size_t num_edges() const noexcept { return edges_.size(); }
  std::span<const Edge> edges() const noexcept { return edges_; }

  std::span<const std::uint32_t> neighbors(std::size_t node) const {
    return std::span<const std::uint32_t>(adjacency_).subspan(offsets_[node], offsets_[node + 1] - offsets_[node]);
  }
  std::size_t degree(std::size_t node) const { return offsets_[node + 1] - offsets_[node]; }

  bool has_edge(std::size_t u, std::size_t v) const {
    if (u >= n_nodes_ || v >= n_nodes_) return false;
    auto nb = neighbors(u);
    return std::binary_search(nb.begin(), nb.end(), static_cast<std::uint32_t>(v));
  }

  bool operator==(const SimpleGraph& o) const { return n_nodes_ == o.n_nodes_ && edges_ == o.edges_; }

 private:
  void build_index() {
    offsets_.assign(n_nodes_ + 1, 0);
    for (const auto& [u, v] : edges_) {
      ++offsets_[u + 1];
      ++offsets_[v + 1];
    }
    std::partial_sum(offsets_.begin(), offsets_.end(), offsets_.begin());
    adjacency_.resize(2 * edges_.size());
    std::vector<std::size_t> cursor(offsets_.begin(), offsets_.end() - 1);
    for (const auto& [u, v] : edges_) {
      adjacency_[cursor[u]++] = v;
      adjacency_[cursor[v]++] = u;
    }
    // Edges are sorted, so each neighbor run is already ascending for the
    // larger endpoint; sort to cover the smaller one.
    for (std::size_t i = 0; i < n_nodes_; ++i) {
      std::sort(adjacency_.begin() + static_cast<std::ptrdiff_t>(offsets_[i]),
                adjacency_.begin() + static_cast<std::ptrdiff_t>(offsets_[i + 1]));
    }
  }

  std::size_t n_nodes_ = 0;
  std::vector<Edge> edges_;
  std::vector<std::size_t> offsets_;
  std::vector<std::uint32_t> adjacency_;
};

/// Dense n x m table of symbol indices, row-major.
struct RatingTable {
  std::size_t n_users = 0;
  std::size_t n_items = 0;
  std::vector<Symbol> symbols;

  Symbol at(std::size_t i, std::size_t j) const { return symbols[i * n_items + j]; }
  bool operator==(const RatingTable&) const = default;
};

/// Block-constant rating matrix: a k1 x k2 table of symbol indices plus the
/// labels that expand it to n x m.
class NominalMatrix {
 public:
  NominalMatrix() = default;
  NominalMatrix(std::vector<Symbol> blocks, ClusterLabels user_labels, ClusterLabels item_labels,
                std::size_t alphabet_size)
      : blocks_(std::move(blocks)), users_(std::move(user_labels)), items_(std::move(item_labels)) {
    if (blocks_.size() != static_cast<std::size_t>(users_.k()) * static_cast<std::size_t>(items_.k())) {
      throw Error("NominalMatrix: block table is not k1 x k2");
    }
    for (Symbol s : blocks_) {
      if (s >= alphabet_size) throw Error("NominalMatrix: block symbol out of alphabet");
    }
  }

  int k1() const noexcept { return users_.k(); }
  int k2() const noexcept { return items_.k(); }
  std::size_t n_users() const noexcept { return users_.size(); }
  std::size_t n_items() const noexcept { return items_.size(); }
  const ClusterLabels& user_labels() const noexcept { return users_; }
  const ClusterLabels& item_labels() const noexcept { return items_; }
  std::span<const Symbol> blocks() const noexcept { return blocks_; }

  Symbol block(int a, int b) const {
    return blocks_[static_cast<std::size_t>(a) * static_cast<std::size_t>(items_.k()) + static_cast<std::size_t>(b)];
  }
  Symbol at(std::size_t i, std::size_t j) const { return block(users_[i], items_[j]); }

 private:
  std::vector<Symbol> blocks_;
  ClusterLabels users_;
  ClusterLabels items_;
};

inline RatingTable expand_nominal(const NominalMatrix& nm) {
  RatingTable out{nm.n_users(), nm.n_items(), std::vector<Symbol>(nm.n_users() * nm.n_items())};
  for (std::size_t i = 0; i < nm.n_users(); ++i) {
    for (std::size_t j = 0; j < nm.n_items(); ++j) out.symbols[i * nm.n_items() + j] = nm.at(i, j);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Permutation-aware comparison of clusterings.

struct LabelMatch {
  double proportion = 0.0;
  // permutation[t] = estimated cluster matched to true cluster t.
  std::vector<int> permutation;
};

inline constexpr int kExhaustiveMatchLimit = 8;

namespace detail {

inline void check_comparable(const ClusterLabels& est, const ClusterLabels& truth) {
  if (est.k() != truth.k()) throw Error("label comparison: cluster counts differ");
  if (est.size() != truth.size()) throw Error("label comparison: entity counts differ");
}

// confusion[e * k + t] = #{i : est(i) = e, truth(i) = t}
inline std::vector<std::int64_t> confusion(const ClusterLabels& est, const ClusterLabels& truth) {
  const auto k = static_cast<std::size_t>(est.k());
  std::vector<std::int64_t> c(k * k, 0);
  for (std::size_t i = 0; i < est.size(); ++i) {
    ++c[static_cast<std::size_t>(est[i]) * k + static_cast<std::size_t>(truth[i])];
  }
  return c;
}

inline LabelMatch to_match(std::int64_t agree, std::size_t n, std::vector<int> perm) {
  const double prop = n == 0 ? 0.0 : static_cast<double>(static_cast<std::int64_t>(n) - agree) / static_cast<double>(n);
  return {prop, std::move(perm)};
}

}  // namespace detail

/// Hungarian-algorithm label alignment: maximizes agreement over the k x k
/// confusion matrix in O(k^3).
inline LabelMatch match_labels_hungarian(const ClusterLabels& est, const ClusterLabels& truth) {
  detail::check_comparable(est, truth);
  const auto k = static_cast<std::size_t>(est.k());
  const auto conf = detail::confusion(est, truth);
  // Rows are true clusters, columns estimated clusters; minimize -agreement.
  // 1-based potentials formulation, column 0 is a sentinel.
  constexpr std::int64_t kInf = std::numeric_limits<std::int64_t>::max() / 4;
  auto cost = [&](std::size_t t, std::size_t e) { return -conf[(e - 1) * k + (t - 1)]; };
  std::vector<std::int64_t> u(k + 1, 0), v(k + 1, 0);
  std::vector<std::size_t> p(k + 1, 0), way(k + 1, 0);
  for (std::size_t row = 1; row <= k; ++row) {
    p[0] = row;
    std::size_t col0 = 0;
    std::vector<std::int64_t> minv(k + 1, kInf);
    std::vector<char> used(k + 1, 0);
    do {
      used[col0] = 1;
      const std::size_t row0 = p[col0];
      std::int64_t delta = kInf;
      std::size_t col1 = 0;
      for (std::size_t col = 1; col <= k; ++col) {
        if (used[col]) continue;
        const std::int64_t cur = cost(row0, col) - u[row0] - v[col];
        if (cur < minv[col]) {
          minv[col] = cur;
          way[col] = col0;
        }
        if (minv[col] < delta) {
          delta = minv[col];
          col1 = col;
        }
      }
      for (std::size_t col = 0; col <= k; ++col) {
        if (used[col]) {
          u[p[col]] += delta;
          v[col] -= delta;
        } else {
          minv[col] -= delta;
        }
      }
      col0 = col1;
    } while (p[col0] != 0);
    do {
      const std::size_t col1 = way[col0];
      p[col0] = p[col1];
      col0 = col1;
    } while (col0 != 0);
  }
  std::vector<int> perm(k, 0);
  std::int64_t agree = 0;
  for (std::size_t col = 1; col <= k; ++col) {
    const std::size_t t = p[col] - 1;
    perm[t] = static_cast<int>(col - 1);
    agree += conf[(col - 1) * k + t];
  }
  return detail::to_match(agree, est.size(), std::move(perm));
}

/// Fraction of misclassified entities, minimized over relabelings of the
/// clusters. Exhaustive for k <= kExhaustiveMatchLimit, Hungarian above.
inline LabelMatch misclassification_proportion(const ClusterLabels& est, const ClusterLabels& truth) {
  detail::check_comparable(est, truth);
  if (est.k() > kExhaustiveMatchLimit) return match_labels_hungarian(est, truth);
  const auto k = static_cast<std::size_t>(est.k());
  const auto conf = detail::confusion(est, truth);
  std::vector<int> perm(k);
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<int> best = perm;
  std::int64_t best_agree = -1;
  do {
    std::int64_t agree = 0;
    for (std::size_t t = 0; t < k; ++t) agree += conf[static_cast<std::size_t>(perm[t]) * k + t];
    if (agree > best_agree) {
      best_agree = agree;
      best = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return detail::to_match(best_agree, est.size(), std::move(best));
}

}  // namespace mc2g
