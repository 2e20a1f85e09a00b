#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "mc2g/core.hpp"
#include "mc2g/rng.hpp"

namespace mc2g {

/// Symmetric k x k table of SBM edge probabilities.
class ConnectivityMatrix {
 public:
  ConnectivityMatrix() = default;
  explicit ConnectivityMatrix(Eigen::MatrixXd probs) : probs_(std::move(probs)) {
    if (probs_.rows() != probs_.cols() || probs_.rows() == 0) throw Error("ConnectivityMatrix: must be square and nonempty");
    for (Eigen::Index a = 0; a < probs_.rows(); ++a) {
      for (Eigen::Index b = 0; b < probs_.cols(); ++b) {
        const double x = probs_(a, b);
        if (!(x >= 0.0 && x <= 1.0)) throw Error("ConnectivityMatrix: entry outside [0, 1]");
        if (x != probs_(b, a)) throw Error("ConnectivityMatrix: not symmetric");
      }
    }
  }

  // Two-valued matrix: `intra` on the diagonal, `inter` elsewhere.
  static ConnectivityMatrix two_valued(int k, double intra, double inter) {
    Eigen::MatrixXd m = Eigen::MatrixXd::Constant(k, k, inter);
    m.diagonal().setConstant(intra);
    return ConnectivityMatrix(std::move(m));
  }

  int k() const noexcept { return static_cast<int>(probs_.rows()); }
  double operator()(int a, int b) const { return probs_(a, b); }
  const Eigen::MatrixXd& matrix() const noexcept { return probs_; }

 private:
  Eigen::MatrixXd probs_;
};

/// Row-stochastic |Z| x |Z| table; row z is the law of the personalized
/// rating given nominal rating z.
class PersonalizationModel {
 public:
  PersonalizationModel() = default;
  explicit PersonalizationModel(Eigen::MatrixXd conditional) : q_(std::move(conditional)) {
    if (q_.rows() != q_.cols() || q_.rows() < 2) throw Error("PersonalizationModel: must be square with |Z| >= 2");
    for (Eigen::Index z = 0; z < q_.rows(); ++z) {
      if ((q_.row(z).array() < 0.0).any()) throw Error("PersonalizationModel: negative probability");
      if (std::abs(q_.row(z).sum() - 1.0) > 1e-12) {
        throw Error("PersonalizationModel: row " + std::to_string(z) + " does not sum to 1");
      }
      for (Eigen::Index v = 0; v < q_.cols(); ++v) {
        if (v != z && !(q_(z, z) > q_(z, v))) {
          throw Error("PersonalizationModel: row " + std::to_string(z) + " is not diagonally dominant");
        }
      }
    }
  }

  // Q(z|z) = keep, remaining mass spread evenly over the other symbols.
  static PersonalizationModel symmetric(std::size_t alphabet_size, double keep) {
    const auto s = static_cast<Eigen::Index>(alphabet_size);
    const double off = (1.0 - keep) / static_cast<double>(alphabet_size - 1);
    Eigen::MatrixXd q = Eigen::MatrixXd::Constant(s, s, off);
    q.diagonal().setConstant(keep);
    return PersonalizationModel(std::move(q));
  }

  std::size_t alphabet_size() const noexcept { return static_cast<std::size_t>(q_.rows()); }
  double operator()(Symbol nominal, Symbol observed) const { return q_(nominal, observed); }
  const Eigen::MatrixXd& matrix() const noexcept { return q_; }

  std::vector<double> row(Symbol nominal) const {
    std::vector<double> r(alphabet_size());
    for (std::size_t v = 0; v < r.size(); ++v) r[v] = q_(nominal, static_cast<Eigen::Index>(v));
    return r;
  }

 private:
  Eigen::MatrixXd q_;
};

/// Contiguous equal-size clusters; sizes differ by at most one, the first
/// n mod k clusters taking the extra node.
inline ClusterLabels block_labels(std::size_t n, int k) {
  if (k < 1) throw Error("block_labels: k must be positive");
  std::vector<int> a(n);
  const std::size_t base = n / static_cast<std::size_t>(k);
  const std::size_t extra = n % static_cast<std::size_t>(k);
  std::size_t node = 0;
  for (int c = 0; c < k; ++c) {
    const std::size_t size = base + (static_cast<std::size_t>(c) < extra ? 1 : 0);
    for (std::size_t t = 0; t < size; ++t) a[node++] = c;
  }
  return ClusterLabels(std::move(a), k);
}

/// Samples an SBM graph: each unordered pair {i, i'} is an edge
/// independently with probability conn(labels[i], labels[i']).
/// Pairs are visited block by block with geometric skipping.
inline SimpleGraph sample_sbm(const ClusterLabels& labels, const ConnectivityMatrix& conn, std::uint64_t seed) {
  if (conn.k() != labels.k()) throw Error("sample_sbm: connectivity dimension does not match label count");
  Rng rng(seed);
  const auto members = labels.members();
  std::vector<Edge> edges;
  for (int a = 0; a < labels.k(); ++a) {
    for (int b = a; b < labels.k(); ++b) {
      const double q = conn(a, b);
      if (q <= 0.0) continue;
      const auto& rows = members[static_cast<std::size_t>(a)];
      const auto& cols = members[static_cast<std::size_t>(b)];
      // Row r pairs with cols[first(r)..).
      auto first = [&](std::size_t r) { return a == b ? r + 1 : std::size_t{0}; };
      std::size_t r = 0;
      std::size_t c = rows.empty() ? 0 : first(0);
      while (r < rows.size()) {
        std::uint64_t skip = rng.geometric(q);
        while (r < rows.size()) {
          const std::size_t remaining = cols.size() > c ? cols.size() - c : 0;
          if (skip < remaining) break;
          skip -= remaining;
          ++r;
          if (r < rows.size()) c = first(r);
        }
        if (r >= rows.size()) break;
        c += static_cast<std::size_t>(skip);
        edges.emplace_back(static_cast<std::uint32_t>(rows[r]), static_cast<std::uint32_t>(cols[c]));
        ++c;
      }
    }
  }
  return SimpleGraph(labels.size(), std::move(edges));
}

/// Two-valued connectivity with inter-cluster probability
/// beta = beta_coeff * ln(n) / n and intra probability alpha chosen so that
/// n (sqrt(alpha) - sqrt(beta))^2 / ln(n) equals `quality`.
inline ConnectivityMatrix symmetric_conn_from_quality(std::size_t n, int k, double quality, double beta_coeff) {
  if (n < 2) throw Error("symmetric_conn_from_quality: need n >= 2");
  if (quality < 0.0) throw Error("symmetric_conn_from_quality: quality must be nonnegative");
  if (!(beta_coeff > 0.0)) throw Error("symmetric_conn_from_quality: beta_coeff must be positive");
  const double nd = static_cast<double>(n);
  const double scale = std::log(nd) / nd;
  const double beta = beta_coeff * scale;
  const double root = std::sqrt(quality * scale) + std::sqrt(beta);
  const double alpha = quality == 0.0 ? beta : root * root;
  if (alpha > 1.0 || beta > 1.0) {
    throw Error("symmetric_conn_from_quality: implied intra-cluster probability " + std::to_string(alpha) + " exceeds 1");
  }
  return ConnectivityMatrix::two_valued(k, alpha, beta);
}

/// Draws every personalized rating V_ij from the row of `pm` selected by the
/// nominal symbol N_ij, in row-major order.
inline RatingTable sample_personalized_ratings(const NominalMatrix& nm, const PersonalizationModel& pm, std::uint64_t seed) {
  const std::size_t s = pm.alphabet_size();
  for (Symbol z : nm.blocks()) {
    if (z >= s) throw Error("sample_personalized_ratings: nominal symbol outside personalization alphabet");
  }
  // Cumulative rows.
  std::vector<double> cdf(s * s);
  for (std::size_t z = 0; z < s; ++z) {
    double acc = 0.0;
    for (std::size_t v = 0; v < s; ++v) {
      acc += pm(static_cast<Symbol>(z), static_cast<Symbol>(v));
      cdf[z * s + v] = acc;
    }
  }
  Rng rng(seed);
  RatingTable out{nm.n_users(), nm.n_items(), std::vector<Symbol>(nm.n_users() * nm.n_items())};
  for (std::size_t i = 0; i < nm.n_users(); ++i) {
    for (std::size_t j = 0; j < nm.n_items(); ++j) {
      const std::size_t z = nm.at(i, j);
      const double u = rng.uniform() * cdf[z * s + s - 1];
      std::size_t v = 0;
      while (v + 1 < s && u >= cdf[z * s + v]) ++v;
      out.symbols[i * nm.n_items() + j] = static_cast<Symbol>(v);
    }
  }
  return out;
}

/// Keeps each entry independently with probability p.
inline RatingObservation subsample(const RatingTable& ratings, double p, std::uint64_t seed) {
  if (!(p >= 0.0 && p <= 1.0)) throw Error("subsample: p must lie in [0, 1]");
  Rng rng(seed);
  const std::uint64_t total = ratings.n_users * ratings.n_items;
  std::vector<Rating> kept;
  kept.reserve(static_cast<std::size_t>(static_cast<double>(total) * p * 1.1) + 16);
  std::uint64_t pos = 0;
  while (pos < total) {
    const std::uint64_t skip = rng.geometric(p);
    if (skip >= total - pos) break;
    pos += skip;
    kept.push_back({static_cast<std::uint32_t>(pos / ratings.n_items), static_cast<std::uint32_t>(pos % ratings.n_items),
                    ratings.symbols[pos]});
    ++pos;
  }
  return RatingObservation(ratings.n_users, ratings.n_items, std::move(kept));
}

/// Every parameter of the generative model except the sample probability.
struct ModelSpec {
  std::size_t n_users = 0;
  std::size_t n_items = 0;
  int k1 = 2;
  int k2 = 2;
  RatingAlphabet alphabet;
  std::vector<Symbol> nominal_blocks;  // k1 x k2, row-major symbol indices
  PersonalizationModel personalization;
  ConnectivityMatrix user_conn;
  ConnectivityMatrix item_conn;
};

struct GeneratedInstance {
  ModelSpec spec;
  double p = 0.0;
  std::uint64_t seed = 0;
  ClusterLabels user_labels;
  ClusterLabels item_labels;
  NominalMatrix nominal;
  RatingObservation observation;
  SimpleGraph user_graph;
  SimpleGraph item_graph;
};

inline GeneratedInstance generate_instance(const ModelSpec& spec, double p, std::uint64_t seed) {
  if (spec.personalization.alphabet_size() != spec.alphabet.size()) {
    throw Error("generate_instance: personalization table does not match alphabet size");
  }
  GeneratedInstance inst;
  inst.spec = spec;
  inst.p = p;
  inst.seed = seed;
  inst.user_labels = block_labels(spec.n_users, spec.k1);
  inst.item_labels = block_labels(spec.n_items, spec.k2);
  inst.nominal = NominalMatrix(spec.nominal_blocks, inst.user_labels, inst.item_labels, spec.alphabet.size());
  inst.user_graph = sample_sbm(inst.user_labels, spec.user_conn, derive_seed(seed, stream::kUserGraph));
  inst.item_graph = sample_sbm(inst.item_labels, spec.item_conn, derive_seed(seed, stream::kItemGraph));
  const RatingTable full = sample_personalized_ratings(inst.nominal, spec.personalization, derive_seed(seed, stream::kRatings));
  inst.observation = subsample(full, p, derive_seed(seed, stream::kSubsample));
  return inst;
}

}  // namespace mc2g
