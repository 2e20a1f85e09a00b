#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <utility>

#include "json.hpp"
#include "mc2g/core.hpp"
#include "mc2g/genmodel.hpp"

namespace mc2g {

/// Squared Hellinger distance 1 - sum_z sqrt(P(z) Q(z)).
inline double hellinger_sq(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw Error("hellinger_sq: distributions have different lengths");
  double bc = 0.0;
  for (std::size_t z = 0; z < p.size(); ++z) bc += std::sqrt(p[z] * q[z]);
  return std::clamp(1.0 - bc, 0.0, 1.0);
}

struct Discrepancies {
  double d_users = 0.0;
  double d_items = 0.0;
  std::pair<int, int> closest_users{0, 1};
  std::pair<int, int> closest_items{0, 1};
};

/// Minimal pairwise cluster discrepancies: for users,
/// min over a != a' of sum_b H^2(Q_ab, Q_a'b), where Q_ab is the
/// personalization row of nominal symbol z_ab. Items are symmetric.
inline Discrepancies cluster_discrepancies(std::span<const Symbol> blocks, int k1, int k2, const PersonalizationModel& pm) {
  if (k1 < 2 || k2 < 2) throw Error("cluster_discrepancies: need k1, k2 >= 2");
  if (blocks.size() != static_cast<std::size_t>(k1 * k2)) throw Error("cluster_discrepancies: block table is not k1 x k2");
  auto h2 = [&](Symbol x, Symbol y) {
    if (x == y) return 0.0;
    const auto rx = pm.row(x);
    const auto ry = pm.row(y);
    return hellinger_sq(rx, ry);
  };
  auto z = [&](int a, int b) { return blocks[static_cast<std::size_t>(a * k2 + b)]; };
  Discrepancies d;
  d.d_users = std::numeric_limits<double>::infinity();
  for (int a = 0; a < k1; ++a) {
    for (int a2 = a + 1; a2 < k1; ++a2) {
      double s = 0.0;
      for (int b = 0; b < k2; ++b) s += h2(z(a, b), z(a2, b));
      if (s < d.d_users) {
        d.d_users = s;
        d.closest_users = {a, a2};
      }
    }
  }
  d.d_items = std::numeric_limits<double>::infinity();
  for (int b = 0; b < k2; ++b) {
    for (int b2 = b + 1; b2 < k2; ++b2) {
      double s = 0.0;
      for (int a = 0; a < k1; ++a) s += h2(z(a, b), z(a, b2));
      if (s < d.d_items) {
        d.d_items = s;
        d.closest_items = {b, b2};
      }
    }
  }
  return d;
}

inline Discrepancies cluster_discrepancies(const NominalMatrix& nm, const PersonalizationModel& pm) {
  return cluster_discrepancies(nm.blocks(), nm.k1(), nm.k2(), pm);
}

/// n (sqrt(alpha) - sqrt(beta))^2 / ln n.
inline double compute_graph_quality(std::size_t n, double alpha, double beta) {
  if (n < 2) throw Error("compute_graph_quality: need n >= 2");
  if (!(beta >= 0.0 && alpha <= 1.0)) throw Error("compute_graph_quality: probabilities outside [0, 1]");
  if (alpha < beta) throw Error("compute_graph_quality: alpha < beta violates homophily");
  const double nd = static_cast<double>(n);
  const double diff = std::sqrt(alpha) - std::sqrt(beta);
  return nd * diff * diff / std::log(nd);
}

struct ThresholdInputs {
  std::size_t n = 0;  // users
  std::size_t m = 0;  // items
  int k1 = 2;
  int k2 = 2;
  double quality_users = 0.0;
  double quality_items = 0.0;
  double d_users = 0.0;
  double d_items = 0.0;
  double eps = 0.0;
};

/// Both arms of a sample-complexity bound, before and after flooring at 0.
struct ThresholdArms {
  double user_arm = 0.0;
  double item_arm = 0.0;
  double user_arm_raw = 0.0;
  double item_arm_raw = 0.0;
  double value() const { return std::max(user_arm, item_arm); }
};

namespace detail {

inline ThresholdArms threshold_arms(const ThresholdInputs& in, double lead) {
  if (!(in.d_users > 0.0)) throw Error("threshold: user-cluster discrepancy d_U is zero; two user clusters are indistinguishable");
  if (!(in.d_items > 0.0)) throw Error("threshold: item-cluster discrepancy d_I is zero; two item clusters are indistinguishable");
  if (in.n < 2 || in.m < 2) throw Error("threshold: need n, m >= 2");
  const double n = static_cast<double>(in.n);
  const double m = static_cast<double>(in.m);
  ThresholdArms arms;
  const double bu = lead - in.quality_users / in.k1;
  const double bi = lead - in.quality_items / in.k2;
  arms.user_arm_raw = bu * n * std::log(n) / (in.d_users / in.k2);
  arms.item_arm_raw = bi * m * std::log(m) / (in.d_items / in.k1);
  // A non-positive bracket means the graph alone resolves that side.
  arms.user_arm = std::max(bu, 0.0) * n * std::log(n) / (in.d_users / in.k2);
  arms.item_arm = std::max(bi, 0.0) * m * std::log(m) / (in.d_items / in.k1);
  return arms;
}

}  // namespace detail

/// Expected sample count above which the algorithm recovers everything exactly.
inline ThresholdArms achievability_threshold(const ThresholdInputs& in) { return detail::threshold_arms(in, 1.0 + in.eps); }

/// Expected sample count below which every estimator fails.
inline ThresholdArms converse_threshold(const ThresholdInputs& in) { return detail::threshold_arms(in, (1.0 - in.eps) / 2.0); }

/// mnp divided by the eps = 0 achievability threshold.
inline double normalized_complexity(double expected_samples, double threshold) {
  if (!(threshold > 0.0)) throw Error("normalized_complexity: threshold is zero (graphs alone suffice); ratio undefined");
  return expected_samples / threshold;
}

/// Sample probability giving a target normalized complexity.
inline double p_for_ratio(double ratio, double threshold, std::size_t n, std::size_t m) {
  if (!(threshold > 0.0)) throw Error("p_for_ratio: threshold is zero; ratio undefined");
  const double p = ratio * threshold / (static_cast<double>(n) * static_cast<double>(m));
  if (p > 1.0) throw Error("p_for_ratio: ratio " + std::to_string(ratio) + " needs p > 1");
  return p;
}

struct ThresholdReport {
  double quality_users = 0.0;
  double quality_items = 0.0;
  Discrepancies discrepancies;
  double eps = 0.0;
  ThresholdArms achievability;
  ThresholdArms converse;
  double threshold_eps0 = 0.0;  // normalizer for the complexity ratio
  double p = 0.0;
  double expected_samples = 0.0;
  double normalized_complexity = std::numeric_limits<double>::quiet_NaN();
};

/// Graph qualities are computed from the two-valued connectivity matrices
/// (diagonal entry as alpha, entry (0, 1) as beta).
inline ThresholdReport threshold_report(const ModelSpec& spec, double p, double eps = 0.0) {
  ThresholdReport r;
  r.quality_users = compute_graph_quality(spec.n_users, spec.user_conn(0, 0), spec.user_conn(0, 1));
  r.quality_items = compute_graph_quality(spec.n_items, spec.item_conn(0, 0), spec.item_conn(0, 1));
  r.discrepancies = cluster_discrepancies(spec.nominal_blocks, spec.k1, spec.k2, spec.personalization);
  auto name_pair = [](const char* side, std::pair<int, int> pr) {
    return std::string(side) + " clusters " + std::to_string(pr.first) + " and " + std::to_string(pr.second);
  };
  if (!(r.discrepancies.d_users > 0.0)) {
    throw Error("threshold_report: zero discrepancy between " + name_pair("user", r.discrepancies.closest_users));
  }
  if (!(r.discrepancies.d_items > 0.0)) {
    throw Error("threshold_report: zero discrepancy between " + name_pair("item", r.discrepancies.closest_items));
  }
  ThresholdInputs in{spec.n_users, spec.n_items, spec.k1, spec.k2, r.quality_users, r.quality_items,
                     r.discrepancies.d_users, r.discrepancies.d_items, eps};
  r.eps = eps;
  r.achievability = achievability_threshold(in);
  r.converse = converse_threshold(in);
  in.eps = 0.0;
  r.threshold_eps0 = achievability_threshold(in).value();
  r.p = p;
  r.expected_samples = p * static_cast<double>(spec.n_users) * static_cast<double>(spec.n_items);
  if (r.threshold_eps0 > 0.0) r.normalized_complexity = normalized_complexity(r.expected_samples, r.threshold_eps0);
  return r;
}

inline nlohmann::json to_json(const ThresholdArms& a) {
  return {{"value", a.value()}, {"user_arm", a.user_arm}, {"item_arm", a.item_arm},
          {"user_arm_unfloored", a.user_arm_raw}, {"item_arm_unfloored", a.item_arm_raw}};
}

inline nlohmann::json to_json(const ThresholdReport& r) {
  nlohmann::json j{{"I1", r.quality_users},
                   {"I2", r.quality_items},
                   {"d_U", r.discrepancies.d_users},
                   {"d_I", r.discrepancies.d_items},
                   {"closest_user_pair", {r.discrepancies.closest_users.first, r.discrepancies.closest_users.second}},
                   {"closest_item_pair", {r.discrepancies.closest_items.first, r.discrepancies.closest_items.second}},
                   {"eps", r.eps},
                   {"achievability", to_json(r.achievability)},
                   {"converse", to_json(r.converse)},
                   {"threshold_eps0", r.threshold_eps0},
                   {"p", r.p},
                   {"expected_samples", r.expected_samples}};
  j["normalized_complexity"] = std::isnan(r.normalized_complexity) ? nlohmann::json(nullptr) : nlohmann::json(r.normalized_complexity);
  return j;
}

}  // namespace mc2g
