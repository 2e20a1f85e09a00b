#include <gtest/gtest.h>

#include <numeric>
#include <random>

#include "mc2g/harness.hpp"
#include "mc2g/refinement.hpp"
#include "mc2g/theory.hpp"
#include "oracles.hpp"

using namespace mc2g;

namespace {

ModelEstimates flat_estimates(int k1, int k2, std::size_t s) {
  ModelEstimates est;
  est.b_user = ConnectivityMatrix::two_valued(k1, 0.5, 0.5);
  est.b_item = ConnectivityMatrix::two_valued(k2, 0.5, 0.5);
  est.q_hat = PersonalizationTable(k1, k2, s);
  for (int a = 0; a < k1; ++a) {
    for (int b = 0; b < k2; ++b) {
      for (auto& v : est.q_hat.at(a, b)) v = 1.0 / static_cast<double>(s);
    }
  }
  return est;
}

}  // namespace

TEST(RefineUser, TieGoesToLowestIndex) {
  const RatingObservation obs(3, 2, {}, 2);
  const auto est = flat_estimates(3, 2, 2);
  const auto [a, lb] = refine_user(1, obs, SimpleGraph(3, {{0, 1}}), ClusterLabels({0, 1, 2}, 3), ClusterLabels({0, 1}, 2), est);
  EXPECT_EQ(a, 0);
  EXPECT_EQ(lb.margin, 0.0);
}

TEST(RefineUser, RatingTermDecides) {
  const RatingObservation obs(2, 1, {{1, 0, 1}}, 2);
  auto est = flat_estimates(2, 1, 2);
  est.q_hat.at(0, 0)[1] = 0.6;
  est.q_hat.at(0, 0)[0] = 0.4;
  est.q_hat.at(1, 0)[1] = 0.1;
  est.q_hat.at(1, 0)[0] = 0.9;
  const auto [a, lb] = refine_user(1, obs, SimpleGraph(2, {{0, 1}}), ClusterLabels({1, 1}, 2), ClusterLabels({0}, 1), est);
  EXPECT_EQ(a, 0);
  EXPECT_NEAR(lb.score[0] - lb.score[1], std::log(6.0), 1e-12);
  EXPECT_EQ(lb.graph_term[0], 0.0);
}

TEST(RefineItem, MirrorExamples) {
  const RatingObservation obs(1, 2, {{0, 0, 1}}, 2);
  auto est = flat_estimates(1, 2, 2);
  EXPECT_EQ(refine_item(0, obs, SimpleGraph::empty(2), ClusterLabels({0}, 1), ClusterLabels({1, 1}, 2), est).first, 0);
  est.q_hat.at(0, 0)[1] = 0.1;
  est.q_hat.at(0, 0)[0] = 0.9;
  est.q_hat.at(0, 1)[1] = 0.6;
  est.q_hat.at(0, 1)[0] = 0.4;
  EXPECT_EQ(refine_item(0, obs, SimpleGraph::empty(2), ClusterLabels({0}, 1), ClusterLabels({0, 0}, 2), est).first, 1);
}

TEST(Refine, GraphTermUsesLogOdds) {
  const RatingObservation obs(4, 1, {}, 2);
  auto est = flat_estimates(2, 1, 2);
  Eigen::MatrixXd b(2, 2);
  b << 0.8, 0.1, 0.1, 0.3;
  est.b_user = ConnectivityMatrix(b);
  const SimpleGraph g(4, {{0, 1}, {0, 2}, {0, 3}});
  const auto [a, lb] = refine_user(0, obs, g, ClusterLabels({1, 0, 0, 1}, 2), ClusterLabels({0}, 1), est);
  auto lo = [](double p) { return std::log(p / (1 - p)); };
  EXPECT_NEAR(lb.graph_term[0], 2 * lo(0.8) + lo(0.1), 1e-12);
  EXPECT_NEAR(lb.graph_term[1], 2 * lo(0.1) + lo(0.3), 1e-12);
  EXPECT_EQ(a, 0);
}

TEST(Refine, MatchesStraightLineOracle) {
  std::mt19937_64 gen(41);
  std::size_t checked = 0;
  for (int c = 0; c < 1000; ++c) {
    const auto x = oracle::random_instance(gen);
    const auto obs = x.observation();
    const auto gu = x.graph(x.adj_users), gi = x.graph(x.adj_items);
    const ClusterLabels users(x.init_users, x.k1), items(x.init_items, x.k2);
    const auto est = x.estimates();
    const auto [ru, ri] = refine_all(obs, gu, gi, users, items, est);
    for (std::size_t i = 0; i < x.n; ++i) {
      const auto ref = oracle::user_scores(x, i);
      const auto lb = refine_user(i, obs, gu, users, items, est).second;
      for (int a = 0; a < x.k1; ++a) EXPECT_NEAR(lb.score[static_cast<std::size_t>(a)], ref[static_cast<std::size_t>(a)], 1e-9);
      if (oracle::top_gap(ref) > 1e-9) {
        EXPECT_EQ(ru[i], oracle::first_max(ref));
        ++checked;
      }
    }
    for (std::size_t j = 0; j < x.m; ++j) {
      const auto ref = oracle::item_scores(x, j);
      const auto lb = refine_item(j, obs, gi, users, items, est).second;
      for (int b = 0; b < x.k2; ++b) EXPECT_NEAR(lb.score[static_cast<std::size_t>(b)], ref[static_cast<std::size_t>(b)], 1e-9);
      if (oracle::top_gap(ref) > 1e-9) {
        EXPECT_EQ(ri[j], oracle::first_max(ref));
        ++checked;
      }
    }
  }
  EXPECT_GT(checked, 5000u);
}

TEST(Refine, TransposeDuality) {
  std::mt19937_64 gen(42);
  for (int c = 0; c < 200; ++c) {
    const auto x = oracle::random_instance(gen);
    const auto obs = x.observation();
    const auto gu = x.graph(x.adj_users), gi = x.graph(x.adj_items);
    const ClusterLabels users(x.init_users, x.k1), items(x.init_items, x.k2);
    const auto est = x.estimates();
    ModelEstimates tr;
    tr.b_user = est.b_item;
    tr.b_item = est.b_user;
    tr.q_hat = PersonalizationTable(x.k2, x.k1, x.s);
    for (int a = 0; a < x.k1; ++a) {
      for (int b = 0; b < x.k2; ++b) std::ranges::copy(est.q_hat.at(a, b), tr.q_hat.at(b, a).begin());
    }
    const auto obs_t = obs.transposed();
    for (std::size_t i = 0; i < x.n; ++i) {
      const auto u = refine_user(i, obs, gu, users, items, est);
      const auto t = refine_item(i, obs_t, gu, items, users, tr);
      EXPECT_EQ(u.first, t.first);
      EXPECT_EQ(u.second.score, t.second.score);
    }
  }
}

TEST(Refine, ConstantShiftInvariance) {
  std::mt19937_64 gen(43);
  for (int c = 0; c < 100; ++c) {
    auto x = oracle::random_instance(gen);
    // Uniform rating rows across a, so the rating term is the same constant for every candidate.
    for (int b = 0; b < x.k2; ++b) {
      for (int a = 1; a < x.k1; ++a) x.q[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] = x.q[0][static_cast<std::size_t>(b)];
    }
    const auto obs = x.observation();
    const auto gu = x.graph(x.adj_users), gi = x.graph(x.adj_items);
    const ClusterLabels users(x.init_users, x.k1), items(x.init_items, x.k2);
    const auto with = refine_all(obs, gu, gi, users, items, x.estimates()).first;
    const auto without = refine_all(RatingObservation(x.n, x.m, {}, x.s), gu, gi, users, items, x.estimates()).first;
    EXPECT_EQ(with, without);
  }
}

TEST(Refine, OrderIndependent) {
  std::mt19937_64 gen(44);
  for (int c = 0; c < 50; ++c) {
    const auto x = oracle::random_instance(gen);
    const auto obs = x.observation();
    const auto gu = x.graph(x.adj_users), gi = x.graph(x.adj_items);
    const ClusterLabels users(x.init_users, x.k1), items(x.init_items, x.k2);
    const auto est = x.estimates();
    const auto [ru, ri] = refine_all(obs, gu, gi, users, items, est);
    std::vector<std::size_t> order(x.n);
    std::iota(order.begin(), order.end(), 0u);
    std::shuffle(order.begin(), order.end(), gen);
    for (std::size_t i : order) EXPECT_EQ(refine_user(i, obs, gu, users, items, est).first, ru[i]);
  }
}

TEST(Refine, ErrorsOnMismatchedInputs) {
  const RatingObservation obs(3, 2, {}, 2);
  const auto est = flat_estimates(2, 2, 2);
  EXPECT_THROW(refine_all(obs, SimpleGraph::empty(4), SimpleGraph::empty(2), ClusterLabels({0, 1, 0}, 2), ClusterLabels({0, 1}, 2), est), Error);
  EXPECT_THROW(refine_all(obs, SimpleGraph::empty(3), SimpleGraph::empty(2), ClusterLabels({0, 1, 2}, 3), ClusterLabels({0, 1}, 2), est), Error);
}

TEST(Reconstruct, Argmax) {
  ModelEstimates est = flat_estimates(1, 2, 5);
  std::ranges::copy(std::vector<double>{0, 0, 1, 0, 0}, est.q_hat.at(0, 0).begin());
  std::ranges::copy(std::vector<double>{0.4, 0.4, 0.2, 0, 0}, est.q_hat.at(0, 1).begin());
  const auto nm = reconstruct_nominal_argmax(ClusterLabels({0}, 1), ClusterLabels({0, 1}, 2), est);
  EXPECT_EQ(nm.block(0, 0), 2);
  EXPECT_EQ(nm.block(0, 1), 0);
}

TEST(Reconstruct, Majority) {
  const RatingObservation obs(3, 2, {{0, 0, 1}, {1, 0, 1}, {0, 1, 0}, {1, 1, 1}, {2, 1, 1}}, 2);
  const ClusterLabels users({0, 0, 0}, 1), items({0, 1}, 2);
  std::vector<std::pair<int, int>> empty;
  auto nm = reconstruct_nominal_majority(users, items, obs, 2, &empty);
  EXPECT_EQ(nm.block(0, 0), 1);
  EXPECT_EQ(nm.block(0, 1), 1);
  EXPECT_TRUE(empty.empty());

  const RatingObservation tie(6, 1, {{0, 0, 0}, {1, 0, 0}, {2, 0, 0}, {3, 0, 1}, {4, 0, 1}, {5, 0, 1}}, 2);
  EXPECT_EQ(reconstruct_nominal_majority(ClusterLabels(std::vector<int>(6, 0), 1), ClusterLabels({0}, 1), tie, 2).block(0, 0), 0);

  nm = reconstruct_nominal_majority(ClusterLabels({0, 1}, 2), ClusterLabels({0}, 1), RatingObservation(2, 1, {{0, 0, 1}}, 2), 2, &empty);
  EXPECT_EQ(nm.block(1, 0), 0);
  EXPECT_EQ(empty, (std::vector<std::pair<int, int>>{{1, 0}}));
}

TEST(Reconstruct, MajorityEqualsUnsmoothedArgmax) {
  std::mt19937_64 gen(45);
  int compared = 0;
  for (int c = 0; c < 300; ++c) {
    const auto x = oracle::random_instance(gen, 12, 12);
    const auto obs = x.observation();
    const ClusterLabels users(x.init_users, x.k1), items(x.init_items, x.k2);
    const auto counts = block_symbol_counts(obs, users, items, x.s);
    bool tie_free = true;
    for (std::size_t blk = 0; blk < counts.size() / x.s; ++blk) {
      std::vector<std::uint64_t> cell(counts.begin() + static_cast<std::ptrdiff_t>(blk * x.s), counts.begin() + static_cast<std::ptrdiff_t>((blk + 1) * x.s));
      std::sort(cell.rbegin(), cell.rend());
      tie_free = tie_free && cell[0] > cell[1];
    }
    if (!tie_free) continue;
    ModelEstimates est;
    est.q_hat = estimate_personalization(obs, users, items, x.s, {true, 0.0});
    EXPECT_EQ(reconstruct_nominal_argmax(users, items, est).blocks().size(), static_cast<std::size_t>(x.k1 * x.k2));
    const auto a = reconstruct_nominal_argmax(users, items, est);
    const auto m = reconstruct_nominal_majority(users, items, obs, x.s);
    EXPECT_TRUE(std::ranges::equal(a.blocks(), m.blocks()));
    ++compared;
  }
  EXPECT_GT(compared, 10);
}

namespace {

std::vector<int> perturb(const ClusterLabels& truth, double frac, std::mt19937_64& gen) {
  std::vector<int> out(truth.assignments().begin(), truth.assignments().end());
  std::vector<std::size_t> idx(out.size());
  std::iota(idx.begin(), idx.end(), 0u);
  std::shuffle(idx.begin(), idx.end(), gen);
  const auto flips = static_cast<std::size_t>(frac * static_cast<double>(out.size()));
  for (std::size_t t = 0; t < flips; ++t) {
    auto& a = out[idx[t]];
    a = (a + 1 + static_cast<int>(gen() % static_cast<std::uint64_t>(truth.k() - 1))) % truth.k();
  }
  return out;
}

}  // namespace

TEST(RefineAll, ExactInitStaysExactInGenerousRegime) {
  ExperimentConfig cfg;
  cfg.user_graph.quality = 6.0;
  cfg.item_graph.quality = 8.0;
  const auto spec = model_spec(cfg);
  int kept = 0;
  for (int t = 0; t < 50; ++t) {
    const auto inst = generate_instance(spec, 0.3, derive_seed(4100, static_cast<std::uint64_t>(t)));
    const auto est = estimate_model(inst.observation, inst.user_graph, inst.item_graph, inst.user_labels, inst.item_labels, 5);
    const auto [u, i] = refine_all(inst.observation, inst.user_graph, inst.item_graph, inst.user_labels, inst.item_labels, est);
    kept += (u == inst.user_labels && i == inst.item_labels) ? 1 : 0;
  }
  EXPECT_GE(kept, 50);
}

TEST(RefineAll, RecoversFromTwoPercentNoise) {
  const ExperimentConfig cfg;
  const auto spec = model_spec(cfg);
  const auto report = threshold_report(spec, 0.0);
  const double p = p_for_ratio(1.5, report.threshold_eps0, spec.n_users, spec.n_items);
  std::mt19937_64 gen(46);
  int exact = 0;
  for (int t = 0; t < 50; ++t) {
    const auto inst = generate_instance(spec, p, derive_seed(4200, static_cast<std::uint64_t>(t)));
    const ClusterLabels init(perturb(inst.user_labels, 0.02, gen), spec.k1);
    const auto est = estimate_model(inst.observation, inst.user_graph, inst.item_graph, init, inst.item_labels, 5);
    const auto [u, i] = refine_all(inst.observation, inst.user_graph, inst.item_graph, init, inst.item_labels, est);
    exact += (misclassification_proportion(u, inst.user_labels).proportion == 0.0 &&
              misclassification_proportion(i, inst.item_labels).proportion == 0.0) ? 1 : 0;
  }
  EXPECT_GE(exact, 45);
}

TEST(Reconstruct, RecoversReferenceTable) {
  const ExperimentConfig cfg;
  const auto spec = model_spec(cfg);
  const auto inst = generate_instance(spec, 0.1, 4300);
  const auto est = estimate_model(inst.observation, inst.user_graph, inst.item_graph, inst.user_labels, inst.item_labels, 5);
  const auto nm = reconstruct_nominal_argmax(inst.user_labels, inst.item_labels, est);
  const std::vector<Symbol> expect{4, 0, 3, 1, 1, 3, 4, 0, 2, 1, 4, 4};
  EXPECT_TRUE(std::ranges::equal(nm.blocks(), expect));
}
