#include <gtest/gtest.h>

#include <random>

#include "mc2g/estimation.hpp"
#include "oracles.hpp"

using namespace mc2g;

TEST(Connectivity, TwoCliques) {
  std::vector<Edge> e;
  for (std::uint32_t c = 0; c < 2; ++c) {
    for (std::uint32_t i = 0; i < 10; ++i) {
      for (std::uint32_t j = i + 1; j < 10; ++j) e.emplace_back(c * 10 + i, c * 10 + j);
    }
  }
  const SimpleGraph g(20, e);
  const auto labels = block_labels(20, 2);
  const auto raw = estimate_connectivity(g, labels, {false, 1.0});
  EXPECT_EQ(raw.matrix(0, 0), 1.0);
  EXPECT_EQ(raw.matrix(1, 1), 1.0);
  EXPECT_EQ(raw.matrix(0, 1), 0.0);
  const auto clamped = estimate_connectivity(g, labels);
  EXPECT_DOUBLE_EQ(clamped.matrix(0, 0), 1.0 - 1.0 / 400.0);
  EXPECT_DOUBLE_EQ(clamped.matrix(0, 1), 1.0 / 400.0);
}

TEST(Connectivity, FourNodeHandCount) {
  const SimpleGraph g(4, {{0, 1}, {0, 2}});
  const auto est = estimate_connectivity(g, ClusterLabels({0, 0, 1, 1}, 2), {false, 1.0});
  EXPECT_DOUBLE_EQ(est.matrix(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(est.matrix(0, 1), 0.25);
  EXPECT_DOUBLE_EQ(est.matrix(1, 0), 0.25);
  EXPECT_DOUBLE_EQ(est.matrix(1, 1), 0.0);
  EXPECT_TRUE(est.degenerate.empty());
}

TEST(Connectivity, DegenerateClusterFlagged) {
  const SimpleGraph g(3, {{0, 1}, {1, 2}});
  const auto est = estimate_connectivity(g, ClusterLabels({0, 0, 1}, 2));
  EXPECT_EQ(est.degenerate, std::vector<int>{1});
  EXPECT_DOUBLE_EQ(est.matrix(1, 1), 1.0 / 9.0);
  EXPECT_THROW(estimate_connectivity(g, ClusterLabels({0, 1}, 2)), Error);
}

TEST(Personalization, SmoothedCounts) {
  std::vector<Rating> r;
  const std::vector<Symbol> sym{0, 0, 0, 0, 0, 0, 1, 2, 3, 4};
  for (std::uint32_t t = 0; t < sym.size(); ++t) r.push_back({0, t, sym[t]});
  const RatingObservation obs(2, 10, r, 5);
  const auto q = estimate_personalization(obs, ClusterLabels({0, 1}, 2), ClusterLabels(std::vector<int>(10, 0), 1), 5);
  EXPECT_DOUBLE_EQ(q.at(0, 0)[0], 7.0 / 15.0);
  for (std::size_t z = 1; z < 5; ++z) EXPECT_DOUBLE_EQ(q.at(0, 0)[z], 2.0 / 15.0);
  for (std::size_t z = 0; z < 5; ++z) EXPECT_DOUBLE_EQ(q.at(1, 0)[z], 0.2);
}

TEST(Personalization, UnsmoothedEmptyBlockIsUniform) {
  const RatingObservation obs(2, 2, {{0, 0, 1}}, 3);
  const auto q = estimate_personalization(obs, ClusterLabels({0, 1}, 2), ClusterLabels({0, 1}, 2), 3, {true, 0.0});
  EXPECT_EQ(q.at(0, 0)[1], 1.0);
  EXPECT_EQ(q.at(0, 0)[0], 0.0);
  for (std::size_t z = 0; z < 3; ++z) EXPECT_DOUBLE_EQ(q.at(1, 1)[z], 1.0 / 3.0);
  EXPECT_THROW(estimate_personalization(obs, ClusterLabels({0, 1}, 2), ClusterLabels({0, 1}, 2), 3, {true, -1.0}), Error);
}

TEST(Estimation, BruteForceCounts) {
  std::mt19937_64 gen(31);
  for (int c = 0; c < 300; ++c) {
    const auto x = oracle::random_instance(gen, 12, 12);
    const mc2g::ClusterLabels users(x.init_users, x.k1), items(x.init_items, x.k2);
    const auto est = estimate_model(x.observation(), x.graph(x.adj_users), x.graph(x.adj_items), users, items, x.s, {false, 0.0});
    for (int a = 0; a < x.k1; ++a) {
      for (int b = 0; b < x.k1; ++b) {
        double edges = 0.0, pairs = 0.0;
        for (std::size_t i = 0; i < x.n; ++i) {
          for (std::size_t j = 0; j < x.n; ++j) {
            if (i == j || x.init_users[i] != a || x.init_users[j] != b) continue;
            pairs += 1.0;
            edges += x.adj_users[i][j];
          }
        }
        const double expect = pairs > 0.0 ? edges / pairs : 0.0;
        EXPECT_NEAR(est.b_user(a, b), expect, 1e-12);
      }
    }
    for (int a = 0; a < x.k1; ++a) {
      for (int b = 0; b < x.k2; ++b) {
        std::vector<double> cnt(x.s, 0.0);
        double total = 0.0;
        for (std::size_t i = 0; i < x.n; ++i) {
          for (std::size_t j = 0; j < x.m; ++j) {
            if (x.u[i][j] < 0 || x.init_users[i] != a || x.init_items[j] != b) continue;
            cnt[static_cast<std::size_t>(x.u[i][j])] += 1.0;
            total += 1.0;
          }
        }
        for (std::size_t z = 0; z < x.s; ++z) {
          const double expect = total > 0.0 ? cnt[z] / total : 1.0 / static_cast<double>(x.s);
          EXPECT_NEAR(est.q_hat.at(a, b)[z], expect, 1e-12);
        }
      }
    }
  }
}

TEST(Estimation, DistributionsPositiveAndNormalized) {
  std::mt19937_64 gen(32);
  for (int c = 0; c < 200; ++c) {
    const auto x = oracle::random_instance(gen, 12, 12);
    const auto q = estimate_personalization(x.observation(), ClusterLabels(x.init_users, x.k1), ClusterLabels(x.init_items, x.k2), x.s);
    for (int a = 0; a < x.k1; ++a) {
      for (int b = 0; b < x.k2; ++b) {
        double s = 0.0;
        for (double v : q.at(a, b)) {
          EXPECT_GT(v, 0.0);
          s += v;
        }
        EXPECT_NEAR(s, 1.0, 1e-12);
      }
    }
  }
}

TEST(Estimation, PermutationEquivariant) {
  std::mt19937_64 gen(33);
  for (int c = 0; c < 100; ++c) {
    const auto x = oracle::random_instance(gen, 12, 12);
    std::vector<int> pu(static_cast<std::size_t>(x.k1)), pi(static_cast<std::size_t>(x.k2));
    std::iota(pu.begin(), pu.end(), 0);
    std::iota(pi.begin(), pi.end(), 0);
    std::shuffle(pu.begin(), pu.end(), gen);
    std::shuffle(pi.begin(), pi.end(), gen);
    auto relabel = [](const std::vector<int>& l, const std::vector<int>& p) {
      std::vector<int> out;
      for (int a : l) out.push_back(p[static_cast<std::size_t>(a)]);
      return out;
    };
    const auto obs = x.observation();
    const auto gu = x.graph(x.adj_users), gi = x.graph(x.adj_items);
    const auto e0 = estimate_model(obs, gu, gi, ClusterLabels(x.init_users, x.k1), ClusterLabels(x.init_items, x.k2), x.s);
    const auto e1 = estimate_model(obs, gu, gi, ClusterLabels(relabel(x.init_users, pu), x.k1),
                                   ClusterLabels(relabel(x.init_items, pi), x.k2), x.s);
    for (int a = 0; a < x.k1; ++a) {
      for (int a2 = 0; a2 < x.k1; ++a2) EXPECT_EQ(e0.b_user(a, a2), e1.b_user(pu[static_cast<std::size_t>(a)], pu[static_cast<std::size_t>(a2)]));
      for (int b = 0; b < x.k2; ++b) {
        for (std::size_t z = 0; z < x.s; ++z) {
          EXPECT_EQ(e0.q_hat.at(a, b)[z], e1.q_hat.at(pu[static_cast<std::size_t>(a)], pi[static_cast<std::size_t>(b)])[z]);
        }
      }
    }
    for (int b = 0; b < x.k2; ++b) {
      for (int b2 = 0; b2 < x.k2; ++b2) EXPECT_EQ(e0.b_item(b, b2), e1.b_item(pi[static_cast<std::size_t>(b)], pi[static_cast<std::size_t>(b2)]));
    }
  }
}

TEST(Estimation, SbmExactLabelsAccurate) {
  const auto truth = block_labels(2000, 2);
  const auto conn = symmetric_conn_from_quality(2000, 2, 2.0, 0.25);
  int good = 0;
  for (int t = 0; t < 50; ++t) {
    const auto g = sample_sbm(truth, conn, derive_seed(3300, static_cast<std::uint64_t>(t)));
    const auto est = estimate_connectivity(g, truth);
    double worst = 0.0;
    for (int a = 0; a < 2; ++a) {
      for (int b = 0; b < 2; ++b) worst = std::max(worst, std::abs(est.matrix(a, b) - conn(a, b)) / conn(a, b));
    }
    good += worst <= 0.1 ? 1 : 0;
  }
  EXPECT_GE(good, 48);
}
