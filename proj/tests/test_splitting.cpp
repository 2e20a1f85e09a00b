#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>

#include "mc2g/splitting.hpp"
#include "oracles.hpp"

using namespace mc2g;

TEST(Split, DefaultProbability) {
  EXPECT_NEAR(default_split_probability(2000), 0.3627, 1e-4);
  EXPECT_NEAR(default_split_probability(2000), 1.0 / std::sqrt(std::log(2000.0)), 1e-15);
}

TEST(Split, EmptyGraph) {
  const auto s = split_graph(SimpleGraph::empty(10), std::nullopt, 1);
  EXPECT_EQ(s.part_a.num_edges(), 0u);
  EXPECT_EQ(s.part_b.num_edges(), 0u);
}

TEST(Split, RejectsBadProbability) {
  const auto g = SimpleGraph::empty(10);
  EXPECT_THROW(split_graph(g, 0.0, 1), Error);
  EXPECT_THROW(split_graph(g, 1.0, 1), Error);
  EXPECT_THROW(split_graph(g, -0.2, 1), Error);
}

TEST(Split, PartitionCoversInput) {
  std::mt19937_64 gen(4);
  for (int c = 0; c < 20; ++c) {
    const auto g = oracle::random_graph(gen, 60, 0.2);
    const auto s = split_graph(g, 0.4, gen());
    std::set<Edge> a(s.part_a.edges().begin(), s.part_a.edges().end());
    std::set<Edge> b(s.part_b.edges().begin(), s.part_b.edges().end());
    EXPECT_EQ(a.size() + b.size(), g.num_edges());
    for (const auto& e : g.edges()) EXPECT_NE(a.count(e), b.count(e));
    EXPECT_EQ(s.split_probability, 0.4);
  }
}

TEST(Split, FractionWithinFiveSigma) {
  std::mt19937_64 gen(5);
  const auto g = oracle::random_graph(gen, 400, 0.1);
  const double q = default_split_probability(400);
  double total = 0.0;
  const int reps = 50;
  for (int r = 0; r < reps; ++r) total += static_cast<double>(split_graph(g, std::nullopt, static_cast<std::uint64_t>(r)).part_a.num_edges());
  const double e = static_cast<double>(g.num_edges());
  const double sd = std::sqrt(e * q * (1 - q) * reps);
  EXPECT_NEAR(total, e * q * reps, 5.0 * sd);
}

TEST(Split, Identity) {
  std::mt19937_64 gen(6);
  const auto g = oracle::random_graph(gen, 30, 0.3);
  const auto s = identity_split(g);
  EXPECT_EQ(s.part_a, g);
  EXPECT_EQ(s.part_b, g);
  EXPECT_EQ(s.split_probability, 1.0);
}

TEST(Split, ModeParsing) {
  EXPECT_EQ(parse_split_mode("analyzed"), SplitMode::kAnalyzed);
  EXPECT_EQ(parse_split_mode("simplified"), SplitMode::kSimplified);
  EXPECT_THROW(parse_split_mode("both"), Error);
  EXPECT_EQ(to_string(SplitMode::kAnalyzed), "analyzed");
}
