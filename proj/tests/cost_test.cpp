#include "sotead/cost.hpp"

#include <gtest/gtest.h>

#include <random>
#include <set>

#include "oracles.hpp"
#include "sotead/virtual_costs.hpp"
#include "test_util.hpp"

namespace sotead {
namespace {

Matrix random_matrix(std::size_t r, std::size_t c, std::mt19937_64& rng) {
  Matrix m(r, c);
  std::normal_distribution<double> g;
  for (auto& v : m.data()) v = g(rng);
  return m;
}

TEST(SparseCost, ValidatesEntries) {
  EXPECT_THROW(SparseCostMatrix(2, 2, {{0, 2, 1.0}}), ShapeError);
  EXPECT_THROW(SparseCostMatrix(2, 2, {{0, 0, 0.0}}), Error);
  EXPECT_THROW(SparseCostMatrix(2, 2, {{0, 0, 1.0}, {0, 0, 2.0}}), DuplicateError);
  SparseCostMatrix c(2, 3, {{1, 2, 0.5}, {0, 1, 0.25}});
  EXPECT_EQ(c.entries().front().i, 0);
  EXPECT_EQ(c.find(1, 2), 0.5);
  EXPECT_FALSE(c.find(1, 1));
  EXPECT_EQ(c.col(2).size(), 1u);
}

TEST(BuildCost, DenseWhenKCoversTheSide) {
  std::mt19937_64 rng(1);
  auto e1 = random_matrix(5, 3, rng), e2 = random_matrix(4, 3, rng);
  auto c = build_cost(e1, e2, 4);
  EXPECT_EQ(c.nnz(), 20u);
  for (const auto& e : c.entries())
    EXPECT_DOUBLE_EQ(e.cost, oracle::l1(oracle::row_of(e1, static_cast<std::size_t>(e.i)),
                                        oracle::row_of(e2, static_cast<std::size_t>(e.j))));
  // K larger than either side is clamped.
  EXPECT_EQ(build_cost(e1, e2, 100).nnz(), 20u);
}

TEST(BuildCost, TopOnePatternIsRowAndColumnArgmins) {
  std::mt19937_64 rng(2);
  for (int t = 0; t < 50; ++t) {
    auto e1 = random_matrix(4, 3, rng), e2 = random_matrix(4, 3, rng);
    auto c = build_cost(e1, e2, 1);
    std::set<std::pair<int, int>> want;
    for (std::size_t i = 0; i < 4; ++i) {
      std::size_t best = 0;
      for (std::size_t j = 1; j < 4; ++j)
        if (oracle::l1(oracle::row_of(e1, i), oracle::row_of(e2, j)) <
            oracle::l1(oracle::row_of(e1, i), oracle::row_of(e2, best)))
          best = j;
      want.emplace(static_cast<int>(i), static_cast<int>(best));
    }
    for (std::size_t j = 0; j < 4; ++j) {
      std::size_t best = 0;
      for (std::size_t i = 1; i < 4; ++i)
        if (oracle::l1(oracle::row_of(e1, i), oracle::row_of(e2, j)) <
            oracle::l1(oracle::row_of(e1, best), oracle::row_of(e2, j)))
          best = i;
      want.emplace(static_cast<int>(best), static_cast<int>(j));
    }
    std::set<std::pair<int, int>> got;
    for (const auto& e : c.entries()) got.emplace(e.i, e.j);
    EXPECT_EQ(got, want);
  }
}

// Every present entry is in its row's or its column's top K, and costs stay >= the floor.
TEST(BuildCost, PatternPropertyAgainstDenseRecomputation) {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 20; ++t) {
    const std::size_t m = 3 + rng() % 8, n = 3 + rng() % 8, k = 1 + rng() % 4;
    auto e1 = random_matrix(m, 2, rng), e2 = random_matrix(n, 2, rng);
    auto dense = dense_costs(e1, e2);
    auto c = sparsify_top_k(dense, k);
    for (const auto& e : c.entries()) {
      const auto i = static_cast<std::size_t>(e.i), j = static_cast<std::size_t>(e.j);
      std::size_t row_rank = 0, col_rank = 0;
      for (std::size_t q = 0; q < n; ++q) row_rank += dense(i, q) < dense(i, j);
      for (std::size_t q = 0; q < m; ++q) col_rank += dense(q, j) < dense(i, j);
      EXPECT_TRUE(row_rank < k || col_rank < k);
      EXPECT_GE(e.cost, kCostFloor);
    }
    for (std::size_t i = 0; i < m; ++i) EXPECT_EQ(c.row(i).size() >= std::min(k, n), true);
  }
}

TEST(BuildCost, IdenticalEmbeddingsAreFloored) {
  Matrix e(2, 2, 1.0);
  auto c = build_cost(e, e, 2);
  for (const auto& x : c.entries()) EXPECT_EQ(x.cost, kCostFloor);
}

TEST(BuildCost, BigramDistanceIsAdded) {
  std::vector<Entity> a{{0, "a", "abc"}}, b{{0, "b", "abd"}};
  KnowledgeGraph kg1(a, {}, {}), kg2(b, {}, {});
  Matrix e1(1, 1), e2(1, 1);
  e2(0, 0) = 1.0;
  BigramOptions opt{&kg1, &kg2, 1.0};
  // Bigrams {ab, bc} vs {ab, bd}: L1 = 2, summed length 6.
  EXPECT_NEAR(dense_costs(e1, e2, &opt)(0, 0), 1.0 + 2.0 / 6.0, 1e-15);
}

TEST(Profiles, HandValues) {
  auto p = min_cost_profiles(SparseCostMatrix(1, 1, {{0, 0, 0.7}}));
  EXPECT_EQ(p.row_min, std::vector<double>{0.7});
  EXPECT_EQ(p.col_min, std::vector<double>{0.7});
  auto q = min_cost_profiles(SparseCostMatrix(2, 3, {{0, 0, 0.3}, {0, 2, 0.9}}));
  EXPECT_EQ(q.row_min[0], 0.3);
  EXPECT_EQ(q.empty_rows, std::vector<EntityId>{1});
  EXPECT_EQ(q.empty_cols, std::vector<EntityId>{1});
}

TEST(Profiles, MatchDenseScan) {
  std::mt19937_64 rng(4);
  for (int t = 0; t < 20; ++t) {
    auto dense = dense_costs(random_matrix(7, 3, rng), random_matrix(6, 3, rng));
    auto c = sparsify_top_k(dense, 2);
    auto full = c.dense();
    auto p = min_cost_profiles(c);
    for (std::size_t i = 0; i < 7; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < 6; ++j) best = std::min(best, full(i, j));
      EXPECT_EQ(p.row_min[i], best);
    }
    for (std::size_t j = 0; j < 6; ++j) {
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < 7; ++i) best = std::min(best, full(i, j));
      EXPECT_EQ(p.col_min[j], best);
    }
  }
}

TEST(Quantile, LinearInterpolation) {
  std::vector<double> v{4, 1, 3, 2};
  EXPECT_DOUBLE_EQ(quantile(v, 0.0), 1.0);
  EXPECT_DOUBLE_EQ(quantile(v, 1.0), 4.0);
  EXPECT_DOUBLE_EQ(quantile(v, 0.05), 1.15);
  EXPECT_DOUBLE_EQ(quantile(v, 0.5), 2.5);
  EXPECT_DOUBLE_EQ(quantile({7.0}, 0.95), 7.0);
  EXPECT_THROW(quantile({}, 0.5), Error);
}

TEST(Quantile, LevelsAndCandidatesAreNondecreasing) {
  auto levels = quantile_levels(10);
  ASSERT_EQ(levels.size(), 10u);
  EXPECT_DOUBLE_EQ(levels.front(), 0.05);
  EXPECT_DOUBLE_EQ(levels.back(), 0.95);
  std::mt19937_64 rng(5);
  std::vector<double> v(37);
  for (auto& x : v) x = std::exponential_distribution<double>()(rng);
  for (std::size_t k = 1; k < levels.size(); ++k) EXPECT_LE(quantile(v, levels[k - 1]), quantile(v, levels[k]));
}

TEST(GridSearch, AllCellsTiedPicksLargestPair) {
  // Planted pairs cost far less than any quantile candidate, so every cell matches them.
  Matrix d(3, 3, 5.0);
  for (std::size_t k = 0; k < 3; ++k) d(k, k) = 1e-3;
  d(0, 1) = 4.0;
  d(2, 0) = 6.0;
  auto c = SparseCostMatrix::from_dense(d);
  std::vector<EntityPair> p{{0, 0}, {1, 1}, {2, 2}};
  auto res = grid_search_virtual_costs(c, p);
  ASSERT_EQ(res.cells.size(), 100u);
  for (const auto& cell : res.cells) EXPECT_EQ(cell.hits, 1.0);
  EXPECT_EQ(res.chosen.alpha, res.alpha_candidates.back());
  EXPECT_EQ(res.chosen.beta, res.beta_candidates.back());
}

TEST(GridSearch, MatchesExhaustiveOracleOnPlantedInstance) {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(0.2, 1.0);
  for (int trial = 0; trial < 2; ++trial) {
    Matrix d(8, 8);
    for (auto& v : d.data()) v = u(rng);
    std::vector<EntityPair> planted{{0, 3}, {4, 1}, {6, 6}};
    for (auto [i, j] : planted) d(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) = 0.01 + 0.01 * u(rng);
    auto c = SparseCostMatrix::from_dense(d);
    auto res = grid_search_virtual_costs(c, planted);

    // Re-derive every cell with the enumeration oracle and the same tie rule.
    std::size_t best = 0;
    std::vector<double> hits;
    for (std::size_t a = 0; a < 10; ++a)
      for (std::size_t b = 0; b < 10; ++b) {
        VirtualCosts vc{res.alpha_candidates[a], res.beta_candidates[b]};
        auto s = brute_force_oracle(d, vc);
        std::size_t h = 0;
        for (auto p : planted) h += std::count(s.matched.begin(), s.matched.end(), p);
        hits.push_back(static_cast<double>(h) / 3.0);
        const std::size_t k = hits.size() - 1;
        if (hits[k] > hits[best] || (hits[k] == hits[best] && k > best)) best = k;
      }
    for (std::size_t k = 0; k < 100; ++k) EXPECT_EQ(res.cells[k].hits, hits[k]) << "cell " << k;
    EXPECT_EQ(res.chosen_index, best);
    EXPECT_EQ(res.cells[best].hits, 1.0);
    auto s = brute_force_oracle(d, res.chosen);
    for (auto p : planted) EXPECT_EQ(std::count(s.matched.begin(), s.matched.end(), p), 1);
  }
}

TEST(GridSearch, ChosenPairIsOnTheGridAndThreadsAgree) {
  std::mt19937_64 rng(7);
  auto dense = dense_costs(random_matrix(12, 3, rng), random_matrix(10, 3, rng));
  auto c = sparsify_top_k(dense, 3);
  std::vector<EntityPair> p{{0, 0}, {1, 1}, {2, 2}, {3, 3}};
  auto one = grid_search_virtual_costs(c, p);
  GridSearchOptions opt;
  opt.threads = 4;
  auto many = grid_search_virtual_costs(c, p, opt);
  EXPECT_EQ(one.chosen_index, many.chosen_index);
  EXPECT_NE(std::find(one.alpha_candidates.begin(), one.alpha_candidates.end(), one.chosen.alpha),
            one.alpha_candidates.end());
  EXPECT_NE(std::find(one.beta_candidates.begin(), one.beta_candidates.end(), one.chosen.beta),
            one.beta_candidates.end());
}

TEST(GridSearch, EmptyAnchorsFallBackToMedian) {
  auto c = SparseCostMatrix(2, 2, {{0, 0, 1.0}, {1, 1, 3.0}, {0, 1, 2.0}});
  auto res = grid_search_virtual_costs(c, {});
  EXPECT_TRUE(res.fallback);
  ASSERT_EQ(res.warnings.size(), 1u);
  EXPECT_DOUBLE_EQ(res.chosen.alpha, 1.5);  // column minima {1, 2}
  EXPECT_DOUBLE_EQ(res.chosen.beta, 2.0);   // row minima {1, 3}
}

TEST(CostIo, RoundTripWithSidecar) {
  testing::TempDir dir;
  std::mt19937_64 rng(8);
  auto c = build_cost(random_matrix(6, 3, rng), random_matrix(9, 3, rng), 2);
  write_cost(dir / "c.tsv", dir / "c.json", c, {6, 9, 2, VirtualCosts{0.3, 0.7}});
  auto meta = read_cost_sidecar(dir / "c.json");
  EXPECT_EQ(meta.m, 6u);
  EXPECT_EQ(meta.n, 9u);
  EXPECT_EQ(meta.k, 2u);
  ASSERT_TRUE(meta.virtual_costs);
  EXPECT_EQ(meta.virtual_costs->beta, 0.7);
  auto back = read_cost(dir / "c.tsv", meta);
  EXPECT_EQ(back.entries(), c.entries());
  EXPECT_EQ(back.cols(), 9u);

  write_cost(dir / "d.tsv", dir / "d.json", c, {6, 9, 2, std::nullopt});
  EXPECT_FALSE(read_cost_sidecar(dir / "d.json").virtual_costs);
  testing::write_file(dir / "bad.tsv", "0\t1\t0.5\n0\tx\t0.2\n");
  try {
    read_cost(dir / "bad.tsv");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
}

}  // namespace
}  // namespace sotead
