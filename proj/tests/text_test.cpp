#include "sotead/text.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "test_util.hpp"

namespace sotead {
namespace {

using testing::TempDir;
using testing::write_file;

Matrix rows(std::initializer_list<std::initializer_list<double>> init) {
  Matrix m(init.size(), init.begin()->size());
  std::size_t r = 0;
  for (auto row : init) {
    std::size_t c = 0;
    for (double v : row) m(r, c++) = v;
    ++r;
  }
  return m;
}

KnowledgeGraph names_only(std::vector<std::string> names) {
  std::vector<Entity> es;
  for (std::size_t i = 0; i < names.size(); ++i)
    es.push_back({static_cast<EntityId>(i), "e" + std::to_string(i), names[i]});
  return KnowledgeGraph(es, {}, {});
}

TEST(Tokenize, LowercasesAndSplitsOnPunctuation) {
  EXPECT_EQ(tokenize("Heart_Attack (acute),  Type-2"),
            (std::vector<std::string>{"heart", "attack", "acute", "type", "2"}));
  EXPECT_EQ(tokenize("Heart_Attack", {.split_underscore = false}),
            (std::vector<std::string>{"heart_attack"}));
  EXPECT_EQ(tokenize("caf\xc3\xa9\xc2\xa0noir"), (std::vector<std::string>{"caf\xc3\xa9", "noir"}));
}

TEST(EmbedNames, MeanOfInVocabularyTokens) {
  WordEmbeddingTable t{2, {{"heart", {1, 0}}, {"attack", {0, 1}}}};
  auto kg = names_only({"heart attack", "Heart of stone", "unknown words"});
  auto e = embed_names(kg, t);
  EXPECT_DOUBLE_EQ(e.vectors(0, 0), 0.5);
  EXPECT_DOUBLE_EQ(e.vectors(0, 1), 0.5);
  EXPECT_DOUBLE_EQ(e.vectors(1, 0), 1.0);
  EXPECT_DOUBLE_EQ(e.vectors(1, 1), 0.0);
  EXPECT_DOUBLE_EQ(e.vectors(2, 0), 0.0);
  EXPECT_DOUBLE_EQ(e.vectors(2, 1), 0.0);
  EXPECT_EQ(e.oov, (std::vector<EntityId>{2}));
}

TEST(WordVectors, LoadsGloveFormat) {
  TempDir dir;
  auto p = write_file(dir / "v.txt", "heart 1 0\nattack 0 1.5\n");
  auto t = load_word_vectors(p);
  EXPECT_EQ(t.dim, 2u);
  EXPECT_DOUBLE_EQ(t.find("attack")->at(1), 1.5);
  EXPECT_THROW(load_word_vectors(write_file(dir / "bad.txt", "a 1 2\nb 1\n")), ParseError);
  EXPECT_THROW(load_word_vectors(write_file(dir / "dup.txt", "a 1 2\na 1 3\n")), DuplicateError);
}

TEST(Similarity, HandValues) {
  EXPECT_DOUBLE_EQ(similarity_matrix(rows({{1, 0}}), rows({{1, 0}}))(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(similarity_matrix(rows({{1, 0}}), rows({{0, 1}}))(0, 0), 0.0);
  // 3*4 + 4*3 = 24 over |(3,4)| |(4,3)| = 25
  const double oracle = (3.0 * 4.0 + 4.0 * 3.0) / (std::sqrt(3.0 * 3.0 + 4.0 * 4.0) * std::sqrt(16.0 + 9.0));
  EXPECT_NEAR(similarity_matrix(rows({{3, 4}}), rows({{4, 3}}))(0, 0), oracle, 1e-15);
  EXPECT_NEAR(oracle, 0.96, 1e-15);
  EXPECT_DOUBLE_EQ(similarity_matrix(rows({{0, 0}}), rows({{4, 3}}))(0, 0), 0.0);
  EXPECT_THROW(similarity_matrix(rows({{1, 0}}), rows({{1, 0, 0}})), ShapeError);
}

TEST(Similarity, TransposeSymmetryAndBounds) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 20; ++trial) {
    Matrix a(1 + rng() % 9, 5), b(1 + rng() % 9, 5);
    for (auto& x : a.data()) x = g(rng);
    for (auto& x : b.data()) x = g(rng);
    auto ab = similarity_matrix(a, b), ba = similarity_matrix(b, a);
    for (std::size_t i = 0; i < a.rows(); ++i)
      for (std::size_t j = 0; j < b.rows(); ++j) {
        EXPECT_NEAR(ab(i, j), ba(j, i), 1e-12);
        EXPECT_LE(std::abs(ab(i, j)), 1.0 + 1e-9);
      }
  }
}

TEST(PseudoPairs, DiagonalSelected) {
  auto p = extract_pseudo_pairs(rows({{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}), 0.99);
  EXPECT_EQ(p.pairs, (std::vector<EntityPair>{{0, 0}, {1, 1}, {2, 2}}));
}

TEST(PseudoPairs, RowWithTwoAboveThresholdYieldsNothing) {
  // Row 0 has 0.995 and 0.992 above 0.99, violating uniqueness in its row;
  // row 1 has nothing above the threshold.
  auto p = extract_pseudo_pairs(rows({{0.995, 0.992}, {0.30, 0.40}}), 0.99);
  EXPECT_TRUE(p.pairs.empty());
}

TEST(PseudoPairs, ColumnConflictExcludesBoth) {
  auto p = extract_pseudo_pairs(rows({{0.995, 0.1}, {0.996, 0.2}, {0.0, 0.999}}), 0.99);
  EXPECT_EQ(p.pairs, (std::vector<EntityPair>{{2, 1}}));
  EXPECT_THROW(extract_pseudo_pairs(rows({{1}}), 1.0), ConfigError);
}

// Pairs are mutually exclusive at every threshold. Raising the threshold
// only adds a pair (i, j) when a competitor in row i or column j fell to or
// below the new threshold; otherwise P(high) is contained in P(low).
TEST(PseudoPairs, ExclusivityAndThresholdProperty) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.8, 1.0);
  const std::vector<double> eps{0.85, 0.9, 0.95, 0.98, 0.99};
  for (int trial = 0; trial < 50; ++trial) {
    Matrix s(2 + rng() % 10, 2 + rng() % 10);
    for (auto& x : s.data()) x = u(rng);
    std::vector<std::vector<EntityPair>> sets;
    for (double e : eps) {
      auto p = extract_pseudo_pairs(s, e);
      for (std::size_t a = 0; a < p.pairs.size(); ++a)
        for (std::size_t b = a + 1; b < p.pairs.size(); ++b) {
          EXPECT_NE(p.pairs[a].first, p.pairs[b].first);
          EXPECT_NE(p.pairs[a].second, p.pairs[b].second);
        }
      sets.push_back(p.pairs);
    }
    for (std::size_t lo = 0; lo < eps.size(); ++lo)
      for (std::size_t hi = lo + 1; hi < eps.size(); ++hi)
        for (auto [i, j] : sets[hi]) {
          if (std::find(sets[lo].begin(), sets[lo].end(), EntityPair{i, j}) != sets[lo].end()) continue;
          bool competitor = false;
          for (std::size_t k = 0; k < s.cols(); ++k)
            competitor |= k != static_cast<std::size_t>(j) && s(i, k) > eps[lo] && s(i, k) <= eps[hi];
          for (std::size_t l = 0; l < s.rows(); ++l)
            competitor |= l != static_cast<std::size_t>(i) && s(l, j) > eps[lo] && s(l, j) <= eps[hi];
          EXPECT_TRUE(competitor) << "pair (" << i << "," << j << ") appeared without a competitor dropping out";
        }
  }
}

TEST(PseudoPairs, RaisingThresholdCanAddAPair) {
  Matrix s = rows({{0.995, 0.95}, {0.1, 0.2}});
  EXPECT_TRUE(extract_pseudo_pairs(s, 0.9).pairs.empty());
  EXPECT_EQ(extract_pseudo_pairs(s, 0.99).pairs, (std::vector<EntityPair>{{0, 0}}));
}

TEST(TopN, OrderStatisticsAndTies) {
  auto q = top_n_candidates(rows({{0.9, 0.1, 0.5}}), 2);
  EXPECT_EQ(q, (std::vector<EntityPair>{{0, 0}, {0, 2}}));
  auto t = top_n_candidates(rows({{0.3, 0.3, 0.3}}), 1);
  EXPECT_EQ(t, (std::vector<EntityPair>{{0, 0}}));
  auto all = top_n_candidates(rows({{0.1, 0.2}, {0.4, 0.3}}), 5);
  EXPECT_EQ(all.size(), 4u);
  EXPECT_THROW(top_n_candidates(rows({{1}}), 0), ConfigError);
}

}  // namespace
}  // namespace sotead
