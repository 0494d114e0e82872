#include "sotead/kg.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>
#include <set>

#include "test_util.hpp"

namespace sotead {
namespace {

using testing::TempDir;
using testing::write_file;

class KgFiles : public ::testing::Test {
 protected:
  void SetUp() override {
    names1_ = write_file(dir_ / "n1.tsv", "a\tAspirin\nb\tHeart attack\nc\tFever\n");
    triples1_ = write_file(dir_ / "t1.tsv", "a\ttreats\tb\nc\tsymptom_of\tb\n");
    names2_ = write_file(dir_ / "n2.tsv", "x\tAspirine\ny\tInfarctus\nz\tToux\n");
    triples2_ = write_file(dir_ / "t2.tsv", "x\ttraite\ty\n");
  }

  TempDir dir_;
  std::filesystem::path names1_, triples1_, names2_, triples2_;
};

TEST_F(KgFiles, LoadsEntitiesAndTriples) {
  auto kg = load_kg(triples1_, names1_);
  EXPECT_EQ(kg.size(), 3u);
  EXPECT_EQ(kg.triples().size(), 2u);
  EXPECT_EQ(kg.relation_names().size(), 2u);
  EXPECT_EQ(kg.entity(1).key, "b");
  EXPECT_EQ(kg.entity(1).name, "Heart attack");
  EXPECT_EQ(kg.id_of("c"), 2);
  EXPECT_EQ(kg.neighbors(1), (std::vector<EntityId>{0, 2}));
  EXPECT_EQ(kg.neighbors(0), (std::vector<EntityId>{1}));
}

TEST_F(KgFiles, UnknownKeyInTripleIsReferentialError) {
  auto bad = write_file(dir_ / "bad.tsv", "a\ttreats\tq\n");
  try {
    load_kg(bad, names1_);
    FAIL() << "expected ReferenceError";
  } catch (const ReferenceError& e) {
    EXPECT_EQ(e.key(), "q");
  }
}

TEST_F(KgFiles, WrongColumnCountReportsLine) {
  auto bad = write_file(dir_ / "bad.tsv", "a\ttreats\tb\na\tb\n");
  try {
    load_kg(bad, names1_);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
}

TEST_F(KgFiles, DuplicateKeyRejected) {
  auto dup = write_file(dir_ / "dup.tsv", "a\tA\nb\tB\na\tC\n");
  EXPECT_THROW(load_kg(triples1_, dup), DuplicateError);
}

TEST_F(KgFiles, GoldComplementsAreDangling) {
  auto kg1 = load_kg(triples1_, names1_);
  auto kg2 = load_kg(triples2_, names2_);
  auto gold = load_gold(write_file(dir_ / "g.tsv", "a\tx\nb\ty\n"), kg1, kg2);
  EXPECT_EQ(gold.pairs.size(), 2u);
  EXPECT_EQ(gold.dangling1, (std::vector<EntityId>{2}));
  EXPECT_EQ(gold.dangling2, (std::vector<EntityId>{2}));
}

TEST_F(KgFiles, EmptyGoldMakesEverythingDangling) {
  auto kg1 = load_kg(triples1_, names1_);
  auto kg2 = load_kg(triples2_, names2_);
  auto gold = load_gold(write_file(dir_ / "g.tsv", ""), kg1, kg2);
  EXPECT_TRUE(gold.pairs.empty());
  EXPECT_EQ(gold.dangling1.size(), 3u);
  EXPECT_EQ(gold.dangling2.size(), 3u);
}

TEST_F(KgFiles, GoldRejectsRepeatedSource) {
  auto kg1 = load_kg(triples1_, names1_);
  auto kg2 = load_kg(triples2_, names2_);
  EXPECT_THROW(load_gold(write_file(dir_ / "g.tsv", "a\tx\na\ty\n"), kg1, kg2), DuplicateError);
  EXPECT_THROW(load_gold(write_file(dir_ / "g2.tsv", "a\tnope\n"), kg1, kg2), ReferenceError);
}

TEST_F(KgFiles, ExplicitDanglingFiles) {
  auto kg1 = load_kg(triples1_, names1_);
  auto kg2 = load_kg(triples2_, names2_);
  auto pairs = write_file(dir_ / "g.tsv", "a\tx\n");
  auto d1 = write_file(dir_ / "d1.txt", "c\n");
  auto d2 = write_file(dir_ / "d2.txt", "z\ny\n");
  auto gold = load_gold(pairs, kg1, kg2, d1, d2);
  EXPECT_EQ(gold.dangling1, (std::vector<EntityId>{2}));
  EXPECT_EQ(gold.dangling2, (std::vector<EntityId>{1, 2}));
  auto clash = write_file(dir_ / "d3.txt", "a\n");
  EXPECT_THROW(load_gold(pairs, kg1, kg2, clash, d2), DuplicateError);
}

TEST(KnowledgeGraph, AdjacencyIsUndirectedClosureWithoutDuplicates) {
  std::vector<Entity> es{{0, "a", "A"}, {1, "b", "B"}, {2, "c", "C"}};
  KnowledgeGraph kg(es, {"r", "s"}, {{0, 0, 1}, {1, 0, 0}, {0, 1, 1}, {2, 0, 2}});
  EXPECT_EQ(kg.neighbors(0), (std::vector<EntityId>{1}));
  EXPECT_EQ(kg.neighbors(1), (std::vector<EntityId>{0}));
  EXPECT_TRUE(kg.neighbors(2).empty());
}

// Random graphs survive save -> load unchanged.
TEST(KnowledgeGraph, RoundTripProperty) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 25; ++trial) {
    TempDir dir;
    const int n = 2 + static_cast<int>(rng() % 30);
    std::vector<Entity> es;
    for (int i = 0; i < n; ++i)
      es.push_back({i, "k" + std::to_string(i * 7 + trial), "name " + std::to_string(rng() % 100)});
    std::vector<std::string> rels{"r0", "r1", "r2"};
    std::vector<RelationTriple> ts;
    const int m = static_cast<int>(rng() % 60);
    std::set<int> used_rel;
    for (int t = 0; t < m; ++t) {
      RelationTriple tr{static_cast<EntityId>(rng() % n), static_cast<int>(rng() % 3),
                        static_cast<EntityId>(rng() % n)};
      ts.push_back(tr);
    }
    // Relation ids are assigned in first-appearance order on reload, so
    // renumber the same way before comparing.
    std::vector<int> remap(3, -1);
    std::vector<std::string> rel_order;
    for (auto& t : ts) {
      if (remap[t.relation] < 0) {
        remap[t.relation] = static_cast<int>(rel_order.size());
        rel_order.push_back(rels[t.relation]);
      }
      t.relation = remap[t.relation];
    }
    KnowledgeGraph kg(es, rel_order, ts);
    save_kg(kg, dir / "t.tsv", dir / "n.tsv");
    auto back = load_kg(dir / "t.tsv", dir / "n.tsv");
    EXPECT_TRUE(back == kg) << "trial " << trial;
  }
}

// Loaded gold pairs are injective and disjoint from the dangling sets.
TEST(GoldStandard, InjectiveAndDisjointProperty) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    TempDir dir;
    const int n1 = 3 + static_cast<int>(rng() % 10), n2 = 3 + static_cast<int>(rng() % 10);
    std::string names1, names2, pairs;
    for (int i = 0; i < n1; ++i) names1 += "a" + std::to_string(i) + "\tA\n";
    for (int j = 0; j < n2; ++j) names2 += "b" + std::to_string(j) + "\tB\n";
    std::vector<int> p1(n1), p2(n2);
    std::iota(p1.begin(), p1.end(), 0);
    std::iota(p2.begin(), p2.end(), 0);
    std::shuffle(p1.begin(), p1.end(), rng);
    std::shuffle(p2.begin(), p2.end(), rng);
    const int k = static_cast<int>(rng() % (std::min(n1, n2) + 1));
    for (int t = 0; t < k; ++t) pairs += "a" + std::to_string(p1[t]) + "\tb" + std::to_string(p2[t]) + "\n";
    auto kg1 = load_kg(write_file(dir / "t1", ""), write_file(dir / "n1", names1));
    auto kg2 = load_kg(write_file(dir / "t2", ""), write_file(dir / "n2", names2));
    auto gold = load_gold(write_file(dir / "g", pairs), kg1, kg2);
    std::set<EntityId> s1, s2;
    for (auto [a, b] : gold.pairs) {
      EXPECT_TRUE(s1.insert(a).second);
      EXPECT_TRUE(s2.insert(b).second);
    }
    for (auto d : gold.dangling1) EXPECT_FALSE(s1.count(d));
    for (auto d : gold.dangling2) EXPECT_FALSE(s2.count(d));
    EXPECT_EQ(s1.size() + gold.dangling1.size(), kg1.size());
    EXPECT_EQ(s2.size() + gold.dangling2.size(), kg2.size());
  }
}

}  // namespace
}  // namespace sotead
