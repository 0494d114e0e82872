#include "sotead/lp.hpp"

#include <gtest/gtest.h>

#include <map>
#include <random>
#include <sstream>

#include "sotead/branch_and_cut.hpp"
#include "hand_mips.hpp"

namespace sotead {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

TEST(Simplex, SingleEquality) {
  LpProblem lp;
  lp.add_variable(1.0);
  lp.add_row({{0, 1.0}}, RowSense::Equal, 1.0);
  auto r = simplex_solve(lp);
  ASSERT_EQ(r.status, LpStatus::Optimal);
  EXPECT_NEAR(r.objective, 1.0, 1e-12);
}

TEST(Simplex, TwoVariableVertex) {
  LpProblem lp;
  lp.add_variable(2.0);
  lp.add_variable(3.0);
  lp.add_row({{0, 1.0}, {1, 1.0}}, RowSense::Equal, 1.0);
  auto r = simplex_solve(lp);
  ASSERT_EQ(r.status, LpStatus::Optimal);
  EXPECT_NEAR(r.objective, 2.0, 1e-12);
  EXPECT_NEAR(r.x[0], 1.0, 1e-12);
  EXPECT_NEAR(r.x[1], 0.0, 1e-12);
}

TEST(Simplex, InfeasibleAndUnbounded) {
  LpProblem inf;
  inf.add_variable(1.0);
  inf.add_row({{0, 1.0}}, RowSense::LessEqual, 1.0);
  inf.add_row({{0, 1.0}}, RowSense::GreaterEqual, 2.0);
  EXPECT_EQ(simplex_solve(inf).status, LpStatus::Infeasible);

  LpProblem unb;
  unb.add_variable(-1.0);
  unb.add_variable(0.0);
  unb.add_row({{0, 1.0}, {1, -1.0}}, RowSense::Equal, 0.0);
  EXPECT_EQ(simplex_solve(unb).status, LpStatus::Unbounded);
}

TEST(Simplex, BoundsAndNegativeRhs) {
  // min -x - y, x <= 2 via a bound, y in [1, 3], x + y >= -5 (negative rhs), x - y <= 0.
  LpProblem lp;
  lp.add_variable(-1.0, 0.0, 2.0);
  lp.add_variable(-1.0, 1.0, 3.0);
  lp.add_row({{0, 1.0}, {1, 1.0}}, RowSense::GreaterEqual, -5.0);
  lp.add_row({{0, 1.0}, {1, -1.0}}, RowSense::LessEqual, 0.0);
  auto r = simplex_solve(lp);
  ASSERT_EQ(r.status, LpStatus::Optimal);
  EXPECT_NEAR(r.objective, -5.0, 1e-12);
}

TEST(Simplex, RedundantEqualityRows) {
  LpProblem lp;
  lp.add_variable(1.0);
  lp.add_variable(2.0);
  lp.add_row({{0, 1.0}, {1, 1.0}}, RowSense::Equal, 2.0);
  lp.add_row({{0, 2.0}, {1, 2.0}}, RowSense::Equal, 4.0);
  auto r = simplex_solve(lp);
  ASSERT_EQ(r.status, LpStatus::Optimal);
  EXPECT_NEAR(r.objective, 2.0, 1e-12);
}

// Enumerates every 0/1 point; returns +inf when none is feasible.
double enumerate_binary(const LpProblem& lp) {
  const std::size_t n = lp.num_vars();
  double best = kInf;
  for (std::size_t mask = 0; mask < (std::size_t{1} << n); ++mask) {
    bool ok = true;
    for (const auto& r : lp.rows) {
      double lhs = 0.0;
      for (auto [v, a] : r.coeffs) lhs += a * static_cast<double>((mask >> v) & 1);
      if ((r.sense == RowSense::LessEqual && lhs > r.rhs + 1e-12) ||
          (r.sense == RowSense::GreaterEqual && lhs < r.rhs - 1e-12) ||
          (r.sense == RowSense::Equal && std::abs(lhs - r.rhs) > 1e-12))
        ok = false;
    }
    if (!ok) continue;
    double z = 0.0;
    for (std::size_t v = 0; v < n; ++v) z += lp.objective[v] * static_cast<double>((mask >> v) & 1);
    best = std::min(best, z);
  }
  return best;
}

TEST(BranchAndCut, FractionalRootsReachIntegerOptimum) {
  for (auto& m : oracle::hand_mips()) {
    auto res = solve_mip(m.lp);
    ASSERT_EQ(res.status, MipStatus::Optimal) << m.name;
    EXPECT_FALSE(res.root_integral) << m.name;
    EXPECT_NEAR(res.root.objective, m.root, 1e-9) << m.name;
    EXPECT_NEAR(res.objective, m.optimum, 1e-9) << m.name;
    EXPECT_GT(res.node_count, 1u) << m.name;
    EXPECT_TRUE(is_integral(res.x, m.lp.integer, 1e-9)) << m.name;
  }
}

TEST(BranchAndCut, RandomBinaryProgramsMatchEnumeration) {
  std::mt19937_64 rng(31);
  std::uniform_int_distribution<int> coef(-3, 6);
  int fractional = 0;
  for (int t = 0; t < 150; ++t) {
    LpProblem lp;
    const std::size_t n = 2 + rng() % 7;
    for (std::size_t v = 0; v < n; ++v) lp.add_variable(-static_cast<double>(1 + rng() % 9), 0.0, 1.0, true);
    const std::size_t rows = 1 + rng() % 3;
    for (std::size_t r = 0; r < rows; ++r) {
      std::vector<std::pair<std::size_t, double>> c;
      double total = 0.0;
      for (std::size_t v = 0; v < n; ++v) {
        const double a = coef(rng);
        if (a != 0.0) c.emplace_back(v, a);
        total += std::max(a, 0.0);
      }
      lp.add_row(std::move(c), RowSense::LessEqual, std::floor(total / 2.0) + 0.5);
    }
    const double want = enumerate_binary(lp);
    auto res = solve_mip(lp);
    ASSERT_EQ(res.status, MipStatus::Optimal);
    EXPECT_NEAR(res.objective, want, 1e-9) << "trial " << t;
    fractional += !res.root_integral;
  }
  EXPECT_GT(fractional, 20);
}

TEST(BranchAndCut, InfeasibleAndNodeBudget) {
  LpProblem lp;
  lp.add_variable(1.0, 0.0, 1.0, true);
  lp.add_variable(1.0, 0.0, 1.0, true);
  lp.add_row({{0, 2.0}, {1, 2.0}}, RowSense::Equal, 1.0);
  EXPECT_EQ(solve_mip(lp).status, MipStatus::Infeasible);

  auto knap = oracle::hand_mips()[1].lp;
  BranchAndCutOptions opt;
  opt.node_budget = 1;
  auto res = solve_mip(knap, opt);
  EXPECT_EQ(res.status, MipStatus::NodeLimit);
  EXPECT_EQ(res.node_count, 1u);
}

TEST(BranchAndCut, CutHookIsApplied) {
  // Triangle matching with the odd-set cut x0 + x1 + x2 <= 1 closes the gap at the root.
  auto m = oracle::hand_mips()[4];
  std::size_t calls = 0;
  BranchAndCutOptions opt;
  opt.cuts = [&](std::span<const double> x) -> std::vector<LpRow> {
    ++calls;
    if (x[0] + x[1] + x[2] <= 1.0 + 1e-9) return {};
    return {LpRow{{{0, 1.0}, {1, 1.0}, {2, 1.0}}, RowSense::LessEqual, 1.0}};
  };
  auto res = solve_mip(m.lp, opt);
  ASSERT_EQ(res.status, MipStatus::Optimal);
  EXPECT_NEAR(res.objective, -1.0, 1e-9);
  EXPECT_EQ(res.node_count, 1u);
  EXPECT_GE(calls, 2u);
}

TEST(BranchAndCut, BlandOnlyAgrees) {
  SimplexOptions bland;
  bland.bland_only = true;
  for (auto& m : oracle::hand_mips()) EXPECT_NEAR(solve_mip(m.lp, {}, bland).objective, m.optimum, 1e-9) << m.name;
}

// Reads back the subset of free MPS that write_mps emits.
LpProblem parse_mps(const std::string& text) {
  std::istringstream in(text);
  std::string line, section;
  LpProblem lp;
  std::map<std::string, std::size_t> rows, cols;
  bool integer = false;
  auto col = [&](const std::string& name) {
    auto [it, fresh] = cols.emplace(name, lp.num_vars());
    if (fresh) lp.add_variable(0.0, 0.0, kInf, integer);
    return it->second;
  };
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::vector<std::string> tok;
    for (std::string t; ls >> t;) tok.push_back(t);
    if (tok.empty()) continue;
    if (line[0] != ' ') {
      section = tok[0];
      continue;
    }
    if (section == "ROWS" && tok[0] != "N") {
      rows[tok[1]] = lp.rows.size();
      lp.add_row({}, tok[0] == "E" ? RowSense::Equal : tok[0] == "L" ? RowSense::LessEqual : RowSense::GreaterEqual,
                 0.0);
    } else if (section == "COLUMNS") {
      if (tok[1] == "'MARKER'") {
        integer = tok[2] == "'INTORG'";
        continue;
      }
      const auto v = col(tok[0]);
      if (tok[1] == "obj") lp.objective[v] = std::stod(tok[2]);
      else lp.rows[rows.at(tok[1])].coeffs.emplace_back(v, std::stod(tok[2]));
    } else if (section == "RHS") {
      lp.rows[rows.at(tok[1])].rhs = std::stod(tok[2]);
    } else if (section == "BOUNDS") {
      const auto v = cols.at(tok[2]);
      (tok[0] == "LO" ? lp.lower : lp.upper)[v] = std::stod(tok[3]);
    }
  }
  return lp;
}

TEST(Mps, ExportReproducesTheProblem) {
  for (auto& m : oracle::hand_mips()) {
    std::ostringstream out;
    write_mps(out, m.lp, "T");
    const auto text = out.str();
    EXPECT_NE(text.find("ROWS"), std::string::npos);
    EXPECT_NE(text.find("ENDATA"), std::string::npos);
    auto back = parse_mps(text);
    EXPECT_EQ(back.num_vars(), m.lp.num_vars());
    EXPECT_EQ(back.integer, m.lp.integer);
    EXPECT_NEAR(simplex_solve(back).objective, m.root, 1e-6) << m.name;
    EXPECT_NEAR(solve_mip(back).objective, m.optimum, 1e-6) << m.name;
  }
}

}  // namespace
}  // namespace sotead
