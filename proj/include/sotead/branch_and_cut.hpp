#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "sotead/lp.hpp"

namespace sotead {

// Anything that can solve the LP relaxation under per-variable bounds.
template <class R>
concept Relaxation = requires(R& r, std::span<const double> lo, std::span<const double> hi) {
  { r.solve(lo, hi) } -> std::same_as<LpResult>;
};

// A relaxation that also accepts globally valid cutting planes.
template <class R>
concept CuttableRelaxation = Relaxation<R> && requires(R& r, std::vector<LpRow> cuts) {
  r.add_cuts(std::move(cuts));
};

// Returns cuts violated by the relaxation point; empty when none are found.
using CutHook = std::function<std::vector<LpRow>(std::span<const double> x)>;

struct BranchAndCutOptions {
  double integrality_tol = 1e-6;
  std::size_t node_budget = 1'000'000;
  std::size_t max_cut_rounds = 20;
  CutHook cuts;  // no-op when empty
};

enum class MipStatus { Optimal, Infeasible, Unbounded, NodeLimit };

inline const char* to_string(MipStatus s) {
  switch (s) {
    case MipStatus::Optimal: return "optimal";
    case MipStatus::Infeasible: return "infeasible";
    case MipStatus::Unbounded: return "unbounded";
    case MipStatus::NodeLimit: return "node_limit";
  }
  return "?";
}

// An active subproblem: the parent's bounds tightened on one variable.
struct MipNode {
  std::size_t id = 0;
  std::optional<std::size_t> parent;
  std::size_t depth = 0;
  double lower_bound = -std::numeric_limits<double>::infinity();
  std::optional<std::size_t> branch_var;
  double branch_value = 0.0;  // new lower bound (up branch) or upper bound (down branch)
  std::vector<double> lower, upper;
};

struct MipResult {
  MipStatus status = MipStatus::Infeasible;
  double objective = std::numeric_limits<double>::infinity();
  std::vector<double> x;
  std::size_t node_count = 0;
  LpResult root;
  bool root_integral = false;
};

// Rounds integer-flagged values within `tol` of an integer; returns false if
// any of them is fractional.
inline bool is_integral(std::span<const double> x, const std::vector<bool>& integer, double tol) {
  for (std::size_t k = 0; k < x.size(); ++k)
    if (integer[k] && std::abs(x[k] - std::round(x[k])) > tol) return false;
  return true;
}

// LP-based branch-and-cut over an active node list. Each node solves its
// relaxation, is fathomed against the incumbent, accepted when integral, and
// otherwise split on its most fractional variable (ties: lowest index). Node
// selection is depth-first with the best bound breaking ties.
template <Relaxation R>
MipResult branch_and_cut(R& relax, const std::vector<double>& lower, const std::vector<double>& upper,
                         const std::vector<bool>& integer, const BranchAndCutOptions& opt = {}) {
  MipResult out;
  double incumbent = std::numeric_limits<double>::infinity();
  std::vector<MipNode> active;
  active.push_back({0, std::nullopt, 0, -std::numeric_limits<double>::infinity(), std::nullopt, 0.0,
                    lower, upper});
  std::size_t next_id = 1;

  auto prune_tol = [](double z) { return 1e-9 * std::max(1.0, std::abs(z)); };

  while (!active.empty()) {
    if (out.node_count >= opt.node_budget) {
      out.status = MipStatus::NodeLimit;  // x holds the best incumbent, if any
      out.objective = incumbent;
      return out;
    }
    auto pick = std::max_element(active.begin(), active.end(), [](const MipNode& a, const MipNode& b) {
      if (a.depth != b.depth) return a.depth < b.depth;
      if (a.lower_bound != b.lower_bound) return a.lower_bound > b.lower_bound;
      return a.id < b.id;
    });
    MipNode node = std::move(*pick);
    active.erase(pick);
    ++out.node_count;

    LpResult lp = relax.solve(node.lower, node.upper);
    if constexpr (CuttableRelaxation<R>) {
      for (std::size_t round = 0; opt.cuts && lp.status == LpStatus::Optimal &&
                                  round < opt.max_cut_rounds; ++round) {
        auto cuts = opt.cuts(lp.x);
        if (cuts.empty()) break;
        relax.add_cuts(std::move(cuts));
        lp = relax.solve(node.lower, node.upper);
      }
    }
    if (node.id == 0) {
      out.root = lp;
      out.root_integral = lp.status == LpStatus::Optimal && is_integral(lp.x, integer, opt.integrality_tol);
    }
    if (lp.status == LpStatus::Infeasible) continue;
    if (lp.status == LpStatus::Unbounded) {
      out.status = MipStatus::Unbounded;
      return out;
    }
    if (lp.status != LpStatus::Optimal) {
      out.status = MipStatus::NodeLimit;
      return out;
    }

    const double z = lp.objective;
    if (z >= incumbent - prune_tol(incumbent)) continue;

    if (is_integral(lp.x, integer, opt.integrality_tol)) {
      incumbent = z;
      out.x = lp.x;
      for (std::size_t k = 0; k < out.x.size(); ++k)
        if (integer[k]) out.x[k] = std::round(out.x[k]);
      std::erase_if(active, [&](const MipNode& n) { return n.lower_bound >= incumbent; });
      continue;
    }

    std::size_t var = lp.x.size();
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < lp.x.size(); ++k) {
      if (!integer[k]) continue;
      const double frac = lp.x[k] - std::floor(lp.x[k]);
      if (frac <= opt.integrality_tol || frac >= 1.0 - opt.integrality_tol) continue;
      const double score = std::abs(frac - 0.5);
      if (score < best) {
        best = score;
        var = k;
      }
    }
    const double down = std::floor(lp.x[var]);
    MipNode lo_child{next_id++, node.id, node.depth + 1, z, var, down, node.lower, node.upper};
    lo_child.upper[var] = down;
    MipNode hi_child{next_id++, node.id, node.depth + 1, z, var, down + 1.0, node.lower, node.upper};
    hi_child.lower[var] = down + 1.0;
    active.push_back(std::move(lo_child));
    active.push_back(std::move(hi_child));
  }

  if (std::isfinite(incumbent)) {
    out.status = MipStatus::Optimal;
    out.objective = incumbent;
  } else {
    out.status = MipStatus::Infeasible;
  }
  return out;
}

// Relaxation backed by the dense simplex; cuts are appended as extra rows.
class SimplexRelaxation {
 public:
  explicit SimplexRelaxation(LpProblem lp, SimplexOptions opt = {}) : lp_(std::move(lp)), opt_(opt) {}

  LpResult solve(std::span<const double> lo, std::span<const double> hi) {
    return simplex_solve(lp_, lo, hi, opt_);
  }
  void add_cuts(std::vector<LpRow> cuts) {
    for (auto& c : cuts) lp_.rows.push_back(std::move(c));
  }
  const LpProblem& problem() const { return lp_; }

 private:
  LpProblem lp_;
  SimplexOptions opt_;
};

// Solves an LpProblem with integrality flags through the simplex relaxation.
inline MipResult solve_mip(const LpProblem& lp, const BranchAndCutOptions& opt = {},
                           const SimplexOptions& sopt = {}) {
  lp.validate();
  SimplexRelaxation relax(lp, sopt);
  return branch_and_cut(relax, lp.lower, lp.upper, lp.integer, opt);
}

}  // namespace sotead
