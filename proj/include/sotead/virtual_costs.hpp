#pragma once

#include <atomic>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "sotead/cost.hpp"
#include "sotead/sot.hpp"

namespace sotead {

// Mid-quantile levels (k + 0.5) / grid_size, k = 0 .. grid_size - 1.
inline std::vector<double> quantile_levels(std::size_t grid_size) {
  std::vector<double> levels(grid_size);
  for (std::size_t k = 0; k < grid_size; ++k)
    levels[k] = (static_cast<double>(k) + 0.5) / static_cast<double>(grid_size);
  return levels;
}

// Fraction of anchors (i, j) for which the solution matches i to j.
inline double anchor_hits(const AssignmentSolution& s, std::span<const EntityPair> anchors) {
  if (anchors.empty()) return 0.0;
  std::vector<EntityPair> sorted(s.matched);
  std::sort(sorted.begin(), sorted.end());
  std::size_t hit = 0;
  for (const auto& a : anchors)
    if (std::binary_search(sorted.begin(), sorted.end(), a)) ++hit;
  return static_cast<double>(hit) / static_cast<double>(anchors.size());
}

struct GridCell {
  std::size_t alpha_index = 0;
  std::size_t beta_index = 0;
  VirtualCosts costs;
  double hits = 0.0;  // Hits@1 on the anchors
};

struct GridSearchResult {
  VirtualCosts chosen;
  std::vector<double> alpha_candidates;  // quantiles of the column minima
  std::vector<double> beta_candidates;   // quantiles of the row minima
  std::vector<GridCell> cells;           // alpha-major
  std::size_t chosen_index = 0;
  bool fallback = false;
  std::vector<std::string> warnings;
};

struct GridSearchOptions {
  std::size_t grid_size = 10;
  std::size_t threads = 1;
  SotSolveOptions solver;
};

// Solves the transport for every (alpha, beta) pair of profile quantiles and
// keeps the pair with the best Hits@1 on the anchors. Ties go to the larger
// alpha, then the larger beta.
inline GridSearchResult grid_search_virtual_costs(const SparseCostMatrix& c,
                                                  std::span<const EntityPair> anchors,
                                                  const GridSearchOptions& opt = {}) {
  if (opt.grid_size == 0) throw ConfigError("grid_size must be >= 1");
  const auto prof = min_cost_profiles(c);
  std::vector<double> finite_cols, finite_rows;
  for (double v : prof.col_min)
    if (std::isfinite(v)) finite_cols.push_back(v);
  for (double v : prof.row_min)
    if (std::isfinite(v)) finite_rows.push_back(v);
  if (finite_cols.empty() || finite_rows.empty())
    throw Error("grid search needs a cost matrix with at least one entry");

  GridSearchResult res;
  const auto levels = quantile_levels(opt.grid_size);
  for (double q : levels) {
    res.alpha_candidates.push_back(quantile(finite_cols, q));
    res.beta_candidates.push_back(quantile(finite_rows, q));
  }

  if (anchors.empty()) {
    res.fallback = true;
    res.chosen = {quantile(finite_cols, 0.5), quantile(finite_rows, 0.5)};
    res.warnings.push_back("no pseudo pairs; using the median quantile for alpha and beta");
    return res;
  }

  for (std::size_t a = 0; a < opt.grid_size; ++a)
    for (std::size_t b = 0; b < opt.grid_size; ++b)
      res.cells.push_back({a, b, {res.alpha_candidates[a], res.beta_candidates[b]}, 0.0});

  auto evaluate = [&](GridCell& cell) {
    const auto sol = branch_and_cut(SotInstance(c, cell.costs), opt.solver);
    cell.hits = anchor_hits(sol, anchors);
  };
  const std::size_t workers = std::max<std::size_t>(1, std::min(opt.threads, res.cells.size()));
  if (workers == 1) {
    for (auto& cell : res.cells) evaluate(cell);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (std::size_t k; (k = next.fetch_add(1)) < res.cells.size();) evaluate(res.cells[k]);
      });
    for (auto& t : pool) t.join();
  }

  std::size_t best = 0;
  for (std::size_t k = 1; k < res.cells.size(); ++k) {
    const auto& x = res.cells[k];
    const auto& y = res.cells[best];
    if (x.hits != y.hits) {
      if (x.hits > y.hits) best = k;
      continue;
    }
    if (x.costs.alpha != y.costs.alpha) {
      if (x.costs.alpha > y.costs.alpha) best = k;
      continue;
    }
    if (x.costs.beta > y.costs.beta) best = k;
  }
  res.chosen_index = best;
  res.chosen = res.cells[best].costs;
  return res;
}

}  // namespace sotead
