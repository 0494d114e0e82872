#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <limits>
#include <queue>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "sotead/branch_and_cut.hpp"
#include "sotead/cost.hpp"
#include "sotead/error.hpp"
#include "sotead/io.hpp"
#include "sotead/lp.hpp"

namespace sotead {

// Semi-constraint transport: one binary per sparse entry, one per KG1 entity
// for its virtual arc (i -> v_0), one per KG2 entity for (u_0 -> j). There is
// no (u_0, v_0) variable.
class SotInstance {
 public:
  SotInstance(SparseCostMatrix cost, VirtualCosts vc) : cost_(std::move(cost)), vc_(vc) { vc_.validate(); }

  const SparseCostMatrix& cost() const { return cost_; }
  const VirtualCosts& virtual_costs() const { return vc_; }
  std::size_t rows() const { return cost_.rows(); }
  std::size_t cols() const { return cost_.cols(); }

  std::size_t num_variables() const { return cost_.nnz() + rows() + cols(); }
  std::size_t num_constraints() const { return rows() + cols(); }
  std::size_t entry_var(std::size_t k) const { return k; }
  std::size_t row_virtual_var(std::size_t i) const { return cost_.nnz() + i; }
  std::size_t col_virtual_var(std::size_t j) const { return cost_.nnz() + rows() + j; }

  // Row i: psi_{i,0} + sum_j psi_ij = 1. Column j: psi_{0,j} + sum_i psi_ij = 1.
  LpProblem to_lp() const {
    LpProblem lp;
    const double inf = std::numeric_limits<double>::infinity();
    for (const auto& e : cost_.entries()) lp.add_variable(e.cost, 0.0, inf, true);
    for (std::size_t i = 0; i < rows(); ++i) lp.add_variable(vc_.beta, 0.0, inf, true);
    for (std::size_t j = 0; j < cols(); ++j) lp.add_variable(vc_.alpha, 0.0, inf, true);
    for (std::size_t i = 0; i < rows(); ++i) {
      std::vector<std::pair<std::size_t, double>> c{{row_virtual_var(i), 1.0}};
      for (auto k : cost_.row(i)) c.emplace_back(entry_var(k), 1.0);
      lp.add_row(std::move(c), RowSense::Equal, 1.0);
    }
    for (std::size_t j = 0; j < cols(); ++j) {
      std::vector<std::pair<std::size_t, double>> c{{col_virtual_var(j), 1.0}};
      for (auto k : cost_.col(j)) c.emplace_back(entry_var(k), 1.0);
      lp.add_row(std::move(c), RowSense::Equal, 1.0);
    }
    return lp;
  }

  SotInstance scaled(double s) const {
    return SotInstance(cost_.scaled(s), {vc_.alpha * s, vc_.beta * s});
  }

 private:
  SparseCostMatrix cost_;
  VirtualCosts vc_;
};

inline SotInstance build_instance(SparseCostMatrix c, VirtualCosts vc) {
  return SotInstance(std::move(c), vc);
}

struct AssignmentSolution {
  std::vector<EntityPair> matched;  // sorted by source id
  std::vector<EntityId> dangling1;  // KG1 entities sent to v_0
  std::vector<EntityId> dangling2;  // KG2 entities sent to u_0
  double objective = 0.0;
  std::size_t node_count = 0;
  MipStatus status = MipStatus::Optimal;
  bool root_integral = false;
};

// Sum of matched costs plus beta per KG1 dangling and alpha per KG2 dangling.
inline double assignment_objective(const SparseCostMatrix& c, VirtualCosts vc,
                                   const AssignmentSolution& s) {
  double obj = 0.0;
  for (auto [i, j] : s.matched) {
    auto v = c.find(i, j);
    if (!v) throw ReferenceError(std::to_string(i) + "," + std::to_string(j), "matched pair has no cost entry");
    obj += *v;
  }
  return obj + vc.beta * static_cast<double>(s.dangling1.size()) +
         vc.alpha * static_cast<double>(s.dangling2.size());
}

// Reads the decision out of a 0/1 point of instance.to_lp().
inline AssignmentSolution decode_solution(const SotInstance& inst, std::span<const double> x) {
  AssignmentSolution s;
  const auto& c = inst.cost();
  for (std::size_t k = 0; k < c.nnz(); ++k)
    if (x[inst.entry_var(k)] > 0.5) s.matched.emplace_back(c.entries()[k].i, c.entries()[k].j);
  for (std::size_t i = 0; i < inst.rows(); ++i)
    if (x[inst.row_virtual_var(i)] > 0.5) s.dangling1.push_back(static_cast<EntityId>(i));
  for (std::size_t j = 0; j < inst.cols(); ++j)
    if (x[inst.col_virtual_var(j)] > 0.5) s.dangling2.push_back(static_cast<EntityId>(j));
  s.objective = assignment_objective(c, inst.virtual_costs(), s);
  return s;
}

// True when every KG1 id appears exactly once in matched or dangling1 and every
// KG2 id exactly once in matched or dangling2.
inline bool satisfies_partition(const AssignmentSolution& s, std::size_t m, std::size_t n) {
  std::vector<int> a(m, 0), b(n, 0);
  for (auto [i, j] : s.matched) {
    if (i < 0 || static_cast<std::size_t>(i) >= m || j < 0 || static_cast<std::size_t>(j) >= n) return false;
    ++a[static_cast<std::size_t>(i)];
    ++b[static_cast<std::size_t>(j)];
  }
  for (auto i : s.dangling1) {
    if (i < 0 || static_cast<std::size_t>(i) >= m) return false;
    ++a[static_cast<std::size_t>(i)];
  }
  for (auto j : s.dangling2) {
    if (j < 0 || static_cast<std::size_t>(j) >= n) return false;
    ++b[static_cast<std::size_t>(j)];
  }
  return std::all_of(a.begin(), a.end(), [](int v) { return v == 1; }) &&
         std::all_of(b.begin(), b.end(), [](int v) { return v == 1; });
}

// LP relaxation of a SotInstance solved as a min-cost flow by successive
// shortest paths. Equivalent to a network simplex on the same polytope and
// returns an integral vertex. Bounds are read as binary fixings.
class NetworkRelaxation {
 public:
  explicit NetworkRelaxation(const SotInstance& inst) : inst_(&inst) {}

  LpResult solve(std::span<const double> lo, std::span<const double> hi) const {
    const auto& c = inst_->cost();
    const std::size_t m = inst_->rows(), n = inst_->cols();
    const auto vc = inst_->virtual_costs();
    LpResult res;
    res.x.assign(inst_->num_variables(), 0.0);

    // Per-entity state: 0 free, 1 forced to its virtual arc, 2 must match.
    std::vector<int> row_state(m, 0), col_state(n, 0);
    std::vector<std::ptrdiff_t> row_forced(m, -1), col_forced(n, -1);
    for (std::size_t i = 0; i < m; ++i) {
      const auto v = inst_->row_virtual_var(i);
      if (lo[v] > hi[v] + 1e-9 || lo[v] > 1.5) return res;
      if (lo[v] > 0.5) row_state[i] = 1;
      else if (hi[v] < 0.5) row_state[i] = 2;
    }
    for (std::size_t j = 0; j < n; ++j) {
      const auto v = inst_->col_virtual_var(j);
      if (lo[v] > hi[v] + 1e-9 || lo[v] > 1.5) return res;
      if (lo[v] > 0.5) col_state[j] = 1;
      else if (hi[v] < 0.5) col_state[j] = 2;
    }
    for (std::size_t k = 0; k < c.nnz(); ++k) {
      if (lo[k] > hi[k] + 1e-9 || lo[k] > 1.5) return res;
      if (lo[k] <= 0.5) continue;
      const auto i = static_cast<std::size_t>(c.entries()[k].i);
      const auto j = static_cast<std::size_t>(c.entries()[k].j);
      if (row_forced[i] >= 0 || col_forced[j] >= 0 || row_state[i] == 1 || col_state[j] == 1) return res;
      row_forced[i] = col_forced[j] = static_cast<std::ptrdiff_t>(k);
    }

    // Penalty standing in for a forbidden virtual arc.
    double big = 1.0 + vc.alpha + vc.beta;
    for (const auto& e : c.entries()) big += e.cost;
    auto row_virtual = [&](std::size_t i) { return row_state[i] == 2 ? big : vc.beta; };
    auto col_virtual = [&](std::size_t j) { return col_state[j] == 2 ? big : vc.alpha; };
    auto row_free = [&](std::size_t i) { return row_state[i] != 1 && row_forced[i] < 0; };
    auto col_free = [&](std::size_t j) { return col_state[j] != 1 && col_forced[j] < 0; };

    // Nodes: source 0, rows 1..m, columns m+1..m+n, sink m+n+1.
    const std::size_t source = 0, sink = m + n + 1, nodes = m + n + 2;
    struct Arc {
      std::size_t to;
      int cap;
      double cost;
      std::size_t rev;
      std::ptrdiff_t entry;
    };
    std::vector<std::vector<Arc>> g(nodes);
    auto add = [&](std::size_t a, std::size_t b, double cost, std::ptrdiff_t entry) {
      g[a].push_back({b, 1, cost, g[b].size(), entry});
      g[b].push_back({a, 0, -cost, g[a].size() - 1, -1});
    };
    for (std::size_t i = 0; i < m; ++i)
      if (row_free(i)) add(source, 1 + i, 0.0, -1);
    for (std::size_t j = 0; j < n; ++j)
      if (col_free(j)) add(1 + m + j, sink, 0.0, -1);
    for (std::size_t k = 0; k < c.nnz(); ++k) {
      if (hi[k] < 0.5) continue;
      const auto i = static_cast<std::size_t>(c.entries()[k].i);
      const auto j = static_cast<std::size_t>(c.entries()[k].j);
      if (!row_free(i) || !col_free(j)) continue;
      add(1 + i, 1 + m + j, c.entries()[k].cost - row_virtual(i) - col_virtual(j),
          static_cast<std::ptrdiff_t>(k));
    }

    constexpr double inf = std::numeric_limits<double>::infinity();
    std::vector<double> pot(nodes, 0.0);
    for (std::size_t i = 0; i < m; ++i)
      for (const auto& a : g[1 + i])
        if (a.cap > 0) pot[a.to] = std::min(pot[a.to], a.cost);
    for (std::size_t j = 0; j < n; ++j) pot[sink] = std::min(pot[sink], pot[1 + m + j]);

    std::vector<double> dist(nodes);
    std::vector<std::size_t> prev_node(nodes), prev_arc(nodes);
    using Item = std::pair<double, std::size_t>;
    while (true) {
      std::fill(dist.begin(), dist.end(), inf);
      dist[source] = 0.0;
      std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
      pq.push({0.0, source});
      while (!pq.empty()) {
        auto [d, u] = pq.top();
        pq.pop();
        if (d > dist[u]) continue;
        for (std::size_t ai = 0; ai < g[u].size(); ++ai) {
          const auto& a = g[u][ai];
          if (a.cap <= 0) continue;
          const double nd = d + std::max(0.0, a.cost + pot[u] - pot[a.to]);
          if (nd < dist[a.to]) {
            dist[a.to] = nd;
            prev_node[a.to] = u;
            prev_arc[a.to] = ai;
            pq.push({nd, a.to});
          }
        }
      }
      if (dist[sink] == inf) break;
      double path_cost = 0.0;
      for (std::size_t v = sink; v != source; v = prev_node[v]) path_cost += g[prev_node[v]][prev_arc[v]].cost;
      if (path_cost >= -1e-12) break;
      for (std::size_t v = sink; v != source; v = prev_node[v]) {
        auto& a = g[prev_node[v]][prev_arc[v]];
        a.cap -= 1;
        g[v][a.rev].cap += 1;
      }
      for (std::size_t v = 0; v < nodes; ++v) pot[v] += std::min(dist[v], dist[sink]);
    }

    std::vector<bool> row_done(m, false), col_done(n, false);
    for (std::size_t i = 0; i < m; ++i) {
      if (row_forced[i] >= 0) {
        res.x[static_cast<std::size_t>(row_forced[i])] = 1.0;
        row_done[i] = true;
        col_done[static_cast<std::size_t>(c.entries()[static_cast<std::size_t>(row_forced[i])].j)] = true;
      }
      for (const auto& a : g[1 + i])
        if (a.entry >= 0 && a.cap == 0) {
          res.x[static_cast<std::size_t>(a.entry)] = 1.0;
          row_done[i] = true;
          col_done[a.to - 1 - m] = true;
        }
    }
    for (std::size_t i = 0; i < m; ++i)
      if (!row_done[i]) {
        if (row_state[i] == 2) return res;
        res.x[inst_->row_virtual_var(i)] = 1.0;
      }
    for (std::size_t j = 0; j < n; ++j)
      if (!col_done[j]) {
        if (col_state[j] == 2) return res;
        res.x[inst_->col_virtual_var(j)] = 1.0;
      }

    const auto lp_cost = [&](std::size_t v) {
      if (v < c.nnz()) return c.entries()[v].cost;
      return v < c.nnz() + m ? vc.beta : vc.alpha;
    };
    res.objective = 0.0;
    for (std::size_t v = 0; v < res.x.size(); ++v)
      if (res.x[v] != 0.0) res.objective += lp_cost(v) * res.x[v];
    res.status = LpStatus::Optimal;
    return res;
  }

 private:
  const SotInstance* inst_;
};

enum class SolverBackend { Auto, Simplex, Network };

struct SotSolveOptions {
  SolverBackend backend = SolverBackend::Auto;
  // Auto uses the dense simplex while rows * columns of its tableau stay below this.
  std::size_t simplex_cell_limit = 400'000;
  BranchAndCutOptions branching;
  SimplexOptions simplex;
};

inline SolverBackend resolve_backend(const SotInstance& inst, const SotSolveOptions& opt) {
  if (opt.backend != SolverBackend::Auto) return opt.backend;
  const std::size_t rows = inst.num_constraints(), cols = inst.num_variables() + rows;
  return rows * cols <= opt.simplex_cell_limit ? SolverBackend::Simplex : SolverBackend::Network;
}

// Optimal integral solution by LP-based branch-and-cut.
inline AssignmentSolution branch_and_cut(const SotInstance& inst, const SotSolveOptions& opt = {}) {
  const auto lp = inst.to_lp();
  MipResult mip;
  if (resolve_backend(inst, opt) == SolverBackend::Simplex) {
    SimplexRelaxation relax(lp, opt.simplex);
    mip = branch_and_cut(relax, lp.lower, lp.upper, lp.integer, opt.branching);
  } else {
    NetworkRelaxation relax(inst);
    mip = branch_and_cut(relax, lp.lower, lp.upper, lp.integer, opt.branching);
  }
  if (mip.x.empty()) {
    if (mip.status == MipStatus::NodeLimit) {
      AssignmentSolution s;
      s.status = MipStatus::NodeLimit;
      s.node_count = mip.node_count;
      return s;
    }
    // Virtual arcs make every instance feasible.
    throw Error(std::string("semi-constraint OT solve failed: ") + to_string(mip.status));
  }
  auto s = decode_solution(inst, mip.x);
  s.node_count = mip.node_count;
  s.status = mip.status;
  s.root_integral = mip.root_integral;
  return s;
}

inline constexpr std::size_t kBruteForceLimit = 8;

// Exhaustive enumeration of partial injective matchings; absent entries are
// +inf in `dense`. Intended as a test oracle for m, n <= 8.
inline AssignmentSolution brute_force_oracle(const Matrix& dense, VirtualCosts vc) {
  const std::size_t m = dense.rows(), n = dense.cols();
  if (m > kBruteForceLimit || n > kBruteForceLimit)
    throw ConfigError("brute_force_oracle is limited to " + std::to_string(kBruteForceLimit) +
                      " entities per side");
  std::vector<std::ptrdiff_t> assign(m, -1), best_assign(m, -1);
  std::vector<bool> used(n, false);
  double best = std::numeric_limits<double>::infinity();
  std::function<void(std::size_t, double, std::size_t)> rec = [&](std::size_t i, double acc, std::size_t n_used) {
    if (i == m) {
      const double total = acc + vc.alpha * static_cast<double>(n - n_used);
      if (total < best) {
        best = total;
        best_assign = assign;
      }
      return;
    }
    assign[i] = -1;
    rec(i + 1, acc + vc.beta, n_used);
    for (std::size_t j = 0; j < n; ++j) {
      if (used[j] || !std::isfinite(dense(i, j))) continue;
      used[j] = true;
      assign[i] = static_cast<std::ptrdiff_t>(j);
      rec(i + 1, acc + dense(i, j), n_used + 1);
      used[j] = false;
    }
    assign[i] = -1;
  };
  rec(0, 0.0, 0);

  AssignmentSolution s;
  std::vector<bool> taken(n, false);
  double obj = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    if (best_assign[i] < 0) {
      s.dangling1.push_back(static_cast<EntityId>(i));
      obj += vc.beta;
    } else {
      s.matched.emplace_back(static_cast<EntityId>(i), static_cast<EntityId>(best_assign[i]));
      taken[static_cast<std::size_t>(best_assign[i])] = true;
      obj += dense(i, static_cast<std::size_t>(best_assign[i]));
    }
  }
  for (std::size_t j = 0; j < n; ++j)
    if (!taken[j]) {
      s.dangling2.push_back(static_cast<EntityId>(j));
      obj += vc.alpha;
    }
  s.objective = obj;
  s.root_integral = true;
  return s;
}

// Nearest-neighbour baseline: every KG1 entity takes its cheapest present
// entry, with no injectivity and no virtual option. Rows without entries are
// listed in dangling1; dangling2 holds the columns nobody chose. `objective`
// is the sum of the chosen costs.
inline AssignmentSolution greedy_match(const SparseCostMatrix& c) {
  AssignmentSolution s;
  std::vector<bool> chosen(c.cols(), false);
  s.objective = 0.0;
  for (std::size_t i = 0; i < c.rows(); ++i) {
    const CostEntry* best = nullptr;
    for (auto k : c.row(i)) {
      const auto& e = c.entries()[k];
      if (!best || e.cost < best->cost) best = &e;  // row entries are sorted by j
    }
    if (!best) {
      s.dangling1.push_back(static_cast<EntityId>(i));
      continue;
    }
    s.matched.emplace_back(best->i, best->j);
    chosen[static_cast<std::size_t>(best->j)] = true;
    s.objective += best->cost;
  }
  for (std::size_t j = 0; j < c.cols(); ++j)
    if (!chosen[j]) s.dangling2.push_back(static_cast<EntityId>(j));
  s.status = MipStatus::Optimal;
  return s;
}

// Gale-Shapley with KG1 proposing; both sides rank present entries by
// ascending cost (ties: smaller id). Unmatched entities go to the dangling
// lists; `objective` is the sum of matched costs.
inline AssignmentSolution daa_match(const SparseCostMatrix& c) {
  const std::size_t m = c.rows(), n = c.cols();
  std::vector<std::vector<std::size_t>> prefs(m);  // entry indices, best first
  for (std::size_t i = 0; i < m; ++i) {
    prefs[i] = c.row(i);
    std::stable_sort(prefs[i].begin(), prefs[i].end(), [&](std::size_t a, std::size_t b) {
      return c.entries()[a].cost < c.entries()[b].cost;
    });
  }
  auto col_prefers = [&](std::size_t cand, std::size_t held) {
    const auto& a = c.entries()[cand];
    const auto& b = c.entries()[held];
    return a.cost < b.cost || (a.cost == b.cost && a.i < b.i);
  };
  std::vector<std::size_t> next(m, 0);
  std::vector<std::ptrdiff_t> holder(n, -1);  // entry index held by column j
  std::vector<std::size_t> free_rows;
  for (std::size_t i = m; i-- > 0;) free_rows.push_back(i);
  while (!free_rows.empty()) {
    const auto i = free_rows.back();
    free_rows.pop_back();
    if (next[i] >= prefs[i].size()) continue;
    const auto k = prefs[i][next[i]++];
    const auto j = static_cast<std::size_t>(c.entries()[k].j);
    if (holder[j] < 0) {
      holder[j] = static_cast<std::ptrdiff_t>(k);
    } else if (col_prefers(k, static_cast<std::size_t>(holder[j]))) {
      free_rows.push_back(static_cast<std::size_t>(c.entries()[static_cast<std::size_t>(holder[j])].i));
      holder[j] = static_cast<std::ptrdiff_t>(k);
    } else {
      free_rows.push_back(i);
    }
  }
  AssignmentSolution s;
  std::vector<bool> row_matched(m, false);
  s.objective = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    if (holder[j] < 0) {
      s.dangling2.push_back(static_cast<EntityId>(j));
      continue;
    }
    const auto& e = c.entries()[static_cast<std::size_t>(holder[j])];
    s.matched.emplace_back(e.i, e.j);
    row_matched[static_cast<std::size_t>(e.i)] = true;
    s.objective += e.cost;
  }
  std::sort(s.matched.begin(), s.matched.end());
  for (std::size_t i = 0; i < m; ++i)
    if (!row_matched[i]) s.dangling1.push_back(static_cast<EntityId>(i));
  return s;
}

inline nlohmann::json solution_to_json(const AssignmentSolution& s) {
  nlohmann::json j;
  j["matched"] = nlohmann::json::array();
  for (auto [a, b] : s.matched) j["matched"].push_back({a, b});
  j["dangling1"] = s.dangling1;
  j["dangling2"] = s.dangling2;
  j["objective"] = s.objective;
  j["node_count"] = s.node_count;
  j["status"] = to_string(s.status);
  return j;
}

inline AssignmentSolution solution_from_json(const nlohmann::json& j) {
  AssignmentSolution s;
  for (const auto& p : j.at("matched")) s.matched.emplace_back(p.at(0).get<EntityId>(), p.at(1).get<EntityId>());
  s.dangling1 = j.at("dangling1").get<std::vector<EntityId>>();
  s.dangling2 = j.at("dangling2").get<std::vector<EntityId>>();
  s.objective = j.at("objective").get<double>();
  s.node_count = j.value("node_count", std::size_t{0});
  const auto st = j.value("status", std::string("optimal"));
  s.status = st == "optimal" ? MipStatus::Optimal
             : st == "node_limit" ? MipStatus::NodeLimit
             : st == "unbounded" ? MipStatus::Unbounded : MipStatus::Infeasible;
  return s;
}

inline void write_solution(const std::filesystem::path& path, const AssignmentSolution& s) {
  io::open_out(path) << solution_to_json(s).dump(2) << '\n';
}

inline AssignmentSolution read_solution(const std::filesystem::path& path) {
  try {
    return solution_from_json(nlohmann::json::parse(io::read_file(path)));
  } catch (const nlohmann::json::exception& ex) {
    throw ParseError(path.string(), 0, ex.what());
  }
}

}  // namespace sotead
