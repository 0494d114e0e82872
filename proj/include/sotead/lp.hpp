#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sotead/error.hpp"
#include "sotead/io.hpp"

namespace sotead {

enum class RowSense { LessEqual, Equal, GreaterEqual };

struct LpRow {
  std::vector<std::pair<std::size_t, double>> coeffs;  // (variable, coefficient)
  RowSense sense = RowSense::Equal;
  double rhs = 0.0;
};

// min c^T x  s.t.  rows,  lower <= x <= upper. Lower bounds must be finite.
struct LpProblem {
  std::vector<double> objective;
  std::vector<LpRow> rows;
  std::vector<double> lower;
  std::vector<double> upper;
  std::vector<bool> integer;

  std::size_t num_vars() const { return objective.size(); }

  std::size_t add_variable(double cost, double lo = 0.0,
                           double hi = std::numeric_limits<double>::infinity(), bool is_int = false) {
    objective.push_back(cost);
    lower.push_back(lo);
    upper.push_back(hi);
    integer.push_back(is_int);
    return objective.size() - 1;
  }

  void add_row(std::vector<std::pair<std::size_t, double>> coeffs, RowSense sense, double rhs) {
    rows.push_back({std::move(coeffs), sense, rhs});
  }

  void validate() const {
    const auto n = num_vars();
    if (lower.size() != n || upper.size() != n || integer.size() != n)
      throw ShapeError("LP bound and integrality vectors must match the objective length");
    for (std::size_t k = 0; k < n; ++k)
      if (!std::isfinite(lower[k])) throw ShapeError("LP variables need a finite lower bound");
    for (const auto& r : rows)
      for (auto [v, a] : r.coeffs)
        if (v >= n) throw ShapeError("LP row references variable " + std::to_string(v));
  }
};

enum class LpStatus { Optimal, Infeasible, Unbounded, IterationLimit };

inline const char* to_string(LpStatus s) {
  switch (s) {
    case LpStatus::Optimal: return "optimal";
    case LpStatus::Infeasible: return "infeasible";
    case LpStatus::Unbounded: return "unbounded";
    case LpStatus::IterationLimit: return "iteration_limit";
  }
  return "?";
}

struct LpResult {
  LpStatus status = LpStatus::Infeasible;
  double objective = std::numeric_limits<double>::infinity();
  std::vector<double> x;
  std::size_t iterations = 0;
};

struct SimplexOptions {
  double optimality_tol = 1e-9;   // reduced costs
  double pivot_tol = 1e-9;
  double feasibility_tol = 1e-7;  // phase-1 residual
  // Consecutive degenerate pivots tolerated before switching to Bland's rule.
  std::size_t bland_after = 50;
  bool bland_only = false;
  std::size_t max_iterations = 1'000'000;
};

namespace detail {

// Dense two-phase primal simplex tableau over y >= 0.
class Tableau {
 public:
  Tableau(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), t_((rows + 1) * (cols + 1), 0.0), basis_(rows, 0) {}

  double& at(std::size_t r, std::size_t c) { return t_[r * (cols_ + 1) + c]; }
  double at(std::size_t r, std::size_t c) const { return t_[r * (cols_ + 1) + c]; }
  double& rhs(std::size_t r) { return at(r, cols_); }
  double& cost(std::size_t c) { return at(rows_, c); }  // reduced-cost row
  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::vector<std::size_t>& basis() { return basis_; }

  void pivot(std::size_t pr, std::size_t pc) {
    const double p = at(pr, pc);
    for (std::size_t c = 0; c <= cols_; ++c) at(pr, c) /= p;
    at(pr, pc) = 1.0;
    for (std::size_t r = 0; r <= rows_; ++r) {
      if (r == pr) continue;
      const double f = at(r, pc);
      if (f == 0.0) continue;
      double* dst = &t_[r * (cols_ + 1)];
      const double* src = &t_[pr * (cols_ + 1)];
      for (std::size_t c = 0; c <= cols_; ++c) dst[c] -= f * src[c];
      dst[pc] = 0.0;
    }
    basis_[pr] = pc;
  }

  void drop_row(std::size_t r) {
    const std::size_t w = cols_ + 1;
    t_.erase(t_.begin() + static_cast<std::ptrdiff_t>(r * w),
             t_.begin() + static_cast<std::ptrdiff_t>((r + 1) * w));
    basis_.erase(basis_.begin() + static_cast<std::ptrdiff_t>(r));
    --rows_;
  }

 private:
  std::size_t rows_, cols_;
  std::vector<double> t_;
  std::vector<std::size_t> basis_;
};

enum class PhaseResult { Optimal, Unbounded, IterationLimit };

// Minimizes the objective held in the tableau's cost row.
inline PhaseResult run_phase(Tableau& tab, std::size_t entering_limit, const SimplexOptions& opt,
                             std::size_t& iterations) {
  bool bland = opt.bland_only;
  std::size_t degenerate_run = 0;
  while (true) {
    if (iterations >= opt.max_iterations) return PhaseResult::IterationLimit;
    std::size_t q = entering_limit;
    double best = -opt.optimality_tol;
    for (std::size_t c = 0; c < entering_limit; ++c) {
      const double d = tab.cost(c);
      if (d < best) {
        q = c;
        if (bland) break;
        best = d;
      }
    }
    if (q == entering_limit) return PhaseResult::Optimal;

    std::size_t pr = tab.rows();
    double best_ratio = std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < tab.rows(); ++r) {
      const double a = tab.at(r, q);
      if (a <= opt.pivot_tol) continue;
      const double ratio = std::max(tab.rhs(r), 0.0) / a;
      bool take = false;
      if (pr == tab.rows() || ratio < best_ratio - 1e-12) {
        take = true;
      } else if (ratio <= best_ratio + 1e-12) {
        take = bland ? tab.basis()[r] < tab.basis()[pr] : a > tab.at(pr, q);
      }
      if (take) {
        pr = r;
        best_ratio = ratio;
      }
    }
    if (pr == tab.rows()) return PhaseResult::Unbounded;
    if (best_ratio <= 1e-12) {
      if (++degenerate_run >= opt.bland_after) bland = true;
    } else {
      degenerate_run = 0;
    }
    tab.pivot(pr, q);
    ++iterations;
  }
}

}  // namespace detail

// Solves `lp` with the variable bounds replaced by `lower`/`upper`.
inline LpResult simplex_solve(const LpProblem& lp, std::span<const double> lower,
                              std::span<const double> upper, const SimplexOptions& opt = {}) {
  lp.validate();
  const std::size_t nv = lp.num_vars();
  LpResult res;
  res.x.assign(nv, 0.0);

  // x = lower + y for free columns; fixed columns are folded into the rhs.
  std::vector<std::ptrdiff_t> col_of(nv, -1);
  std::size_t ny = 0;
  for (std::size_t k = 0; k < nv; ++k) {
    if (upper[k] < lower[k] - opt.feasibility_tol) return res;  // infeasible
    if (upper[k] - lower[k] > opt.feasibility_tol) col_of[k] = static_cast<std::ptrdiff_t>(ny++);
  }

  struct Row {
    std::vector<std::pair<std::size_t, double>> coeffs;  // over y
    RowSense sense;
    double rhs;
  };
  std::vector<Row> rows;
  for (const auto& r : lp.rows) {
    Row row{{}, r.sense, r.rhs};
    for (auto [v, a] : r.coeffs) {
      row.rhs -= a * lower[v];
      if (col_of[v] >= 0) row.coeffs.emplace_back(static_cast<std::size_t>(col_of[v]), a);
    }
    rows.push_back(std::move(row));
  }
  for (std::size_t k = 0; k < nv; ++k)
    if (col_of[k] >= 0 && std::isfinite(upper[k]))
      rows.push_back({{{static_cast<std::size_t>(col_of[k]), 1.0}}, RowSense::LessEqual, upper[k] - lower[k]});

  // Empty rows either hold trivially or make the problem infeasible.
  std::erase_if(rows, [&](const Row& r) { return r.coeffs.empty(); });
  for (const auto& r : lp.rows) {
    bool empty = true;
    double lhs = 0.0;
    for (auto [v, a] : r.coeffs) {
      if (col_of[v] >= 0 && a != 0.0) empty = false;
      lhs += a * lower[v];
    }
    if (!empty) continue;
    const double gap = lhs - r.rhs;
    if ((r.sense == RowSense::Equal && std::abs(gap) > opt.feasibility_tol) ||
        (r.sense == RowSense::LessEqual && gap > opt.feasibility_tol) ||
        (r.sense == RowSense::GreaterEqual && gap < -opt.feasibility_tol))
      return res;
  }

  for (auto& r : rows) {
    if (r.rhs < 0.0) {
      r.rhs = -r.rhs;
      for (auto& c : r.coeffs) c.second = -c.second;
      if (r.sense == RowSense::LessEqual) r.sense = RowSense::GreaterEqual;
      else if (r.sense == RowSense::GreaterEqual) r.sense = RowSense::LessEqual;
    }
  }

  std::size_t n_slack = 0, n_art = 0;
  for (const auto& r : rows) {
    if (r.sense != RowSense::Equal) ++n_slack;
    if (r.sense != RowSense::LessEqual) ++n_art;
  }
  const std::size_t art_begin = ny + n_slack;
  detail::Tableau tab(rows.size(), art_begin + n_art);
  std::size_t next_slack = ny, next_art = art_begin;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (auto [c, a] : rows[r].coeffs) tab.at(r, c) += a;
    tab.rhs(r) = rows[r].rhs;
    switch (rows[r].sense) {
      case RowSense::LessEqual:
        tab.at(r, next_slack) = 1.0;
        tab.basis()[r] = next_slack++;
        break;
      case RowSense::GreaterEqual:
        tab.at(r, next_slack++) = -1.0;
        [[fallthrough]];
      case RowSense::Equal:
        tab.at(r, next_art) = 1.0;
        tab.basis()[r] = next_art++;
        break;
    }
  }

  std::size_t iterations = 0;
  if (n_art > 0) {
    for (std::size_t r = 0; r < tab.rows(); ++r) {
      if (tab.basis()[r] < art_begin) continue;
      for (std::size_t c = 0; c <= tab.cols(); ++c)
        if (c < art_begin || c == tab.cols()) tab.at(tab.rows(), c) -= tab.at(r, c);
    }
    auto ph = detail::run_phase(tab, art_begin, opt, iterations);
    res.iterations = iterations;
    if (ph == detail::PhaseResult::IterationLimit) {
      res.status = LpStatus::IterationLimit;
      return res;
    }
    if (-tab.rhs(tab.rows()) > opt.feasibility_tol) return res;  // infeasible
    // Pivot remaining zero-level artificials out; rows where that fails are redundant.
    for (std::size_t r = 0; r < tab.rows();) {
      if (tab.basis()[r] < art_begin) {
        ++r;
        continue;
      }
      std::size_t q = art_begin;
      for (std::size_t c = 0; c < art_begin; ++c)
        if (std::abs(tab.at(r, c)) > opt.pivot_tol) {
          q = c;
          break;
        }
      if (q < art_begin) {
        tab.pivot(r, q);
        ++r;
      } else {
        tab.drop_row(r);
      }
    }
  }

  // Phase 2 reduced costs.
  std::vector<double> cy(tab.cols(), 0.0);
  for (std::size_t k = 0; k < nv; ++k)
    if (col_of[k] >= 0) cy[static_cast<std::size_t>(col_of[k])] = lp.objective[k];
  for (std::size_t c = 0; c <= tab.cols(); ++c) tab.at(tab.rows(), c) = c < tab.cols() ? cy[c] : 0.0;
  for (std::size_t r = 0; r < tab.rows(); ++r) {
    const double cb = cy[tab.basis()[r]];
    if (cb == 0.0) continue;
    for (std::size_t c = 0; c <= tab.cols(); ++c) tab.at(tab.rows(), c) -= cb * tab.at(r, c);
  }
  auto ph = detail::run_phase(tab, art_begin, opt, iterations);
  res.iterations = iterations;
  if (ph == detail::PhaseResult::Unbounded) {
    res.status = LpStatus::Unbounded;
    res.objective = -std::numeric_limits<double>::infinity();
    return res;
  }
  if (ph == detail::PhaseResult::IterationLimit) {
    res.status = LpStatus::IterationLimit;
    return res;
  }

  std::vector<double> y(tab.cols(), 0.0);
  for (std::size_t r = 0; r < tab.rows(); ++r) y[tab.basis()[r]] = std::max(tab.rhs(r), 0.0);
  res.objective = 0.0;
  for (std::size_t k = 0; k < nv; ++k) {
    res.x[k] = lower[k] + (col_of[k] >= 0 ? y[static_cast<std::size_t>(col_of[k])] : 0.0);
    res.objective += lp.objective[k] * res.x[k];
  }
  res.status = LpStatus::Optimal;
  return res;
}

inline LpResult simplex_solve(const LpProblem& lp, const SimplexOptions& opt = {}) {
  lp.validate();
  return simplex_solve(lp, lp.lower, lp.upper, opt);
}

// Free-format MPS (NAME/ROWS/COLUMNS/RHS/BOUNDS) for cross-checking with other solvers.
inline void write_mps(std::ostream& out, const LpProblem& lp, const std::string& name = "SOT") {
  lp.validate();
  out << "NAME " << name << "\nROWS\n N obj\n";
  for (std::size_t r = 0; r < lp.rows.size(); ++r) {
    const char s = lp.rows[r].sense == RowSense::Equal ? 'E'
                   : lp.rows[r].sense == RowSense::LessEqual ? 'L' : 'G';
    out << ' ' << s << " r" << r << '\n';
  }
  std::vector<std::vector<std::pair<std::size_t, double>>> cols(lp.num_vars());
  for (std::size_t r = 0; r < lp.rows.size(); ++r)
    for (auto [v, a] : lp.rows[r].coeffs) cols[v].emplace_back(r, a);
  out << "COLUMNS\n";
  bool in_int = false;
  for (std::size_t v = 0; v < lp.num_vars(); ++v) {
    if (lp.integer[v] != in_int) {
      out << " M" << v << " 'MARKER' " << (lp.integer[v] ? "'INTORG'" : "'INTEND'") << '\n';
      in_int = lp.integer[v];
    }
    out << " x" << v << " obj " << io::format_double(lp.objective[v]) << '\n';
    for (auto [r, a] : cols[v]) out << " x" << v << " r" << r << ' ' << io::format_double(a) << '\n';
  }
  if (in_int) out << " Mend 'MARKER' 'INTEND'\n";
  out << "RHS\n";
  for (std::size_t r = 0; r < lp.rows.size(); ++r)
    if (lp.rows[r].rhs != 0.0) out << " rhs r" << r << ' ' << io::format_double(lp.rows[r].rhs) << '\n';
  out << "BOUNDS\n";
  for (std::size_t v = 0; v < lp.num_vars(); ++v) {
    if (lp.lower[v] != 0.0) out << " LO bnd x" << v << ' ' << io::format_double(lp.lower[v]) << '\n';
    if (std::isfinite(lp.upper[v])) out << " UP bnd x" << v << ' ' << io::format_double(lp.upper[v]) << '\n';
  }
  out << "ENDATA\n";
}

}  // namespace sotead
