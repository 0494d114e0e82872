#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "sotead/encoder.hpp"
#include "sotead/error.hpp"
#include "sotead/io.hpp"
#include "sotead/kg.hpp"
#include "sotead/matrix.hpp"
#include "sotead/text.hpp"

namespace sotead {

// Floor applied to zero distances so every cost stays strictly positive.
inline constexpr double kCostFloor = 1e-9;

struct CostEntry {
  EntityId i = 0;
  EntityId j = 0;
  double cost = 0.0;

  friend bool operator==(const CostEntry&, const CostEntry&) = default;
};

// Present (i, j, c_ij) entries of an m x n cost matrix, sorted by (i, j), with
// row and column indices into `entries()`.
class SparseCostMatrix {
 public:
  SparseCostMatrix() = default;

  SparseCostMatrix(std::size_t m, std::size_t n, std::vector<CostEntry> entries)
      : m_(m), n_(n), entries_(std::move(entries)) {
    std::sort(entries_.begin(), entries_.end(), [](const CostEntry& a, const CostEntry& b) {
      return a.i != b.i ? a.i < b.i : a.j < b.j;
    });
    rows_.assign(m_, {});
    cols_.assign(n_, {});
    for (std::size_t k = 0; k < entries_.size(); ++k) {
      const auto& e = entries_[k];
      if (e.i < 0 || static_cast<std::size_t>(e.i) >= m_ || e.j < 0 ||
          static_cast<std::size_t>(e.j) >= n_)
        throw ShapeError("cost entry (" + std::to_string(e.i) + ", " + std::to_string(e.j) +
                         ") outside " + std::to_string(m_) + " x " + std::to_string(n_));
      if (!(e.cost > 0.0) || !std::isfinite(e.cost))
        throw Error("cost entries must be finite and strictly positive");
      if (k > 0 && entries_[k - 1].i == e.i && entries_[k - 1].j == e.j)
        throw DuplicateError(std::to_string(e.i) + "," + std::to_string(e.j), "duplicate cost entry");
      rows_[static_cast<std::size_t>(e.i)].push_back(k);
      cols_[static_cast<std::size_t>(e.j)].push_back(k);
    }
  }

  // Dense m x n matrix; entries that are +inf (or NaN) are treated as absent.
  static SparseCostMatrix from_dense(const Matrix& c) {
    std::vector<CostEntry> e;
    for (std::size_t i = 0; i < c.rows(); ++i)
      for (std::size_t j = 0; j < c.cols(); ++j)
        if (std::isfinite(c(i, j)))
          e.push_back({static_cast<EntityId>(i), static_cast<EntityId>(j), c(i, j)});
    return SparseCostMatrix(c.rows(), c.cols(), std::move(e));
  }

  std::size_t rows() const { return m_; }
  std::size_t cols() const { return n_; }
  std::size_t nnz() const { return entries_.size(); }
  const std::vector<CostEntry>& entries() const { return entries_; }
  const std::vector<std::size_t>& row(std::size_t i) const { return rows_.at(i); }
  const std::vector<std::size_t>& col(std::size_t j) const { return cols_.at(j); }

  std::optional<double> find(EntityId i, EntityId j) const {
    for (auto k : rows_.at(static_cast<std::size_t>(i)))
      if (entries_[k].j == j) return entries_[k].cost;
    return std::nullopt;
  }

  // Dense copy with +inf where no entry is present.
  Matrix dense() const {
    Matrix d(m_, n_, std::numeric_limits<double>::infinity());
    for (const auto& e : entries_) d(static_cast<std::size_t>(e.i), static_cast<std::size_t>(e.j)) = e.cost;
    return d;
  }

  SparseCostMatrix scaled(double s) const {
    auto e = entries_;
    for (auto& x : e) x.cost *= s;
    return SparseCostMatrix(m_, n_, std::move(e));
  }

 private:
  std::size_t m_ = 0, n_ = 0;
  std::vector<CostEntry> entries_;
  std::vector<std::vector<std::size_t>> rows_, cols_;
};

// alpha prices sending a KG2 entity to the virtual u_0, beta a KG1 entity to v_0.
struct VirtualCosts {
  double alpha = 1.0;
  double beta = 1.0;

  void validate() const {
    if (!(alpha > 0.0) || !(beta > 0.0)) throw ConfigError("virtual costs alpha, beta must be > 0");
  }
};

// Character bigram counts of lowercased names, used by the word+char variant.
struct BigramOptions {
  const KnowledgeGraph* kg1 = nullptr;
  const KnowledgeGraph* kg2 = nullptr;
  double weight = 1.0;
};

namespace detail {

using BigramCounts = std::map<std::string, int>;

inline BigramCounts bigrams(const std::string& name) {
  std::string s;
  for (unsigned char c : name) s.push_back(static_cast<char>(c < 0x80 ? std::tolower(c) : c));
  BigramCounts out;
  for (std::size_t k = 0; k + 1 < s.size(); ++k) ++out[s.substr(k, 2)];
  return out;
}

// L1 distance between bigram count vectors, divided by the summed name lengths.
inline double bigram_distance(const BigramCounts& a, const BigramCounts& b, std::size_t len_a,
                              std::size_t len_b) {
  double d = 0.0;
  auto ia = a.begin();
  auto ib = b.begin();
  while (ia != a.end() || ib != b.end()) {
    if (ib == b.end() || (ia != a.end() && ia->first < ib->first)) {
      d += ia->second;
      ++ia;
    } else if (ia == a.end() || ib->first < ia->first) {
      d += ib->second;
      ++ib;
    } else {
      d += std::abs(ia->second - ib->second);
      ++ia;
      ++ib;
    }
  }
  const auto len = len_a + len_b;
  return len == 0 ? 0.0 : d / static_cast<double>(len);
}

}  // namespace detail

// Dense pairwise costs: Manhattan distance of enhanced embeddings plus the
// optional weighted bigram distance, floored at `floor`.
inline Matrix dense_costs(const EnhancedEmbeddings& e1, const EnhancedEmbeddings& e2,
                          const BigramOptions* bigram = nullptr, double floor = kCostFloor) {
  if (!(floor > 0.0)) throw ConfigError("cost floor delta must be > 0");
  if (e1.cols() != e2.cols())
    throw ShapeError("embedding widths differ: " + std::to_string(e1.cols()) + " vs " +
                     std::to_string(e2.cols()));
  Matrix c(e1.rows(), e2.rows());
  for (std::size_t i = 0; i < e1.rows(); ++i)
    for (std::size_t j = 0; j < e2.rows(); ++j) c(i, j) = manhattan_distance(e1.row(i), e2.row(j));
  if (bigram && bigram->kg1 && bigram->kg2) {
    if (bigram->kg1->size() != e1.rows() || bigram->kg2->size() != e2.rows())
      throw ShapeError("bigram names do not match the embedding rows");
    std::vector<detail::BigramCounts> b2;
    for (const auto& e : bigram->kg2->entities()) b2.push_back(detail::bigrams(e.name));
    for (std::size_t i = 0; i < e1.rows(); ++i) {
      const auto& n1 = bigram->kg1->entity(static_cast<EntityId>(i)).name;
      const auto b1 = detail::bigrams(n1);
      for (std::size_t j = 0; j < e2.rows(); ++j)
        c(i, j) += bigram->weight *
                   detail::bigram_distance(b1, b2[j], n1.size(),
                                           bigram->kg2->entity(static_cast<EntityId>(j)).name.size());
    }
  }
  for (auto& x : c.data()) x = std::max(x, floor);
  return c;
}

// Keeps the union of every row's k cheapest columns and every column's k
// cheapest rows. Ties go to the smaller index.
inline SparseCostMatrix sparsify_top_k(const Matrix& dense, std::size_t k, double floor = kCostFloor) {
  if (k == 0) throw ConfigError("K must be >= 1");
  if (!(floor > 0.0)) throw ConfigError("cost floor delta must be > 0");
  const std::size_t m = dense.rows(), n = dense.cols();
  std::vector<std::vector<bool>> keep(m, std::vector<bool>(n, false));
  const std::size_t kr = std::min(k, n), kc = std::min(k, m);
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < m; ++i) {
    idx.resize(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(kr), idx.end(),
                      [&](std::size_t a, std::size_t b) {
                        return dense(i, a) < dense(i, b) || (dense(i, a) == dense(i, b) && a < b);
                      });
    for (std::size_t t = 0; t < kr; ++t) keep[i][idx[t]] = true;
  }
  for (std::size_t j = 0; j < n; ++j) {
    idx.resize(m);
    std::iota(idx.begin(), idx.end(), 0);
    std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(kc), idx.end(),
                      [&](std::size_t a, std::size_t b) {
                        return dense(a, j) < dense(b, j) || (dense(a, j) == dense(b, j) && a < b);
                      });
    for (std::size_t t = 0; t < kc; ++t) keep[idx[t]][j] = true;
  }
  std::vector<CostEntry> entries;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (keep[i][j])
        entries.push_back({static_cast<EntityId>(i), static_cast<EntityId>(j),
                           std::max(dense(i, j), floor)});
  return SparseCostMatrix(m, n, std::move(entries));
}

inline SparseCostMatrix build_cost(const EnhancedEmbeddings& e1, const EnhancedEmbeddings& e2,
                                   std::size_t k, const BigramOptions* bigram = nullptr) {
  return sparsify_top_k(dense_costs(e1, e2, bigram), k);
}

// Row minima l^u and column minima l^v over the present entries; rows or
// columns without entries hold +inf and are listed.
struct MinCostProfiles {
  std::vector<double> row_min;
  std::vector<double> col_min;
  std::vector<EntityId> empty_rows;
  std::vector<EntityId> empty_cols;
};

inline MinCostProfiles min_cost_profiles(const SparseCostMatrix& c) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  MinCostProfiles p{std::vector<double>(c.rows(), inf), std::vector<double>(c.cols(), inf), {}, {}};
  for (const auto& e : c.entries()) {
    auto& r = p.row_min[static_cast<std::size_t>(e.i)];
    auto& q = p.col_min[static_cast<std::size_t>(e.j)];
    r = std::min(r, e.cost);
    q = std::min(q, e.cost);
  }
  for (std::size_t i = 0; i < c.rows(); ++i)
    if (std::isinf(p.row_min[i])) p.empty_rows.push_back(static_cast<EntityId>(i));
  for (std::size_t j = 0; j < c.cols(); ++j)
    if (std::isinf(p.col_min[j])) p.empty_cols.push_back(static_cast<EntityId>(j));
  return p;
}

// Linear-interpolation quantile of the finite values (NumPy's default rule).
inline double quantile(std::vector<double> values, double level) {
  std::erase_if(values, [](double v) { return !std::isfinite(v); });
  if (values.empty()) throw Error("quantile of an empty set");
  std::sort(values.begin(), values.end());
  const double pos = std::clamp(level, 0.0, 1.0) * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

struct CostSidecar {
  std::size_t m = 0, n = 0, k = 0;
  std::optional<VirtualCosts> virtual_costs;
  double delta = kCostFloor;
};

// `i<TAB>j<TAB>cost` (0-based ids) plus a JSON sidecar {m, n, K, alpha, beta, delta}.
inline void write_cost(const std::filesystem::path& tsv, const std::filesystem::path& sidecar,
                       const SparseCostMatrix& c, const CostSidecar& meta) {
  auto out = io::open_out(tsv);
  for (const auto& e : c.entries()) out << e.i << '\t' << e.j << '\t' << io::format_double(e.cost) << '\n';
  nlohmann::json j;
  j["m"] = c.rows();
  j["n"] = c.cols();
  j["K"] = meta.k;
  j["alpha"] = meta.virtual_costs ? nlohmann::json(meta.virtual_costs->alpha) : nlohmann::json();
  j["beta"] = meta.virtual_costs ? nlohmann::json(meta.virtual_costs->beta) : nlohmann::json();
  j["delta"] = meta.delta;
  io::open_out(sidecar) << j.dump(2) << '\n';
}

inline CostSidecar read_cost_sidecar(const std::filesystem::path& sidecar) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(io::read_file(sidecar));
  } catch (const nlohmann::json::exception& ex) {
    throw ParseError(sidecar.string(), 0, ex.what());
  }
  CostSidecar meta;
  meta.m = j.at("m").get<std::size_t>();
  meta.n = j.at("n").get<std::size_t>();
  meta.k = j.value("K", std::size_t{0});
  meta.delta = j.value("delta", kCostFloor);
  if (j.contains("alpha") && !j["alpha"].is_null() && j.contains("beta") && !j["beta"].is_null())
    meta.virtual_costs = VirtualCosts{j["alpha"].get<double>(), j["beta"].get<double>()};
  return meta;
}

// Reads the TSV; the shape comes from the sidecar when given, else from the
// largest ids present.
inline SparseCostMatrix read_cost(const std::filesystem::path& tsv,
                                  const std::optional<CostSidecar>& meta = {}) {
  std::vector<CostEntry> entries;
  std::size_t m = 0, n = 0;
  for (const auto& line : io::read_lines(tsv)) {
    auto cols = io::split(line.text, '\t');
    CostEntry e;
    if (cols.size() != 3 || !io::parse_int(cols[0], e.i) || !io::parse_int(cols[1], e.j) ||
        !io::parse_double(cols[2], e.cost))
      throw ParseError(tsv.string(), line.number, "expected i<TAB>j<TAB>cost");
    m = std::max(m, static_cast<std::size_t>(e.i) + 1);
    n = std::max(n, static_cast<std::size_t>(e.j) + 1);
    entries.push_back(e);
  }
  if (meta) {
    if (m > meta->m || n > meta->n) throw ShapeError("cost entries exceed the sidecar shape");
    m = meta->m;
    n = meta->n;
  }
  return SparseCostMatrix(m, n, std::move(entries));
}

}  // namespace sotead
