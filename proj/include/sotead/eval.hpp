#pragma once

#include <algorithm>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "json.hpp"
#include "sotead/encoder.hpp"
#include "sotead/error.hpp"
#include "sotead/kg.hpp"
#include "sotead/matrix.hpp"
#include "sotead/sot.hpp"

namespace sotead {

struct RankingRow {
  EntityId source = 0;
  std::vector<EntityId> candidates;  // best first, no duplicates
};

struct RankingTable {
  std::vector<RankingRow> rows;

  void validate() const {
    std::unordered_set<EntityId> sources;
    for (const auto& r : rows) {
      if (!sources.insert(r.source).second)
        throw DuplicateError(std::to_string(r.source), "source ranked twice");
      std::unordered_set<EntityId> seen;
      for (auto c : r.candidates)
        if (!seen.insert(c).second)
          throw DuplicateError(std::to_string(c), "duplicate candidate for source " + std::to_string(r.source));
    }
  }
};

// Rows of `costs` sorted ascending (ties: smaller target id); +inf entries are
// left out of the candidate list.
inline RankingTable rankings_from_costs(const Matrix& costs, std::span<const EntityId> sources) {
  RankingTable t;
  for (auto s : sources) {
    RankingRow row{s, {}};
    for (std::size_t j = 0; j < costs.cols(); ++j)
      if (costs(static_cast<std::size_t>(s), j) < std::numeric_limits<double>::infinity())
        row.candidates.push_back(static_cast<EntityId>(j));
    std::stable_sort(row.candidates.begin(), row.candidates.end(), [&](EntityId a, EntityId b) {
      return costs(static_cast<std::size_t>(s), static_cast<std::size_t>(a)) <
             costs(static_cast<std::size_t>(s), static_cast<std::size_t>(b));
    });
    t.rows.push_back(std::move(row));
  }
  return t;
}

inline RankingTable rankings_from_embeddings(const Matrix& e1, const Matrix& e2,
                                             std::span<const EntityId> sources) {
  Matrix d(e1.rows(), e2.rows(), std::numeric_limits<double>::infinity());
  for (auto s : sources)
    for (std::size_t j = 0; j < e2.rows(); ++j)
      d(static_cast<std::size_t>(s), j) = manhattan_distance(e1.row(static_cast<std::size_t>(s)), e2.row(j));
  return rankings_from_costs(d, sources);
}

// Relaxed: only targets of the test pairs compete. Practical: every ranked target does.
enum class EvalSetting { Relaxed, Practical };

namespace detail {

// 1-based rank of every test pair's target, 0 when it is not ranked.
inline std::vector<std::size_t> gold_ranks(const RankingTable& table, std::span<const EntityPair> test,
                                           EvalSetting setting) {
  std::unordered_map<EntityId, const RankingRow*> by_source;
  for (const auto& r : table.rows) by_source.emplace(r.source, &r);
  std::unordered_set<EntityId> allowed;
  if (setting == EvalSetting::Relaxed)
    for (auto [s, t] : test) allowed.insert(t);

  std::vector<EntityId> missing;
  std::vector<std::size_t> ranks;
  for (auto [s, t] : test) {
    auto it = by_source.find(s);
    if (it == by_source.end()) {
      missing.push_back(s);
      continue;
    }
    std::size_t rank = 0, pos = 0;
    for (auto c : it->second->candidates) {
      if (setting == EvalSetting::Relaxed && !allowed.count(c)) continue;
      ++pos;
      if (c == t) {
        rank = pos;
        break;
      }
    }
    ranks.push_back(rank);
  }
  if (!missing.empty()) {
    std::string ids;
    for (auto m : missing) ids += (ids.empty() ? "" : ",") + std::to_string(m);
    throw ReferenceError(ids, "test sources missing from the ranking table");
  }
  return ranks;
}

}  // namespace detail

inline double hits_at_k(const RankingTable& table, std::span<const EntityPair> test, std::size_t k,
                        EvalSetting setting) {
  if (test.empty()) return 0.0;
  const auto ranks = detail::gold_ranks(table, test, setting);
  const auto hit = std::count_if(ranks.begin(), ranks.end(), [&](std::size_t r) { return r >= 1 && r <= k; });
  return static_cast<double>(hit) / static_cast<double>(test.size());
}

inline double hits_at_k(const RankingTable& table, const GoldStandard& gold, std::size_t k, EvalSetting setting) {
  return hits_at_k(table, gold.pairs, k, setting);
}

// Mean reciprocal rank; an unranked gold target contributes 0.
inline double mrr(const RankingTable& table, std::span<const EntityPair> test, EvalSetting setting) {
  if (test.empty()) return 0.0;
  const auto ranks = detail::gold_ranks(table, test, setting);
  double sum = 0.0;
  for (auto r : ranks)
    if (r > 0) sum += 1.0 / static_cast<double>(r);
  return sum / static_cast<double>(test.size());
}

inline double mrr(const RankingTable& table, const GoldStandard& gold, EvalSetting setting) {
  return mrr(table, gold.pairs, setting);
}

// Fraction of test pairs whose source the solver matched to the gold target.
inline double matched_accuracy(const AssignmentSolution& s, std::span<const EntityPair> test) {
  if (test.empty()) return 0.0;
  std::unordered_map<EntityId, EntityId> m;
  for (auto [a, b] : s.matched) m.emplace(a, b);
  std::size_t hit = 0;
  for (auto [a, b] : test) {
    auto it = m.find(a);
    if (it != m.end() && it->second == b) ++hit;
  }
  return static_cast<double>(hit) / static_cast<double>(test.size());
}

struct DedPrediction {
  std::vector<EntityId> dangling1;
  std::vector<EntityId> dangling2;
};

// Dangling is the positive class.
struct DedScores {
  std::size_t tp = 0, fp = 0, fn = 0;
  double precision = 0.0, recall = 0.0, f1 = 0.0;
  bool precision_undefined = false;  // nothing predicted dangling
};

inline DedScores ded_from_counts(std::size_t tp, std::size_t fp, std::size_t fn) {
  DedScores s{tp, fp, fn};
  if (tp + fp == 0) s.precision_undefined = true;
  else s.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
  s.recall = tp + fn == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fn);
  // Harmonic mean of precision and recall, in a form that rounds equal ratios identically.
  s.f1 = tp == 0 ? 0.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn);
  return s;
}

inline DedScores ded_confusion(std::span<const EntityId> predicted, std::span<const EntityId> gold) {
  std::unordered_set<EntityId> g(gold.begin(), gold.end()), p(predicted.begin(), predicted.end());
  std::size_t tp = 0, fp = 0;
  for (auto id : p) (g.count(id) ? tp : fp) += 1;
  return ded_from_counts(tp, fp, g.size() - tp);
}

struct DedReport {
  DedScores kg1, kg2, pooled;
};

// Per-side scores plus the micro average over both sides.
inline DedReport ded_scores(const DedPrediction& pred, const GoldStandard& gold) {
  DedReport r;
  r.kg1 = ded_confusion(pred.dangling1, gold.dangling1);
  r.kg2 = ded_confusion(pred.dangling2, gold.dangling2);
  r.pooled = ded_from_counts(r.kg1.tp + r.kg2.tp, r.kg1.fp + r.kg2.fp, r.kg1.fn + r.kg2.fn);
  return r;
}

struct ThresholdResult {
  double threshold = 0.0;
  double train_f1 = 0.0;
  std::vector<EntityId> predicted;  // ids whose nearest distance exceeds the threshold
};

// Supervised-threshold baseline: choose the cut on nearest-neighbour distance
// that maximizes F1 over the labeled training ids (candidates: -inf and every
// distinct training distance; ties go to the smaller threshold), then predict
// dangling for every entity above it.
inline ThresholdResult distance_threshold_baseline(std::span<const double> nearest,
                                                   std::span<const EntityId> training_ids,
                                                   std::span<const EntityId> training_dangling) {
  if (training_ids.empty()) throw ConfigError("distance-threshold baseline needs labeled training entities");
  std::unordered_set<EntityId> dangling(training_dangling.begin(), training_dangling.end());
  std::vector<double> cands{-std::numeric_limits<double>::infinity()};
  for (auto id : training_ids) cands.push_back(nearest[static_cast<std::size_t>(id)]);
  std::sort(cands.begin(), cands.end());
  cands.erase(std::unique(cands.begin(), cands.end()), cands.end());

  ThresholdResult best{cands.front(), -1.0, {}};
  for (double thr : cands) {
    std::size_t tp = 0, fp = 0, fn = 0;
    for (auto id : training_ids) {
      const bool pred = nearest[static_cast<std::size_t>(id)] > thr;
      const bool gold = dangling.count(id) > 0;
      tp += pred && gold;
      fp += pred && !gold;
      fn += !pred && gold;
    }
    const double f1 = ded_from_counts(tp, fp, fn).f1;
    if (f1 > best.train_f1) {
      best.threshold = thr;
      best.train_f1 = f1;
    }
  }
  for (std::size_t id = 0; id < nearest.size(); ++id)
    if (nearest[id] > best.threshold) best.predicted.push_back(static_cast<EntityId>(id));
  return best;
}

struct MetricsReport {
  double hits1_relaxed = 0.0;
  double hits1_practical = 0.0;
  double hits10 = 0.0;
  double mrr = 0.0;
  std::optional<double> matched_hits1;  // solver matching, dangling counts as a miss
  std::optional<double> greedy_hits1;
  std::optional<double> raw_hits1_practical;  // ranking by raw name embeddings
  std::optional<DedReport> ded;
};

inline nlohmann::json to_json(const DedScores& s) {
  nlohmann::json j;
  j["p"] = s.precision;
  j["r"] = s.recall;
  j["f1"] = s.f1;
  j["tp"] = s.tp;
  j["fp"] = s.fp;
  j["fn"] = s.fn;
  j["precision_undefined"] = s.precision_undefined;
  return j;
}

inline nlohmann::json to_json(const MetricsReport& m) {
  nlohmann::json j;
  j["hits1_relaxed"] = m.hits1_relaxed;
  j["hits1_practical"] = m.hits1_practical;
  j["hits10"] = m.hits10;
  j["mrr"] = m.mrr;
  if (m.matched_hits1) j["matched_hits1"] = *m.matched_hits1;
  if (m.greedy_hits1) j["greedy_hits1"] = *m.greedy_hits1;
  if (m.raw_hits1_practical) j["raw_hits1_practical"] = *m.raw_hits1_practical;
  if (m.ded) j["ded"] = {{"kg1", to_json(m.ded->kg1)}, {"kg2", to_json(m.ded->kg2)}, {"pooled", to_json(m.ded->pooled)}};
  return j;
}

}  // namespace sotead
