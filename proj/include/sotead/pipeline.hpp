#pragma once

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <unordered_set>
#include <vector>

#include "json.hpp"

#include "sotead/config.hpp"
#include "sotead/cost.hpp"
#include "sotead/encoder.hpp"
#include "sotead/error.hpp"
#include "sotead/eval.hpp"
#include "sotead/io.hpp"
#include "sotead/kg.hpp"
#include "sotead/sot.hpp"
#include "sotead/text.hpp"
#include "sotead/virtual_costs.hpp"

namespace sotead {

// A stage failed. `input_error` separates bad inputs from failures of the
// computation itself.
class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& cause, bool input_error)
      : Error("stage '" + stage + "' failed: " + cause), stage_(std::move(stage)), input_error_(input_error) {}
  const std::string& stage() const { return stage_; }
  bool input_error() const { return input_error_; }

 private:
  std::string stage_;
  bool input_error_;
};

// The solver hit its node budget; solution.json holds the best incumbent.
class NodeBudgetError : public Error {
 public:
  using Error::Error;
};

// Artifact file names inside the output directory.
namespace artifact {
inline constexpr const char* kNames1 = "names1.emb";
inline constexpr const char* kNames2 = "names2.emb";
inline constexpr const char* kOov1 = "oov1.tsv";
inline constexpr const char* kOov2 = "oov2.tsv";
inline constexpr const char* kPairs = "pairs.tsv";
inline constexpr const char* kCandidates = "candidates.tsv";
inline constexpr const char* kEncoder = "encoder.json";
inline constexpr const char* kEnhanced1 = "enhanced1.emb";
inline constexpr const char* kEnhanced2 = "enhanced2.emb";
inline constexpr const char* kLoss = "loss.tsv";
inline constexpr const char* kCostGrid = "cost_grid.tsv";
inline constexpr const char* kCostGridMeta = "cost_grid.json";
inline constexpr const char* kCost = "cost.tsv";
inline constexpr const char* kCostMeta = "cost.json";
inline constexpr const char* kVirtual = "virtual.json";
inline constexpr const char* kSolution = "solution.json";
inline constexpr const char* kMetrics = "metrics.json";
}  // namespace artifact

struct StageContext {
  PipelineConfig config;
  std::filesystem::path out;
  std::ostream* log = &std::cerr;

  std::filesystem::path at(const char* name) const { return out / name; }
  void warn(const std::string& msg) const {
    if (log) *log << "warning: " << msg << '\n';
  }
};

namespace detail {

inline const std::filesystem::path& required(const std::filesystem::path& p, const char* key) {
  if (p.empty()) throw ConfigError(std::string("config key '") + key + "' is not set");
  return p;
}

inline std::pair<KnowledgeGraph, KnowledgeGraph> load_graphs(const PipelineConfig& c) {
  return {load_kg(required(c.kg1_triples, "kg1_triples"), required(c.kg1_names, "kg1_names")),
          load_kg(required(c.kg2_triples, "kg2_triples"), required(c.kg2_names, "kg2_names"))};
}

// `kg1_key<TAB>kg2_key<TAB>score`; ids may repeat.
inline void write_scored_pairs(const std::filesystem::path& path, const KnowledgeGraph& kg1,
                               const KnowledgeGraph& kg2, const std::vector<EntityPair>& pairs,
                               const SimilarityMatrix& s) {
  auto out = io::open_out(path);
  for (auto [a, b] : pairs)
    out << kg1.entity(a).key << '\t' << kg2.entity(b).key << '\t'
        << io::format_double(s(static_cast<std::size_t>(a), static_cast<std::size_t>(b))) << '\n';
}

inline std::vector<EntityPair> read_scored_pairs(const std::filesystem::path& path, const KnowledgeGraph& kg1,
                                                 const KnowledgeGraph& kg2) {
  std::vector<EntityPair> pairs;
  for (const auto& line : io::read_lines(path)) {
    auto cols = io::split(line.text, '\t');
    if (cols.size() < 2) throw ParseError(path.string(), line.number, "expected kg1_key<TAB>kg2_key");
    pairs.emplace_back(kg1.id_of(std::string(cols[0])), kg2.id_of(std::string(cols[1])));
  }
  return pairs;
}

inline std::size_t worker_count(const PipelineConfig& c) {
  if (c.threads) return c.threads;
  return std::max(1u, std::thread::hardware_concurrency());
}

inline SotSolveOptions solver_options(const PipelineConfig& c) {
  SotSolveOptions opt;
  opt.branching.node_budget = c.node_budget;
  return opt;
}

inline std::vector<EntityPair> supervised_pairs(const StageContext& ctx, const KnowledgeGraph& kg1,
                                                const KnowledgeGraph& kg2) {
  if (ctx.config.mode != SupervisionMode::Supervised) return {};
  return load_pairs(*ctx.config.train_pairs, kg1, kg2);
}

// P, plus the training pairs in supervised mode. A pseudo pair that shares an
// entity with a training pair gives way to it.
inline std::vector<EntityPair> anchor_pairs(const StageContext& ctx, const KnowledgeGraph& kg1,
                                            const KnowledgeGraph& kg2) {
  auto pseudo = read_scored_pairs(ctx.at(artifact::kPairs), kg1, kg2);
  auto train = supervised_pairs(ctx, kg1, kg2);
  if (train.empty()) return pseudo;
  std::unordered_set<EntityId> used1, used2;
  for (auto [a, b] : train) {
    used1.insert(a);
    used2.insert(b);
  }
  for (auto [a, b] : pseudo)
    if (!used1.count(a) && !used2.count(b)) train.emplace_back(a, b);
  std::sort(train.begin(), train.end());
  return train;
}

inline double json_number(const nlohmann::json& j, const char* key, const std::filesystem::path& path) {
  if (!j.contains(key) || !j[key].is_number()) throw ParseError(path.string(), 0, std::string("missing number '") + key + "'");
  return j[key].get<double>();
}

}  // namespace detail

// Name embeddings of both KGs plus the OOV reports.
inline void stage_embed(const StageContext& ctx) {
  const auto& c = ctx.config;
  auto [kg1, kg2] = detail::load_graphs(c);
  const auto table = load_word_vectors(detail::required(c.word_vectors, "word_vectors"));
  const TokenizerOptions opt{c.split_underscore};
  const auto n1 = embed_names(kg1, table, opt);
  const auto n2 = embed_names(kg2, table, opt);
  std::filesystem::create_directories(ctx.out);
  write_embedding_rows(ctx.at(artifact::kNames1), kg1, n1.vectors);
  write_embedding_rows(ctx.at(artifact::kNames2), kg2, n2.vectors);
  write_oov_report(ctx.at(artifact::kOov1), kg1, n1.oov);
  write_oov_report(ctx.at(artifact::kOov2), kg2, n2.oov);
  if (!n1.oov.empty() || !n2.oov.empty())
    ctx.warn(std::to_string(n1.oov.size() + n2.oov.size()) + " entities have no known name token");
}

// Pseudo pairs P (threshold epsilon) and top-N candidates Q.
inline void stage_pairs(const StageContext& ctx) {
  const auto& c = ctx.config;
  auto [kg1, kg2] = detail::load_graphs(c);
  const auto s = similarity_matrix(read_embedding_rows(ctx.at(artifact::kNames1), kg1),
                                   read_embedding_rows(ctx.at(artifact::kNames2), kg2));
  const auto p = extract_pseudo_pairs(s, c.epsilon);
  detail::write_scored_pairs(ctx.at(artifact::kPairs), kg1, kg2, p.pairs, s);
  detail::write_scored_pairs(ctx.at(artifact::kCandidates), kg1, kg2, top_n_candidates(s, c.top_n), s);
  if (p.pairs.empty()) ctx.warn("no pseudo pairs above epsilon " + io::format_double(c.epsilon));
}

inline TrainingConfig training_config(const PipelineConfig& c) {
  TrainingConfig t;
  t.margin = c.margin;
  t.negatives_per_pair = c.negatives_per_pair;
  t.top_n = c.top_n;
  t.w0 = c.w0;
  t.decay_fraction = c.decay_fraction;
  t.learning_rate = c.learning_rate;
  t.total_steps = c.total_steps;
  t.seed = c.seed;
  t.hidden_dim = c.hidden_dim;
  t.output_dim = c.output_dim;
  return t;
}

// Trains the encoder and writes the enhanced embeddings.
inline void stage_train(const StageContext& ctx) {
  const auto& c = ctx.config;
  auto [kg1, kg2] = detail::load_graphs(c);
  const auto x1 = read_embedding_rows(ctx.at(artifact::kNames1), kg1);
  const auto x2 = read_embedding_rows(ctx.at(artifact::kNames2), kg2);
  const auto s = similarity_matrix(x1, x2);
  TrainingProblem prob{&kg1, &kg2, &x1, &x2, &s, detail::anchor_pairs(ctx, kg1, kg2),
                       detail::read_scored_pairs(ctx.at(artifact::kCandidates), kg1, kg2)};
  const auto res = train(prob, training_config(c));
  if (res.skipped) ctx.warn("fewer than 2 anchor pairs; training skipped, raw name embeddings passed through");
  save_checkpoint(ctx.at(artifact::kEncoder), res.params, {c.seed, res.steps});
  write_embedding_rows(ctx.at(artifact::kEnhanced1), kg1, res.kg1);
  write_embedding_rows(ctx.at(artifact::kEnhanced2), kg2, res.kg2);
  auto loss = io::open_out(ctx.at(artifact::kLoss));
  for (std::size_t t = 0; t < res.loss_history.size(); ++t)
    loss << t << '\t' << io::format_double(res.loss_history[t]) << '\n';
}

// Sparse cost matrices at K_grid (for the grid search) and at K.
inline void stage_cost(const StageContext& ctx) {
  const auto& c = ctx.config;
  auto [kg1, kg2] = detail::load_graphs(c);
  const auto e1 = read_embedding_rows(ctx.at(artifact::kEnhanced1), kg1);
  const auto e2 = read_embedding_rows(ctx.at(artifact::kEnhanced2), kg2);
  BigramOptions bigram{&kg1, &kg2, c.char_weight};
  const auto dense = dense_costs(e1, e2, c.cost_mode == CostMode::WordChar ? &bigram : nullptr, c.delta);
  write_cost(ctx.at(artifact::kCostGrid), ctx.at(artifact::kCostGridMeta), sparsify_top_k(dense, c.k_grid, c.delta),
             {e1.rows(), e2.rows(), c.k_grid, std::nullopt, c.delta});
  write_cost(ctx.at(artifact::kCost), ctx.at(artifact::kCostMeta), sparsify_top_k(dense, c.k, c.delta),
             {e1.rows(), e2.rows(), c.k, std::nullopt, c.delta});
}

inline nlohmann::json to_json(const GridSearchResult& g) {
  nlohmann::json j;
  j["alpha"] = g.chosen.alpha;
  j["beta"] = g.chosen.beta;
  j["fallback"] = g.fallback;
  j["chosen_index"] = g.chosen_index;
  j["alpha_candidates"] = g.alpha_candidates;
  j["beta_candidates"] = g.beta_candidates;
  j["cells"] = nlohmann::json::array();
  for (const auto& cell : g.cells)
    j["cells"].push_back({{"alpha", cell.costs.alpha}, {"beta", cell.costs.beta}, {"hits", cell.hits}});
  j["warnings"] = g.warnings;
  return j;
}

// Chooses alpha and beta on the K_grid cost matrix.
inline void stage_gridsearch(const StageContext& ctx) {
  const auto& c = ctx.config;
  auto [kg1, kg2] = detail::load_graphs(c);
  const auto cost = read_cost(ctx.at(artifact::kCostGrid), read_cost_sidecar(ctx.at(artifact::kCostGridMeta)));
  const auto anchors = detail::anchor_pairs(ctx, kg1, kg2);
  GridSearchOptions opt{c.grid_size, detail::worker_count(c), detail::solver_options(c)};
  const auto res = grid_search_virtual_costs(cost, anchors, opt);
  for (const auto& w : res.warnings) ctx.warn(w);
  io::open_out(ctx.at(artifact::kVirtual)) << to_json(res).dump(2) << '\n';
}

inline VirtualCosts read_virtual_costs(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(io::read_file(path));
  } catch (const nlohmann::json::exception& ex) {
    throw ParseError(path.string(), 0, ex.what());
  }
  VirtualCosts vc{detail::json_number(j, "alpha", path), detail::json_number(j, "beta", path)};
  vc.validate();
  return vc;
}

// Solves the semi-constraint transport on the K cost matrix. Fixed alpha and
// beta in the config take precedence over virtual.json.
inline AssignmentSolution stage_solve(const StageContext& ctx) {
  const auto& c = ctx.config;
  const auto cost = read_cost(ctx.at(artifact::kCost), read_cost_sidecar(ctx.at(artifact::kCostMeta)));
  const VirtualCosts vc = c.alpha ? VirtualCosts{*c.alpha, *c.beta} : read_virtual_costs(ctx.at(artifact::kVirtual));
  vc.validate();
  const auto sol = branch_and_cut(SotInstance(cost, vc), detail::solver_options(c));
  write_solution(ctx.at(artifact::kSolution), sol);
  if (sol.status == MipStatus::NodeLimit)
    throw NodeBudgetError("node budget of " + std::to_string(c.node_budget) +
                          " exhausted; best incumbent written to " + ctx.at(artifact::kSolution).string());
  return sol;
}

// `source_key<TAB>cand_key cand_key ...`, best candidate first.
inline RankingTable read_rankings(const std::filesystem::path& path, const KnowledgeGraph& kg1,
                                  const KnowledgeGraph& kg2) {
  RankingTable t;
  for (const auto& line : io::read_lines(path)) {
    auto cols = io::split(line.text, '\t');
    if (cols.size() != 2) throw ParseError(path.string(), line.number, "expected source<TAB>candidates");
    RankingRow row{kg1.id_of(std::string(cols[0])), {}};
    for (auto k : io::split_ws(cols[1])) row.candidates.push_back(kg2.id_of(std::string(k)));
    t.rows.push_back(std::move(row));
  }
  t.validate();
  return t;
}

// Test pairs: the gold pairs, minus the training pairs in supervised mode.
inline std::vector<EntityPair> test_pairs(const StageContext& ctx, const GoldStandard& gold,
                                          const KnowledgeGraph& kg1, const KnowledgeGraph& kg2) {
  const auto train = detail::supervised_pairs(ctx, kg1, kg2);
  std::unordered_set<EntityId> seen;
  for (auto [a, b] : train) seen.insert(a);
  std::vector<EntityPair> test;
  for (auto p : gold.pairs)
    if (!seen.count(p.first)) test.push_back(p);
  return test;
}

// Ranking metrics from the enhanced embeddings (or from `rankings` when
// given), solver and greedy matching accuracy, and DED scores.
inline MetricsReport stage_eval(const StageContext& ctx,
                                const std::optional<std::filesystem::path>& rankings = {}) {
  const auto& c = ctx.config;
  if (!c.gold_pairs) throw ConfigError("evaluation needs config key 'gold_pairs'");
  auto [kg1, kg2] = detail::load_graphs(c);
  const auto gold = load_gold(*c.gold_pairs, kg1, kg2, c.gold_dangling1, c.gold_dangling2);
  const auto test = test_pairs(ctx, gold, kg1, kg2);
  if (test.empty()) throw ConfigError("no test pairs to evaluate");
  std::vector<EntityId> sources;
  for (auto [a, b] : test) sources.push_back(a);

  MetricsReport m;
  auto fill_ranks = [&](const RankingTable& t) {
    m.hits1_relaxed = hits_at_k(t, test, 1, EvalSetting::Relaxed);
    m.hits1_practical = hits_at_k(t, test, 1, EvalSetting::Practical);
    m.hits10 = hits_at_k(t, test, 10, EvalSetting::Practical);
    m.mrr = mrr(t, test, EvalSetting::Practical);
  };
  if (rankings) {
    fill_ranks(read_rankings(*rankings, kg1, kg2));
  } else {
    fill_ranks(rankings_from_embeddings(read_embedding_rows(ctx.at(artifact::kEnhanced1), kg1),
                                        read_embedding_rows(ctx.at(artifact::kEnhanced2), kg2), sources));
    const auto raw = rankings_from_embeddings(read_embedding_rows(ctx.at(artifact::kNames1), kg1),
                                              read_embedding_rows(ctx.at(artifact::kNames2), kg2), sources);
    m.raw_hits1_practical = hits_at_k(raw, test, 1, EvalSetting::Practical);
  }
  if (std::filesystem::exists(ctx.at(artifact::kSolution))) {
    const auto sol = read_solution(ctx.at(artifact::kSolution));
    if (!satisfies_partition(sol, kg1.size(), kg2.size()))
      throw ShapeError("'" + ctx.at(artifact::kSolution).string() + "' does not cover both KGs exactly once");
    m.matched_hits1 = matched_accuracy(sol, test);
    m.ded = ded_scores({sol.dangling1, sol.dangling2}, gold);
  }
  if (std::filesystem::exists(ctx.at(artifact::kCost))) {
    const auto cost = read_cost(ctx.at(artifact::kCost), read_cost_sidecar(ctx.at(artifact::kCostMeta)));
    m.greedy_hits1 = matched_accuracy(greedy_match(cost), test);
  }
  io::open_out(ctx.at(artifact::kMetrics)) << to_json(m).dump(2) << '\n';
  return m;
}

// Runs `fn` and rethrows any failure as a StageError naming `stage`.
template <class Fn>
decltype(auto) run_stage(const std::string& stage, Fn&& fn) {
  try {
    return fn();
  } catch (const StageError&) {
    throw;
  } catch (const NodeBudgetError& e) {
    throw NodeBudgetError("stage '" + stage + "': " + e.what());
  } catch (const ConfigError& e) {
    throw StageError(stage, e.what(), true);
  } catch (const IoError& e) {
    throw StageError(stage, e.what(), true);
  } catch (const ParseError& e) {
    throw StageError(stage, e.what(), true);
  } catch (const ReferenceError& e) {
    throw StageError(stage, e.what(), true);
  } catch (const DuplicateError& e) {
    throw StageError(stage, e.what(), true);
  } catch (const ShapeError& e) {
    throw StageError(stage, e.what(), true);
  } catch (const std::exception& e) {
    throw StageError(stage, e.what(), false);
  }
}

// Every stage in order. Evaluation is skipped without gold pairs.
inline std::optional<MetricsReport> run_pipeline(const StageContext& ctx) {
  run_stage("embed", [&] { stage_embed(ctx); });
  run_stage("pairs", [&] { stage_pairs(ctx); });
  run_stage("train", [&] { stage_train(ctx); });
  run_stage("cost", [&] { stage_cost(ctx); });
  run_stage("gridsearch", [&] { stage_gridsearch(ctx); });
  run_stage("solve", [&] { stage_solve(ctx); });
  if (!ctx.config.gold_pairs) {
    ctx.warn("no gold_pairs configured; skipping evaluation");
    return std::nullopt;
  }
  return run_stage("eval", [&] { return stage_eval(ctx); });
}

}  // namespace sotead
