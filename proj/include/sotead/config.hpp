#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sotead/error.hpp"
#include "sotead/io.hpp"

namespace sotead {

enum class SupervisionMode { Unsupervised, Supervised };
enum class CostMode { Word, WordChar };

// Everything a pipeline run needs. Paths are absolute once loaded.
struct PipelineConfig {
  std::filesystem::path kg1_triples, kg1_names, kg2_triples, kg2_names, word_vectors;
  std::optional<std::filesystem::path> gold_pairs, gold_dangling1, gold_dangling2, train_pairs;

  double epsilon = 0.99;
  std::size_t top_n = 3;
  double margin = 3.0;
  double w0 = 0.3;
  double decay_fraction = 0.25;
  double learning_rate = 1e-3;
  std::size_t total_steps = 1000;
  std::size_t negatives_per_pair = 5;
  std::size_t hidden_dim = 0;
  std::size_t output_dim = 0;
  std::size_t k = 100;
  std::size_t k_grid = 10;
  double delta = 1e-9;  // cost floor
  std::size_t grid_size = 10;
  std::size_t node_budget = 1'000'000;
  std::size_t threads = 0;  // 0: hardware concurrency
  std::uint64_t seed = 0;
  SupervisionMode mode = SupervisionMode::Unsupervised;
  CostMode cost_mode = CostMode::Word;
  double char_weight = 1.0;
  bool split_underscore = true;
  // Fixed virtual costs; when both are set the grid search result is ignored.
  std::optional<double> alpha, beta;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::pair<std::string, std::string> split_assignment(std::string_view text, const std::string& where) {
  const auto eq = text.find('=');
  if (eq == std::string_view::npos) throw ConfigError(where + ": expected key=value");
  std::string key(trim(text.substr(0, eq)));
  if (key.empty()) throw ConfigError(where + ": empty key");
  return {key, std::string(trim(text.substr(eq + 1)))};
}

}  // namespace detail

// Raw settings with the directory that relative paths resolve against.
struct ConfigValue {
  std::string text;
  std::filesystem::path base;
};
using ConfigMap = std::map<std::string, ConfigValue>;

// `key = value` lines; `#` starts a comment line.
inline ConfigMap read_config_file(const std::filesystem::path& path) {
  ConfigMap m;
  const auto base = std::filesystem::absolute(path).parent_path();
  for (const auto& line : io::read_lines(path)) {
    auto text = detail::trim(line.text);
    if (text.empty() || text.front() == '#') continue;
    auto [k, v] = detail::split_assignment(text, path.string() + ":" + std::to_string(line.number));
    m[k] = {v, base};
  }
  return m;
}

// `--set key=value` arguments; paths resolve against the working directory.
inline void apply_overrides(ConfigMap& m, const std::vector<std::string>& sets) {
  for (const auto& s : sets) {
    auto [k, v] = detail::split_assignment(s, "--set " + s);
    m[k] = {v, std::filesystem::current_path()};
  }
}

inline PipelineConfig make_config(const ConfigMap& m) {
  PipelineConfig c;
  for (const auto& [key, value] : m) {
    const auto& v = value.text;
    auto bad = [&](const std::string& why) { return ConfigError("config key '" + key + "': " + why + " (got '" + v + "')"); };
    auto path = [&] {
      if (v.empty()) throw bad("empty path");
      std::filesystem::path p(v);
      return p.is_absolute() ? p : (value.base / p).lexically_normal();
    };
    auto real = [&] {
      double x = 0;
      if (!io::parse_double(v, x)) throw bad("expected a number");
      return x;
    };
    auto count = [&] {
      std::size_t x = 0;
      if (!io::parse_int(v, x)) throw bad("expected a non-negative integer");
      return x;
    };
    auto boolean = [&] {
      if (v == "true" || v == "1") return true;
      if (v == "false" || v == "0") return false;
      throw bad("expected true or false");
    };

    if (key == "kg1_triples") c.kg1_triples = path();
    else if (key == "kg1_names") c.kg1_names = path();
    else if (key == "kg2_triples") c.kg2_triples = path();
    else if (key == "kg2_names") c.kg2_names = path();
    else if (key == "word_vectors") c.word_vectors = path();
    else if (key == "gold_pairs") c.gold_pairs = path();
    else if (key == "gold_dangling1") c.gold_dangling1 = path();
    else if (key == "gold_dangling2") c.gold_dangling2 = path();
    else if (key == "train_pairs") c.train_pairs = path();
    else if (key == "epsilon") c.epsilon = real();
    else if (key == "top_n") c.top_n = count();
    else if (key == "margin") c.margin = real();
    else if (key == "w0") c.w0 = real();
    else if (key == "decay_fraction") c.decay_fraction = real();
    else if (key == "learning_rate") c.learning_rate = real();
    else if (key == "total_steps") c.total_steps = count();
    else if (key == "negatives_per_pair") c.negatives_per_pair = count();
    else if (key == "hidden_dim") c.hidden_dim = count();
    else if (key == "output_dim") c.output_dim = count();
    else if (key == "K") c.k = count();
    else if (key == "K_grid") c.k_grid = count();
    else if (key == "delta") c.delta = real();
    else if (key == "grid_size") c.grid_size = count();
    else if (key == "node_budget") c.node_budget = count();
    else if (key == "threads") c.threads = count();
    else if (key == "seed") {
      if (!io::parse_int(v, c.seed)) throw bad("expected a non-negative integer");
    } else if (key == "mode") {
      if (v == "unsupervised") c.mode = SupervisionMode::Unsupervised;
      else if (v == "supervised") c.mode = SupervisionMode::Supervised;
      else throw bad("expected unsupervised or supervised");
    } else if (key == "cost_mode") {
      if (v == "word") c.cost_mode = CostMode::Word;
      else if (v == "word+char") c.cost_mode = CostMode::WordChar;
      else throw bad("expected word or word+char");
    } else if (key == "char_weight") c.char_weight = real();
    else if (key == "split_underscore") c.split_underscore = boolean();
    else if (key == "alpha") c.alpha = real();
    else if (key == "beta") c.beta = real();
    else throw ConfigError("unknown config key '" + key + "'");
  }

  if (!(c.epsilon > 0.0 && c.epsilon < 1.0)) throw ConfigError("epsilon must lie in (0, 1)");
  if (c.top_n == 0) throw ConfigError("top_n must be >= 1");
  if (c.k == 0 || c.k_grid == 0) throw ConfigError("K and K_grid must be >= 1");
  if (c.grid_size == 0) throw ConfigError("grid_size must be >= 1");
  if (!(c.delta > 0.0)) throw ConfigError("delta must be > 0");
  if (!(c.char_weight >= 0.0)) throw ConfigError("char_weight must be >= 0");
  if (c.alpha.has_value() != c.beta.has_value()) throw ConfigError("alpha and beta must be set together");
  if (c.alpha && !(*c.alpha > 0.0 && *c.beta > 0.0)) throw ConfigError("alpha and beta must be > 0");
  if (c.mode == SupervisionMode::Supervised && !c.train_pairs)
    throw ConfigError("supervised mode needs train_pairs");
  return c;
}

inline PipelineConfig load_config(const std::optional<std::filesystem::path>& file,
                                  const std::vector<std::string>& sets = {}) {
  ConfigMap m = file ? read_config_file(*file) : ConfigMap{};
  apply_overrides(m, sets);
  return make_config(m);
}

}  // namespace sotead
