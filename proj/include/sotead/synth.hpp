#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "sotead/error.hpp"
#include "sotead/io.hpp"
#include "sotead/kg.hpp"
#include "sotead/random.hpp"

namespace sotead {

// Synthetic KG pair: a shared base graph copied into both KGs, plus dangling
// entities of each side attached to random entities of their own KG.
// Every entity owns one name token. Latent token vectors are drawn around
// `topics` random centres (spread `topic_spread`, unit scale per vector).
// Counterpart tokens are the same latent vector with independent Gaussian
// noise of scale sigma * u, u ~ U(0, 2) per pair, so a few pairs stay
// near-identical while others drift apart.
struct SynthParams {
  std::size_t matchable = 100;
  std::size_t dangling1 = 20;
  std::size_t dangling2 = 20;
  std::size_t dim = 32;
  std::size_t degree = 4;       // mean degree of the base graph
  double edge_keep = 0.9;       // chance each base edge survives in a KG
  double sigma = 0.15;
  std::size_t topics = 8;
  double topic_spread = 0.2;
  // Dangling entities of KG1 take the first half of the topics, those of KG2
  // the second half; otherwise both sides draw from every topic.
  bool split_dangling_topics = true;
  double train_fraction = 0.3;  // share of gold pairs written to train_pairs.tsv
  std::uint64_t seed = 0;

  void validate() const {
    if (matchable + dangling1 < 2 || matchable + dangling2 < 2) throw ConfigError("each KG needs at least 2 entities");
    if (dim == 0) throw ConfigError("dim must be >= 1");
    if (topics == 0) throw ConfigError("topics must be >= 1");
    if (!(topic_spread >= 0.0)) throw ConfigError("topic_spread must be >= 0");
    if (!(sigma >= 0.0)) throw ConfigError("sigma must be >= 0");
    if (!(edge_keep >= 0.0 && edge_keep <= 1.0)) throw ConfigError("edge_keep must lie in [0, 1]");
    if (!(train_fraction >= 0.0 && train_fraction <= 1.0)) throw ConfigError("train_fraction must lie in [0, 1]");
  }
};

struct SynthFiles {
  std::filesystem::path dir, config;
};

namespace detail {

struct SynthSide {
  std::vector<std::size_t> slot_of;  // latent index -> entity id
  std::vector<std::string> keys, names;
  std::vector<std::array<std::size_t, 3>> triples;  // head id, relation, tail id
};

}  // namespace detail

// Writes kg{1,2}_{triples,names}.tsv, vectors.txt, gold_pairs.tsv,
// train_pairs.tsv and a ready-to-run sot.cfg into `dir`.
inline SynthFiles synthesize(const SynthParams& p, const std::filesystem::path& dir) {
  p.validate();
  auto rng = substream(p.seed, "synth");
  std::normal_distribution<double> gauss;
  std::uniform_real_distribution<double> unit;
  constexpr std::size_t kRelations = 4;

  // Base graph over the matchable entities.
  std::vector<std::pair<std::size_t, std::size_t>> base;
  if (p.matchable >= 2) {
    const std::size_t per = std::max<std::size_t>(1, p.degree / 2);
    for (std::size_t a = 0; a < p.matchable; ++a)
      for (std::size_t t = 0; t < per; ++t) {
        std::size_t b = rng() % (p.matchable - 1);
        if (b >= a) ++b;
        base.emplace_back(a, b);
      }
  }
  std::vector<std::size_t> base_rel(base.size());
  for (auto& r : base_rel) r = rng() % kRelations;

  auto make_side = [&](int side, std::size_t dangling) {
    detail::SynthSide s;
    const std::size_t n = p.matchable + dangling;
    s.slot_of.resize(n);
    std::iota(s.slot_of.begin(), s.slot_of.end(), 0);
    std::shuffle(s.slot_of.begin(), s.slot_of.end(), rng);
    s.keys.resize(n);
    s.names.resize(n);
    const std::string tag = side == 1 ? "en" : "fr";
    for (std::size_t latent = 0; latent < n; ++latent) {
      const auto id = s.slot_of[latent];
      s.keys[id] = "kg" + std::to_string(side) + ":e" + std::to_string(id);
      s.names[id] = latent < p.matchable ? tag + std::to_string(latent)
                                         : tag + "x" + std::to_string(latent - p.matchable);
    }
    for (std::size_t e = 0; e < base.size(); ++e)
      if (unit(rng) < p.edge_keep)
        s.triples.push_back({s.slot_of[base[e].first], base_rel[e], s.slot_of[base[e].second]});
    for (std::size_t d = 0; d < dangling; ++d) {
      const auto self = s.slot_of[p.matchable + d];
      for (int t = 0; t < 2; ++t) {
        std::size_t other = rng() % (n - 1);
        if (other >= self) ++other;
        s.triples.push_back({self, rng() % kRelations, other});
      }
    }
    return s;
  };
  const auto s1 = make_side(1, p.dangling1);
  const auto s2 = make_side(2, p.dangling2);

  std::filesystem::create_directories(dir);
  auto write_side = [&](const detail::SynthSide& s, const std::string& prefix) {
    auto names = io::open_out(dir / (prefix + "_names.tsv"));
    for (std::size_t id = 0; id < s.keys.size(); ++id) names << s.keys[id] << '\t' << s.names[id] << '\n';
    auto triples = io::open_out(dir / (prefix + "_triples.tsv"));
    for (const auto& t : s.triples)
      triples << s.keys[t[0]] << "\tr" << t[1] << '\t' << s.keys[t[2]] << '\n';
  };
  write_side(s1, "kg1");
  write_side(s2, "kg2");

  auto vectors = io::open_out(dir / "vectors.txt");
  auto emit = [&](const std::string& token, const std::vector<double>& v) {
    vectors << token;
    for (double x : v) vectors << ' ' << io::format_double(x);
    vectors << '\n';
  };
  // Coordinates are scaled by 1/sqrt(dim) so vectors have norm around 1.
  const double unit_scale = 1.0 / std::sqrt(static_cast<double>(p.dim));
  std::vector<std::vector<double>> centres(p.topics, std::vector<double>(p.dim));
  for (auto& c : centres)
    for (auto& x : c) x = gauss(rng) * unit_scale;
  std::vector<double> z(p.dim), v(p.dim);
  auto latent = [&](std::size_t first, std::size_t count) {
    const auto& c = centres[first + rng() % count];
    for (std::size_t k = 0; k < p.dim; ++k) z[k] = c[k] + p.topic_spread * unit_scale * gauss(rng);
  };
  for (std::size_t k = 0; k < p.matchable; ++k) {
    latent(0, p.topics);
    const double scale = p.sigma * 2.0 * unit(rng) * unit_scale;
    for (const char* tag : {"en", "fr"}) {
      for (std::size_t c = 0; c < p.dim; ++c) v[c] = z[c] + scale * gauss(rng);
      emit(tag + std::to_string(k), v);
    }
  }
  const bool split = p.split_dangling_topics && p.topics >= 2;
  const std::size_t half = p.topics / 2;
  for (int side = 1; side <= 2; ++side)
    for (std::size_t d = 0; d < (side == 1 ? p.dangling1 : p.dangling2); ++d) {
      if (!split) latent(0, p.topics);
      else if (side == 1) latent(0, half);
      else latent(half, p.topics - half);
      emit((side == 1 ? "enx" : "frx") + std::to_string(d), z);
    }

  std::vector<std::size_t> order(p.matchable);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_train = static_cast<std::size_t>(p.train_fraction * static_cast<double>(p.matchable));
  auto gold = io::open_out(dir / "gold_pairs.tsv");
  auto train = io::open_out(dir / "train_pairs.tsv");
  for (std::size_t k = 0; k < p.matchable; ++k) {
    const auto line = s1.keys[s1.slot_of[k]] + '\t' + s2.keys[s2.slot_of[k]] + '\n';
    gold << line;
  }
  for (std::size_t r = 0; r < n_train; ++r)
    train << s1.keys[s1.slot_of[order[r]]] << '\t' << s2.keys[s2.slot_of[order[r]]] << '\n';

  SynthFiles files{dir, dir / "sot.cfg"};
  auto cfg = io::open_out(files.config);
  cfg << "# synthetic KG pair, seed " << p.seed << ", sigma " << io::format_double(p.sigma) << "\n"
      << "kg1_triples = kg1_triples.tsv\n"
      << "kg1_names = kg1_names.tsv\n"
      << "kg2_triples = kg2_triples.tsv\n"
      << "kg2_names = kg2_names.tsv\n"
      << "word_vectors = vectors.txt\n"
      << "gold_pairs = gold_pairs.tsv\n"
      << "train_pairs = train_pairs.tsv\n"
      << "seed = " << p.seed << "\n";
  return files;
}

}  // namespace sotead
