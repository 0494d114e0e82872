#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "sotead/error.hpp"
#include "sotead/io.hpp"
#include "sotead/kg.hpp"
#include "sotead/matrix.hpp"
#include "sotead/random.hpp"
#include "sotead/text.hpp"

namespace sotead {

// Two mean-aggregation layers shared by both KGs: input d -> hidden h -> output e.
struct EncoderParams {
  Matrix w1;                // h x d
  std::vector<double> b1;   // h
  Matrix w2;                // e x h
  std::vector<double> b2;   // e

  std::size_t input_dim() const { return w1.cols(); }
  std::size_t hidden_dim() const { return w1.rows(); }
  std::size_t output_dim() const { return w2.rows(); }
  // Width of an enhanced embedding: learned part plus the textual residual.
  std::size_t embedding_dim() const { return output_dim() + input_dim(); }

  static EncoderParams zeros(std::size_t d, std::size_t h, std::size_t e) {
    return {Matrix(h, d), std::vector<double>(h, 0.0), Matrix(e, h), std::vector<double>(e, 0.0)};
  }

  // Glorot-uniform weights, zero biases.
  static EncoderParams random(std::size_t d, std::size_t h, std::size_t e, std::mt19937_64& rng) {
    auto p = zeros(d, h, e);
    auto fill = [&](Matrix& w) {
      const double a = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
      std::uniform_real_distribution<double> u(-a, a);
      for (auto& x : w.data()) x = u(rng);
    };
    fill(p.w1);
    fill(p.w2);
    return p;
  }

  std::size_t parameter_count() const {
    return w1.data().size() + b1.size() + w2.data().size() + b2.size();
  }

  // Visits every scalar parameter in a fixed order.
  template <class F>
  void for_each(F&& f) {
    for (auto& x : w1.data()) f(x);
    for (auto& x : b1) f(x);
    for (auto& x : w2.data()) f(x);
    for (auto& x : b2) f(x);
  }

  std::vector<double> flatten() const {
    std::vector<double> out;
    out.reserve(parameter_count());
    const_cast<EncoderParams*>(this)->for_each([&](double& x) { out.push_back(x); });
    return out;
  }

  bool all_finite() const {
    bool ok = true;
    const_cast<EncoderParams*>(this)->for_each([&](double& x) { ok = ok && std::isfinite(x); });
    return ok;
  }

  friend bool operator==(const EncoderParams&, const EncoderParams&) = default;
};

// Row i is the textual residual concatenated after the learned part.
using EnhancedEmbeddings = Matrix;

namespace detail {

// Mean over {i} and its neighbours.
class MeanAggregator {
 public:
  explicit MeanAggregator(const KnowledgeGraph& kg) : adj_(&kg.adjacency()) {}

  Matrix forward(const Matrix& x) const {
    Matrix out(x.rows(), x.cols());
    for (std::size_t i = 0; i < x.rows(); ++i) {
      auto dst = out.row(i);
      auto self = x.row(i);
      std::copy(self.begin(), self.end(), dst.begin());
      for (auto k : (*adj_)[i]) {
        auto src = x.row(static_cast<std::size_t>(k));
        for (std::size_t c = 0; c < dst.size(); ++c) dst[c] += src[c];
      }
      const double inv = 1.0 / static_cast<double>((*adj_)[i].size() + 1);
      for (auto& v : dst) v *= inv;
    }
    return out;
  }

  // Adjoint of forward().
  Matrix backward(const Matrix& g) const {
    Matrix out(g.rows(), g.cols());
    for (std::size_t i = 0; i < g.rows(); ++i) {
      const double inv = 1.0 / static_cast<double>((*adj_)[i].size() + 1);
      auto gi = g.row(i);
      auto add = [&](std::size_t k) {
        auto dst = out.row(k);
        for (std::size_t c = 0; c < dst.size(); ++c) dst[c] += gi[c] * inv;
      };
      add(i);
      for (auto k : (*adj_)[i]) add(static_cast<std::size_t>(k));
    }
    return out;
  }

 private:
  const std::vector<std::vector<EntityId>>* adj_;
};

}  // namespace detail

// Intermediate activations kept for back-propagation.
struct EncoderTrace {
  Matrix input, agg0, pre1, hidden, agg1, pre2, unit;
  std::vector<double> norms;
  EnhancedEmbeddings output;
};

inline EncoderTrace encode_traced(const KnowledgeGraph& kg, const Matrix& names,
                                  const EncoderParams& params) {
  if (names.cols() != params.input_dim())
    throw ShapeError("encoder expects input dimension " + std::to_string(params.input_dim()) +
                     ", names have " + std::to_string(names.cols()));
  if (names.rows() != kg.size()) throw ShapeError("one name embedding row per entity required");
  detail::MeanAggregator agg(kg);
  EncoderTrace t;
  t.input = names;
  t.agg0 = agg.forward(names);
  t.pre1 = affine(t.agg0, params.w1, params.b1);
  t.hidden = t.pre1;
  for (auto& v : t.hidden.data()) v = std::max(v, 0.0);
  t.agg1 = agg.forward(t.hidden);
  t.pre2 = affine(t.agg1, params.w2, params.b2);
  t.unit = t.pre2;
  t.norms.resize(t.unit.rows());
  for (std::size_t i = 0; i < t.unit.rows(); ++i) {
    auto r = t.unit.row(i);
    double n = 0.0;
    for (auto v : r) n += v * v;
    n = std::sqrt(n);
    t.norms[i] = n;
    if (n > 0.0)
      for (auto& v : r) v /= n;
  }
  const std::size_t e = params.output_dim(), d = params.input_dim();
  t.output = Matrix(names.rows(), e + d);
  for (std::size_t i = 0; i < names.rows(); ++i) {
    auto dst = t.output.row(i);
    auto u = t.unit.row(i);
    auto x = names.row(i);
    std::copy(u.begin(), u.end(), dst.begin());
    std::copy(x.begin(), x.end(), dst.begin() + static_cast<std::ptrdiff_t>(e));
  }
  return t;
}

inline EnhancedEmbeddings encode(const KnowledgeGraph& kg, const NameEmbeddings& names,
                                 const EncoderParams& params) {
  return encode_traced(kg, names.vectors, params).output;
}

// Accumulates d(loss)/d(params) into `grad` given d(loss)/d(output).
inline void encoder_backward(const KnowledgeGraph& kg, const EncoderTrace& t,
                             const EncoderParams& params, const Matrix& grad_output,
                             EncoderParams& grad) {
  const std::size_t n = t.output.rows(), e = params.output_dim(), h = params.hidden_dim();
  detail::MeanAggregator agg(kg);

  Matrix d_pre2(n, e);
  for (std::size_t i = 0; i < n; ++i) {
    if (t.norms[i] == 0.0) continue;
    auto g = grad_output.row(i).first(e);
    auto u = t.unit.row(i);
    double proj = 0.0;
    for (std::size_t c = 0; c < e; ++c) proj += u[c] * g[c];
    for (std::size_t c = 0; c < e; ++c) d_pre2(i, c) = (g[c] - u[c] * proj) / t.norms[i];
  }

  Matrix d_agg1(n, h);
  for (std::size_t i = 0; i < n; ++i) {
    auto a = t.agg1.row(i);
    for (std::size_t o = 0; o < e; ++o) {
      const double g = d_pre2(i, o);
      if (g == 0.0) continue;
      grad.b2[o] += g;
      auto gw = grad.w2.row(o);
      auto w = params.w2.row(o);
      for (std::size_t k = 0; k < h; ++k) {
        gw[k] += g * a[k];
        d_agg1(i, k) += g * w[k];
      }
    }
  }

  Matrix d_pre1 = agg.backward(d_agg1);
  for (std::size_t idx = 0; idx < d_pre1.data().size(); ++idx)
    if (!(t.pre1.data()[idx] > 0.0)) d_pre1.data()[idx] = 0.0;

  const std::size_t d = params.input_dim();
  for (std::size_t i = 0; i < n; ++i) {
    auto a = t.agg0.row(i);
    for (std::size_t o = 0; o < h; ++o) {
      const double g = d_pre1(i, o);
      if (g == 0.0) continue;
      grad.b1[o] += g;
      auto gw = grad.w1.row(o);
      for (std::size_t k = 0; k < d; ++k) gw[k] += g * a[k];
    }
  }
}

inline double manhattan_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size())
    throw ShapeError("manhattan_distance: lengths " + std::to_string(a.size()) + " and " +
                     std::to_string(b.size()));
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += std::abs(a[k] - b[k]);
  return s;
}

// Replacement entities for one anchor pair: negatives are (i', j) for every
// i' in `kg1` and (i, j') for every j' in `kg2`.
struct NegativeSampleSet {
  EntityPair anchor;
  std::vector<EntityId> kg1;
  std::vector<EntityId> kg2;
};

// The `k` rows of `emb` nearest to row `self` (Manhattan), excluding `self`.
// Ties go to the smaller id.
inline std::vector<EntityId> nearest_within(const Matrix& emb, EntityId self, std::size_t k) {
  std::vector<std::pair<double, EntityId>> d;
  d.reserve(emb.rows());
  auto ref = emb.row(static_cast<std::size_t>(self));
  for (std::size_t r = 0; r < emb.rows(); ++r) {
    if (static_cast<EntityId>(r) == self) continue;
    d.emplace_back(manhattan_distance(ref, emb.row(r)), static_cast<EntityId>(r));
  }
  const std::size_t take = std::min(k, d.size());
  std::partial_sort(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(take), d.end());
  std::vector<EntityId> out(take);
  for (std::size_t t = 0; t < take; ++t) out[t] = d[t].second;
  return out;
}

inline NegativeSampleSet sample_negatives(EntityPair anchor, const EnhancedEmbeddings& emb1,
                                          const EnhancedEmbeddings& emb2, std::size_t k) {
  if (k == 0) throw ConfigError("negatives_per_pair must be >= 1");
  return {anchor, nearest_within(emb1, anchor.first, k), nearest_within(emb2, anchor.second, k)};
}

// Memoizes nearest_within per entity for one embedding snapshot.
class NegativeSampler {
 public:
  NegativeSampler(const EnhancedEmbeddings& emb1, const EnhancedEmbeddings& emb2, std::size_t k)
      : emb1_(&emb1), emb2_(&emb2), k_(k), cache1_(emb1.rows()), cache2_(emb2.rows()),
        done1_(emb1.rows(), false), done2_(emb2.rows(), false) {
    if (k == 0) throw ConfigError("negatives_per_pair must be >= 1");
  }

  NegativeSampleSet operator()(EntityPair a) {
    return {a, lookup(*emb1_, a.first, cache1_, done1_), lookup(*emb2_, a.second, cache2_, done2_)};
  }

  std::vector<NegativeSampleSet> operator()(const std::vector<EntityPair>& anchors) {
    std::vector<NegativeSampleSet> out;
    out.reserve(anchors.size());
    for (auto a : anchors) out.push_back((*this)(a));
    return out;
  }

 private:
  const std::vector<EntityId>& lookup(const Matrix& emb, EntityId id,
                                      std::vector<std::vector<EntityId>>& cache,
                                      std::vector<bool>& done) {
    const auto i = static_cast<std::size_t>(id);
    if (!done[i]) {
      cache[i] = nearest_within(emb, id, k_);
      done[i] = true;
    }
    return cache[i];
  }

  const Matrix* emb1_;
  const Matrix* emb2_;
  std::size_t k_;
  std::vector<std::vector<EntityId>> cache1_, cache2_;
  std::vector<bool> done1_, done2_;
};

// Gradients of a loss with respect to both embedding matrices.
struct EmbeddingGrad {
  Matrix kg1, kg2;
};

namespace detail {

inline void add_manhattan_grad(std::span<const double> a, std::span<const double> b,
                               double scale, std::span<double> ga, std::span<double> gb) {
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double s = a[k] > b[k] ? scale : (a[k] < b[k] ? -scale : 0.0);
    ga[k] += s;
    gb[k] -= s;
  }
}

}  // namespace detail

// Sum over anchors of weight * sum over negatives of
// max(d(i, j) - d(i', j') + margin, 0). Gradients are accumulated when `grad` is set.
inline double weighted_hinge_loss(std::span<const NegativeSampleSet> negs,
                                  std::span<const double> weights, const EnhancedEmbeddings& emb1,
                                  const EnhancedEmbeddings& emb2, double margin,
                                  EmbeddingGrad* grad = nullptr) {
  double total = 0.0;
  for (std::size_t a = 0; a < negs.size(); ++a) {
    const double w = weights[a];
    if (w == 0.0) continue;
    const auto [i, j] = negs[a].anchor;
    auto ei = emb1.row(static_cast<std::size_t>(i));
    auto ej = emb2.row(static_cast<std::size_t>(j));
    const double pos = manhattan_distance(ei, ej);
    double sum = 0.0;
    auto term = [&](std::size_t i2, std::size_t j2) {
      auto ni = emb1.row(i2);
      auto nj = emb2.row(j2);
      const double arg = pos - manhattan_distance(ni, nj) + margin;
      if (arg <= 0.0) return;
      sum += arg;
      if (grad) {
        detail::add_manhattan_grad(ei, ej, w, grad->kg1.row(static_cast<std::size_t>(i)),
                                   grad->kg2.row(static_cast<std::size_t>(j)));
        detail::add_manhattan_grad(ni, nj, -w, grad->kg1.row(i2), grad->kg2.row(j2));
      }
    };
    for (auto i2 : negs[a].kg1) term(static_cast<std::size_t>(i2), static_cast<std::size_t>(j));
    for (auto j2 : negs[a].kg2) term(static_cast<std::size_t>(i), static_cast<std::size_t>(j2));
    total += w * sum;
  }
  return total;
}

// L_a: unit-weight hinge over the pseudo pairs. `negs[k]` belongs to pairs[k].
inline double alignment_loss(std::span<const NegativeSampleSet> negs, const EnhancedEmbeddings& emb1,
                             const EnhancedEmbeddings& emb2, double margin,
                             EmbeddingGrad* grad = nullptr) {
  std::vector<double> w(negs.size(), 1.0);
  return weighted_hinge_loss(negs, w, emb1, emb2, margin, grad);
}

// Loss weight of a candidate pair; anti-correlated names get weight 0.
inline double refining_pair_weight(const SimilarityMatrix& s, EntityPair p) {
  return std::max(s(static_cast<std::size_t>(p.first), static_cast<std::size_t>(p.second)), 0.0);
}

// L_g: the hinge over top-N textual candidates, weighted by their cosine.
inline double refining_loss(std::span<const NegativeSampleSet> negs, const SimilarityMatrix& s,
                            const EnhancedEmbeddings& emb1, const EnhancedEmbeddings& emb2,
                            double margin, EmbeddingGrad* grad = nullptr) {
  std::vector<double> w(negs.size());
  for (std::size_t a = 0; a < negs.size(); ++a) w[a] = refining_pair_weight(s, negs[a].anchor);
  return weighted_hinge_loss(negs, w, emb1, emb2, margin, grad);
}

struct TrainingConfig {
  double margin = 3.0;
  std::size_t negatives_per_pair = 5;
  std::size_t top_n = 3;
  double w0 = 0.3;
  double decay_fraction = 0.25;
  double learning_rate = 1e-3;
  std::size_t total_steps = 1000;
  std::uint64_t seed = 0;
  std::size_t hidden_dim = 0;  // 0: same as the input dimension
  std::size_t output_dim = 0;  // 0: same as the input dimension

  void validate() const {
    if (!(margin > 0.0)) throw ConfigError("margin must be > 0");
    if (negatives_per_pair == 0) throw ConfigError("negatives_per_pair must be >= 1");
    if (top_n == 0) throw ConfigError("top_n must be >= 1");
    if (!(w0 >= 0.0)) throw ConfigError("w0 must be >= 0");
    if (!(decay_fraction > 0.0 && decay_fraction <= 1.0))
      throw ConfigError("decay_fraction must lie in (0, 1]");
    if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
    if (total_steps == 0) throw ConfigError("total_steps must be >= 1");
  }
};

// w(t): linear decay from w0 to 0 at decay_fraction * total_steps.
inline double refining_weight(std::size_t step, const TrainingConfig& cfg) {
  const double horizon = cfg.decay_fraction * static_cast<double>(cfg.total_steps);
  return cfg.w0 * std::max(0.0, 1.0 - static_cast<double>(step) / horizon);
}

// Everything the combined loss needs besides the parameters.
struct TrainingProblem {
  const KnowledgeGraph* kg1;
  const KnowledgeGraph* kg2;
  const Matrix* names1;
  const Matrix* names2;
  const SimilarityMatrix* similarity;
  std::vector<EntityPair> anchors;     // P, possibly augmented with supervised pairs
  std::vector<EntityPair> candidates;  // Q
};

struct LossValue {
  double alignment = 0.0;
  double refining = 0.0;
  double total = 0.0;
};

// L = L_a + weight * L_g for fixed negatives, with its parameter gradient.
inline LossValue combined_loss(const TrainingProblem& prob, const EncoderParams& params,
                               std::span<const NegativeSampleSet> anchor_negs,
                               std::span<const NegativeSampleSet> candidate_negs,
                               double refine_weight, double margin, EncoderParams* grad = nullptr) {
  const auto t1 = encode_traced(*prob.kg1, *prob.names1, params);
  const auto t2 = encode_traced(*prob.kg2, *prob.names2, params);
  LossValue v;
  if (!grad) {
    v.alignment = alignment_loss(anchor_negs, t1.output, t2.output, margin);
    v.refining = refine_weight == 0.0
                     ? 0.0
                     : refining_loss(candidate_negs, *prob.similarity, t1.output, t2.output, margin);
    v.total = v.alignment + refine_weight * v.refining;
    return v;
  }
  EmbeddingGrad g{Matrix(t1.output.rows(), t1.output.cols()),
                  Matrix(t2.output.rows(), t2.output.cols())};
  v.alignment = alignment_loss(anchor_negs, t1.output, t2.output, margin, &g);
  if (refine_weight != 0.0) {
    EmbeddingGrad gr{Matrix(g.kg1.rows(), g.kg1.cols()), Matrix(g.kg2.rows(), g.kg2.cols())};
    v.refining = refining_loss(candidate_negs, *prob.similarity, t1.output, t2.output, margin, &gr);
    for (std::size_t k = 0; k < g.kg1.data().size(); ++k) g.kg1.data()[k] += refine_weight * gr.kg1.data()[k];
    for (std::size_t k = 0; k < g.kg2.data().size(); ++k) g.kg2.data()[k] += refine_weight * gr.kg2.data()[k];
  }
  v.total = v.alignment + refine_weight * v.refining;
  *grad = EncoderParams::zeros(params.input_dim(), params.hidden_dim(), params.output_dim());
  encoder_backward(*prob.kg1, t1, params, g.kg1, *grad);
  encoder_backward(*prob.kg2, t2, params, g.kg2, *grad);
  return v;
}

struct TrainingResult {
  EncoderParams params;
  EnhancedEmbeddings kg1, kg2;
  std::vector<double> loss_history;  // total loss at each step, before the update
  std::size_t steps = 0;
  bool skipped = false;  // fewer than two anchors: kg1/kg2 are the raw name embeddings
};

inline TrainingResult train(const TrainingProblem& prob, const TrainingConfig& cfg) {
  cfg.validate();
  const std::size_t d = prob.names1->cols();
  if (prob.names2->cols() != d) throw ShapeError("name embeddings of both KGs must share a dimension");
  const std::size_t h = cfg.hidden_dim ? cfg.hidden_dim : d;
  const std::size_t e = cfg.output_dim ? cfg.output_dim : d;
  auto rng = substream(cfg.seed, "train");
  TrainingResult res;
  res.params = EncoderParams::random(d, h, e, rng);

  if (prob.anchors.size() >= 2) {
    EncoderParams grad;
    for (std::size_t step = 0; step < cfg.total_steps; ++step) {
      const auto e1 = encode_traced(*prob.kg1, *prob.names1, res.params).output;
      const auto e2 = encode_traced(*prob.kg2, *prob.names2, res.params).output;
      const double w = refining_weight(step, cfg);
      NegativeSampler sampler(e1, e2, cfg.negatives_per_pair);
      const auto anchor_negs = sampler(prob.anchors);
      const auto cand_negs =
          w == 0.0 ? std::vector<NegativeSampleSet>{} : sampler(prob.candidates);
      const auto loss = combined_loss(prob, res.params, anchor_negs, cand_negs, w, cfg.margin, &grad);
      if (!std::isfinite(loss.total))
        throw TrainingError("non-finite loss at step " + std::to_string(step) +
                            "; lower the learning rate");
      res.loss_history.push_back(loss.total);
      auto g = grad.flatten();
      std::size_t k = 0;
      res.params.for_each([&](double& x) { x -= cfg.learning_rate * g[k++]; });
      if (!res.params.all_finite())
        throw TrainingError("non-finite parameters at step " + std::to_string(step) +
                            "; lower the learning rate");
      ++res.steps;
    }
  } else {
    // Too few anchors to learn from: the raw name embeddings pass through.
    res.skipped = true;
    res.kg1 = *prob.names1;
    res.kg2 = *prob.names2;
    return res;
  }
  res.kg1 = encode_traced(*prob.kg1, *prob.names1, res.params).output;
  res.kg2 = encode_traced(*prob.kg2, *prob.names2, res.params).output;
  return res;
}

struct CheckpointInfo {
  std::uint64_t seed = 0;
  std::size_t steps = 0;
};

// JSON document carrying shapes, seed, step count and the tensors. Doubles are
// written in shortest round-trip form, so reloading is bitwise exact.
inline void save_checkpoint(const std::filesystem::path& path, const EncoderParams& p,
                            const CheckpointInfo& info) {
  nlohmann::json j;
  j["format"] = "sotead-encoder";
  j["version"] = 1;
  j["input_dim"] = p.input_dim();
  j["hidden_dim"] = p.hidden_dim();
  j["output_dim"] = p.output_dim();
  j["seed"] = info.seed;
  j["steps"] = info.steps;
  j["w1"] = p.w1.data();
  j["b1"] = p.b1;
  j["w2"] = p.w2.data();
  j["b2"] = p.b2;
  io::open_out(path) << j.dump() << '\n';
}

inline EncoderParams load_checkpoint(const std::filesystem::path& path,
                                     CheckpointInfo* info = nullptr) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(io::read_file(path));
  } catch (const nlohmann::json::exception& ex) {
    throw ParseError(path.string(), 0, ex.what());
  }
  if (j.value("format", "") != "sotead-encoder") throw ParseError(path.string(), 0, "not an encoder checkpoint");
  const auto d = j.at("input_dim").get<std::size_t>();
  const auto h = j.at("hidden_dim").get<std::size_t>();
  const auto e = j.at("output_dim").get<std::size_t>();
  auto p = EncoderParams::zeros(d, h, e);
  p.w1.data() = j.at("w1").get<std::vector<double>>();
  p.b1 = j.at("b1").get<std::vector<double>>();
  p.w2.data() = j.at("w2").get<std::vector<double>>();
  p.b2 = j.at("b2").get<std::vector<double>>();
  if (p.w1.data().size() != h * d || p.b1.size() != h || p.w2.data().size() != e * h ||
      p.b2.size() != e)
    throw ShapeError("checkpoint tensors do not match their declared shapes");
  if (info) *info = {j.value("seed", std::uint64_t{0}), j.value("steps", std::size_t{0})};
  return p;
}

}  // namespace sotead
