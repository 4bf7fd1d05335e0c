#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "seft/data/types.hpp"
#include "seft/encoding.hpp"
#include "seft/errors.hpp"
#include "seft/model/config.hpp"
#include "seft/numerics/matrix.hpp"
#include "seft/numerics/mlp.hpp"
#include "seft/numerics/parameters.hpp"
#include "seft/numerics/tape.hpp"
#include "seft/random.hpp"
#include "seft/training/loss.hpp"

namespace seft {

using Logits = std::vector<double>;

/// Observations sorted by (t, m, z) together with the original positions:
/// sorted[k] == input[order[k]].
struct CanonicalSet {
  std::vector<Observation> sorted;
  std::vector<std::size_t> order;
};

inline CanonicalSet canonicalize(std::span<const Observation> obs) {
  CanonicalSet c;
  c.order.resize(obs.size());
  std::iota(c.order.begin(), c.order.end(), std::size_t{0});
  std::stable_sort(c.order.begin(), c.order.end(),
                   [&](std::size_t a, std::size_t b) { return canonical_less(obs[a], obs[b]); });
  c.sorted.reserve(obs.size());
  for (std::size_t i : c.order) c.sorted.push_back(obs[i]);
  return c;
}

/// SeFT / SeFT-Attn parameters plus the graph that evaluates them.
class SeftModel {
 public:
  /// Nodes of one evaluation. `attention` holds one M×1 weight column per
  /// head (canonical row order); empty for mean/sum/max aggregation.
  struct Graph {
    NodeId embeddings = 0;
    NodeId representation = 0;
    NodeId logits = 0;
    std::vector<NodeId> attention;
    std::vector<NodeId> attention_logits;
  };

  SeftModel(ModelSpec spec, std::uint64_t seed) : spec_(std::move(spec)) {
    Rng init(seed);
    h_ = Mlp(spec_.set.h, params_, "h", init);
    if (spec_.attention) {
      const AttentionSpec& a = *spec_.attention;
      summary_h_ = Mlp(a.summary_h, params_, "fprime.h", init);
      summary_g_ = Mlp(a.summary_g, params_, "fprime.g", init);
      const std::size_t key_in = a.summary_width() + spec_.feature_width();
      for (std::size_t i = 0; i < a.heads; ++i) {
        key_weights_.push_back(params_.add("attn.W" + std::to_string(i),
                                           glorot_uniform(key_in, a.dot_prod_dim, init)));
      }
      // Zero queries: every head starts as the unweighted mean.
      queries_ = params_.add("attn.Q", Matrix(a.heads, a.dot_prod_dim));
    }
    g_ = Mlp(spec_.set.g, params_, "g", init);
  }

  const ModelSpec& spec() const noexcept { return spec_; }
  ParameterSet& params() noexcept { return params_; }
  const ParameterSet& params() const noexcept { return params_; }

  const Mlp& h() const noexcept { return h_; }
  const Mlp& g() const noexcept { return g_; }
  const Mlp& summary_h() const noexcept { return summary_h_; }
  const Mlp& summary_g() const noexcept { return summary_g_; }
  ParamId key_weight(std::size_t head) const { return key_weights_.at(head); }
  ParamId queries() const {
    if (!spec_.attention) throw ConfigError("model has no attention queries");
    return queries_;
  }

  /// Replaces all parameters; names and shapes must match this architecture.
  void load_parameters(const ParameterSet& p) {
    if (!params_.same_layout(p)) throw CompatibilityError("parameter shapes do not match this architecture");
    for (ParamId i = 0; i < p.size(); ++i) {
      if (p.name(i) != params_.name(i)) {
        throw CompatibilityError("parameter '" + p.name(i) + "' does not match '" + params_.name(i) + "'");
      }
      params_[i] = p[i];
    }
  }

  Matrix features(std::span<const Observation> canonical) const {
    return featurize_all(canonical, spec_.encoding, spec_.modalities);
  }

  /// Records the forward pass over `features` (rows = observations in
  /// canonical order). Train mode applies dropout and attention dropout.
  Graph build(Tape& tape, const Matrix& features, Mode mode, Rng* rng = nullptr) const {
    if (features.rows() == 0) throw ValidationError("a time series needs at least one observation");
    if (features.cols() != spec_.feature_width()) {
      throw ShapeError("feature width " + std::to_string(features.cols()) + ", model expects " +
                       std::to_string(spec_.feature_width()));
    }
    Graph graph;
    const NodeId x = tape.constant(features);
    graph.embeddings = h_.forward(tape, params_, x, mode, rng);
    switch (spec_.set.aggregation) {
      case Aggregation::mean: graph.representation = tape.mean_rows(graph.embeddings); break;
      case Aggregation::sum: graph.representation = tape.sum_rows(graph.embeddings); break;
      case Aggregation::max: graph.representation = tape.max_rows(graph.embeddings); break;
      case Aggregation::attention: build_attention(tape, x, mode, rng, graph); break;
    }
    graph.logits = g_.forward(tape, params_, graph.representation, mode, rng);
    return graph;
  }

 private:
  void build_attention(Tape& tape, NodeId x, Mode mode, Rng* rng, Graph& graph) const {
    const AttentionSpec& a = *spec_.attention;
    const std::size_t m = tape.value(x).rows();
    const NodeId summary_elems = summary_h_.forward(tape, params_, x, mode, rng);
    const NodeId summary = summary_g_.forward(tape, params_, tape.mean_rows(summary_elems), mode, rng);
    const NodeId keyed_input = tape.concat_cols({tape.tile_rows(summary, m), x});
    const NodeId q = tape.parameter(params_, queries_);
    const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(a.dot_prod_dim));

    std::vector<NodeId> heads;
    for (std::size_t i = 0; i < a.heads; ++i) {
      // e_j = ([f'(S), s_j] W_i) · Q_i / sqrt(d), evaluated as [f'(S), s_j] (W_i Q_iᵀ)
      // so no M×d key matrix is materialized.
      const NodeId projected_query =
          tape.matmul(tape.parameter(params_, key_weights_[i]), tape.transpose(tape.select_row(q, i)));
      const NodeId logits = tape.scale(tape.matmul(keyed_input, projected_query), inv_sqrt_d);
      NodeId weights = tape.softmax_column(logits);
      if (mode == Mode::train && a.dropout > 0.0) {
        if (rng == nullptr) throw ArgumentError("train-mode attention dropout needs a generator");
        std::vector<double> keep(m);
        for (double& k : keep) k = rng->uniform() < a.dropout ? 0.0 : 1.0;
        weights = tape.mask_renormalize(weights, std::move(keep));
      }
      graph.attention_logits.push_back(logits);
      graph.attention.push_back(weights);
      heads.push_back(tape.weighted_sum_rows(weights, graph.embeddings));
    }
    graph.representation = tape.concat_cols(heads);
  }

  ModelSpec spec_;
  ParameterSet params_;
  Mlp h_;
  Mlp g_;
  Mlp summary_h_;
  Mlp summary_g_;
  std::vector<ParamId> key_weights_;
  ParamId queries_ = 0;
};

/// Elementwise reduction of per-observation embeddings (rows).
inline std::vector<double> aggregate(const Matrix& embeddings, Aggregation kind) {
  if (embeddings.rows() == 0) throw ValidationError("aggregation over an empty set");
  Tape tape(false);
  const NodeId e = tape.constant(embeddings);
  switch (kind) {
    case Aggregation::mean: return tape.value(tape.mean_rows(e)).values();
    case Aggregation::sum: return tape.value(tape.sum_rows(e)).values();
    case Aggregation::max: return tape.value(tape.max_rows(e)).values();
    case Aggregation::attention: break;
  }
  throw ArgumentError("attention is not a fixed aggregation");
}

/// Eval-mode logits of a set of observations; invariant to their order.
inline Logits seft_forward(std::span<const Observation> obs, const SeftModel& model) {
  const CanonicalSet c = canonicalize(obs);
  Tape tape(false);
  const auto graph = model.build(tape, model.features(c.sorted), Mode::eval);
  return tape.value(graph.logits).values();
}

inline Logits seft_forward(const TimeSeriesSet& series, const SeftModel& model) {
  return seft_forward(series.observations, model);
}

struct LossGradient {
  double loss = 0.0;
  Logits logits;
  ParameterSet gradients;
};

/// Loss of one instance; adds its parameter gradient into `grads`.
/// Train mode samples dropout masks from `rng`.
inline double accumulate_gradient(std::span<const Observation> obs, const SeftModel& model, int label,
                                  ParameterSet& grads, Mode mode = Mode::eval, Rng* rng = nullptr,
                                  Logits* logits_out = nullptr) {
  const CanonicalSet c = canonicalize(obs);
  Tape tape(true);
  const auto graph = model.build(tape, model.features(c.sorted), mode, rng);
  const Matrix& logits = tape.value(graph.logits);
  const LossValue lv = classification_loss(logits.data(), label);
  if (logits_out != nullptr) *logits_out = logits.values();
  tape.backward(graph.logits, Matrix(1, lv.gradient.size(), lv.gradient), grads);
  return lv.loss;
}

inline LossGradient seft_gradient(std::span<const Observation> obs, const SeftModel& model, int label,
                                  Mode mode = Mode::eval, Rng* rng = nullptr) {
  LossGradient out;
  out.gradients = model.params().zeros_like();
  out.loss = accumulate_gradient(obs, model, label, out.gradients, mode, rng, &out.logits);
  return out;
}

}  // namespace seft
