#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "seft/data/types.hpp"
#include "seft/errors.hpp"
#include "seft/model/attention.hpp"
#include "seft/model/seft.hpp"
#include "seft/numerics/compensated_sum.hpp"
#include "seft/numerics/softmax.hpp"

namespace seft {

/// Running accumulators for one stream. Everything a prefix prediction
/// needs is in here; nothing depends on observations not yet ingested.
struct OnlineState {
  struct Head {
    CompensatedVector numerator;  // Σ exp(e_j - e_max) h(s_j)
    CompensatedSum denominator;   // Σ exp(e_j - e_max)
    double max_logit = -std::numeric_limits<double>::infinity();
  };
  struct Element {
    Observation obs;
    std::vector<double> logits;  // per-head element part of e_j (set summary excluded)
  };

  std::size_t count = 0;
  double last_time = -std::numeric_limits<double>::infinity();
  std::vector<int> modalities_at_last_time;
  CompensatedVector summary_sum;    // Σ summary_h(s_j) for the prefix set summary
  CompensatedVector embedding_sum;  // mean/sum aggregation
  std::vector<double> embedding_max;
  std::vector<Head> heads;
  std::vector<Element> elements;
};

struct PrefixPrediction {
  double time = 0.0;
  Logits logits;
  double score = 0.0;  // sigmoid of the first logit
  std::optional<AttentionTrace> trace;
  std::vector<std::vector<double>> attention_logits;  // per head, full e_{j,i} (with trace)
};

/// Streaming evaluator over frozen parameters.
///
/// Per head the attention logit splits as e_j = c + b_j, where
/// b_j = s_j · (W_i Q_iᵀ)[summary rows excluded] / sqrt(d) depends only on the
/// element and c = f'(S_prefix) · (W_i Q_iᵀ)[summary rows] / sqrt(d) is shared by
/// every element of the prefix. The softmax weights therefore only need the
/// b_j, which are fixed at ingest time, so earlier keys never need re-scoring;
/// the prefix summary is still tracked to report full logits in traces.
class OnlinePredictor {
 public:
  explicit OnlinePredictor(const SeftModel& model) : model_(&model) {
    const ModelSpec& spec = model.spec();
    if (spec.attention) {
      const AttentionSpec& a = *spec.attention;
      const Matrix& q = model.params()[model.queries()];
      const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(a.dot_prod_dim));
      for (std::size_t i = 0; i < a.heads; ++i) {
        const Matrix& w = model.params()[model.key_weight(i)];
        Matrix qi(q.cols(), 1, std::vector<double>(q.row(i).begin(), q.row(i).end()));
        Matrix u = kernels::matmul(w, qi);
        u *= inv_sqrt_d;
        projected_queries_.push_back(std::move(u));
      }
    }
  }

  OnlineState init() const {
    const ModelSpec& spec = model_->spec();
    OnlineState s;
    const std::size_t d = spec.set.latent_width;
    if (spec.attention) {
      s.summary_sum = CompensatedVector(spec.attention->summary_h.output_width());
      s.heads.resize(spec.attention->heads);
      for (auto& h : s.heads) h.numerator = CompensatedVector(d);
    } else {
      s.embedding_sum = CompensatedVector(d);
    }
    return s;
  }

  void ingest(OnlineState& s, const Observation& obs) const {
    if (obs.time < s.last_time) {
      throw StreamOrderError("observation at t=" + std::to_string(obs.time) +
                             " arrives after t=" + std::to_string(s.last_time));
    }
    if (obs.time == s.last_time) {
      for (int m : s.modalities_at_last_time) {
        if (m == obs.modality) throw ValidationError("duplicate (t, modality) in stream");
      }
    } else {
      s.modalities_at_last_time.clear();
    }

    const ModelSpec& spec = model_->spec();
    const Matrix x = model_->features(std::span<const Observation>(&obs, 1));
    Tape tape(false);
    const NodeId xn = tape.constant(x);
    const auto embedding = tape.value(model_->h().forward(tape, model_->params(), xn, Mode::eval)).values();

    OnlineState::Element element{obs, {}};
    if (spec.attention) {
      const auto summary =
          tape.value(model_->summary_h().forward(tape, model_->params(), xn, Mode::eval));
      s.summary_sum.add(summary.data());
      const std::size_t offset = spec.attention->summary_width();
      for (std::size_t i = 0; i < s.heads.size(); ++i) {
        const Matrix& u = projected_queries_[i];
        double b = 0.0;
        for (std::size_t k = 0; k < x.cols(); ++k) b += x[k] * u[offset + k];
        element.logits.push_back(b);
        accumulate(s.heads[i], b, embedding);
      }
    } else {
      s.embedding_sum.add(embedding);
      if (s.embedding_max.empty()) {
        s.embedding_max = embedding;
      } else {
        for (std::size_t k = 0; k < embedding.size(); ++k) {
          s.embedding_max[k] = std::max(s.embedding_max[k], embedding[k]);
        }
      }
    }
    s.elements.push_back(std::move(element));
    s.modalities_at_last_time.push_back(obs.modality);
    s.last_time = obs.time;
    ++s.count;
  }

  PrefixPrediction predict(const OnlineState& s, bool with_trace = false) const {
    if (s.count == 0) throw StateError("no observations ingested yet");
    const ModelSpec& spec = model_->spec();
    std::vector<double> representation;
    if (spec.attention) {
      for (const auto& h : s.heads) {
        const double z = h.denominator.value();
        for (std::size_t k = 0; k < h.numerator.size(); ++k) representation.push_back(h.numerator.value(k) / z);
      }
    } else if (spec.set.aggregation == Aggregation::max) {
      representation = s.embedding_max;
    } else {
      representation = s.embedding_sum.values();
      if (spec.set.aggregation == Aggregation::mean) {
        for (double& v : representation) v /= static_cast<double>(s.count);
      }
    }

    Tape tape(false);
    const NodeId r = tape.constant(Matrix::row_vector(representation));
    PrefixPrediction out;
    out.time = s.last_time;
    out.logits = tape.value(model_->g().forward(tape, model_->params(), r, Mode::eval)).values();
    out.score = sigmoid(out.logits.front());
    if (with_trace && spec.attention) fill_trace(s, out);
    return out;
  }

 private:
  static void accumulate(OnlineState::Head& h, double logit, std::span<const double> embedding) {
    if (logit > h.max_logit) {
      const double rescale = std::exp(h.max_logit - logit);  // 0 on the first element
      h.numerator.scale(rescale);
      h.denominator.scale(rescale);
      h.max_logit = logit;
      h.numerator.add(embedding);
      h.denominator.add(1.0);
    } else {
      const double w = std::exp(logit - h.max_logit);
      h.numerator.add(embedding, w);
      h.denominator.add(w);
    }
  }

  void fill_trace(const OnlineState& s, PrefixPrediction& out) const {
    const AttentionSpec& a = *model_->spec().attention;
    std::vector<double> mean = s.summary_sum.values();
    for (double& v : mean) v /= static_cast<double>(s.count);
    Tape tape(false);
    const Matrix& summary = tape.value(
        model_->summary_g().forward(tape, model_->params(), tape.constant(Matrix::row_vector(mean)), Mode::eval));

    AttentionTrace trace;
    trace.weights = Matrix(s.elements.size(), a.heads);
    out.attention_logits.assign(a.heads, {});
    for (std::size_t i = 0; i < a.heads; ++i) {
      double shared = 0.0;
      for (std::size_t k = 0; k < summary.cols(); ++k) shared += summary[k] * projected_queries_[i][k];
      const double z = s.heads[i].denominator.value();
      for (std::size_t j = 0; j < s.elements.size(); ++j) {
        const double b = s.elements[j].logits[i];
        trace.weights(j, i) = std::exp(b - s.heads[i].max_logit) / z;
        out.attention_logits[i].push_back(shared + b);
      }
    }
    for (const auto& e : s.elements) trace.observations.push_back(e.obs);
    out.trace = std::move(trace);
  }

  const SeftModel* model_;
  std::vector<Matrix> projected_queries_;
};

inline OnlineState online_init(const SeftModel& model) { return OnlinePredictor(model).init(); }

inline void online_ingest(OnlineState& state, const SeftModel& model, const Observation& obs) {
  OnlinePredictor(model).ingest(state, obs);
}

inline PrefixPrediction online_predict(const OnlineState& state, const SeftModel& model,
                                       bool with_trace = false) {
  return OnlinePredictor(model).predict(state, with_trace);
}

namespace detail {

inline nlohmann::json finite_or_null(double v) {
  return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}

inline double from_finite_or_null(const nlohmann::json& j) {
  return j.is_null() ? -std::numeric_limits<double>::infinity() : j.get<double>();
}

inline nlohmann::json vector_state(const CompensatedVector& v) {
  return {{"sum", v.raw_sums()}, {"comp", v.compensations()}};
}

inline CompensatedVector vector_from_state(const nlohmann::json& j) {
  CompensatedVector v;
  v.restore(j.at("sum").get<std::vector<double>>(), j.at("comp").get<std::vector<double>>());
  return v;
}

}  // namespace detail

inline void to_json(nlohmann::json& j, const OnlineState& s) {
  using nlohmann::json;
  json heads = json::array();
  for (const auto& h : s.heads) {
    heads.push_back({{"numerator", detail::vector_state(h.numerator)},
                     {"denominator", {h.denominator.raw_sum(), h.denominator.compensation()}},
                     {"max_logit", detail::finite_or_null(h.max_logit)}});
  }
  json elements = json::array();
  for (const auto& e : s.elements) {
    elements.push_back({{"obs", {e.obs.time, e.obs.value, e.obs.modality}}, {"logits", e.logits}});
  }
  j = json{{"count", s.count},
           {"last_time", detail::finite_or_null(s.last_time)},
           {"modalities_at_last_time", s.modalities_at_last_time},
           {"summary_sum", detail::vector_state(s.summary_sum)},
           {"embedding_sum", detail::vector_state(s.embedding_sum)},
           {"embedding_max", s.embedding_max},
           {"heads", heads},
           {"elements", elements}};
}

inline void from_json(const nlohmann::json& j, OnlineState& s) {
  s.count = j.at("count").get<std::size_t>();
  s.last_time = detail::from_finite_or_null(j.at("last_time"));
  s.modalities_at_last_time = j.at("modalities_at_last_time").get<std::vector<int>>();
  s.summary_sum = detail::vector_from_state(j.at("summary_sum"));
  s.embedding_sum = detail::vector_from_state(j.at("embedding_sum"));
  s.embedding_max = j.at("embedding_max").get<std::vector<double>>();
  s.heads.clear();
  for (const auto& h : j.at("heads")) {
    OnlineState::Head head;
    head.numerator = detail::vector_from_state(h.at("numerator"));
    head.denominator.restore(h.at("denominator")[0].get<double>(), h.at("denominator")[1].get<double>());
    head.max_logit = detail::from_finite_or_null(h.at("max_logit"));
    s.heads.push_back(std::move(head));
  }
  s.elements.clear();
  for (const auto& e : j.at("elements")) {
    const auto& o = e.at("obs");
    s.elements.push_back({{o[0].get<double>(), o[1].get<double>(), o[2].get<int>()},
                          e.at("logits").get<std::vector<double>>()});
  }
}

}  // namespace seft
