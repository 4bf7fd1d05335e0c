#pragma once

#include <cstdio>
#include <fstream>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "seft/data/types.hpp"
#include "seft/errors.hpp"
#include "seft/model/seft.hpp"

namespace seft {

/// Per-head attention weights aligned with the caller's observation order.
struct AttentionTrace {
  std::vector<Observation> observations;
  Matrix weights;  // observations × heads

  std::size_t heads() const noexcept { return weights.cols(); }
  double weight(std::size_t obs, std::size_t head) const { return weights(obs, head); }
};

struct AttentionOutput {
  Logits logits;
  AttentionTrace trace;
  std::vector<double> representation;  // r* = [r_1 ... r_m]
};

inline AttentionOutput seft_attn_forward(std::span<const Observation> obs, const SeftModel& model) {
  if (!model.spec().attention) throw ConfigError("model does not use attention aggregation");
  const CanonicalSet c = canonicalize(obs);
  Tape tape(false);
  const auto graph = model.build(tape, model.features(c.sorted), Mode::eval);

  AttentionOutput out;
  out.logits = tape.value(graph.logits).values();
  out.representation = tape.value(graph.representation).values();
  out.trace.observations.assign(obs.begin(), obs.end());
  out.trace.weights = Matrix(obs.size(), graph.attention.size());
  for (std::size_t head = 0; head < graph.attention.size(); ++head) {
    const Matrix& w = tape.value(graph.attention[head]);
    for (std::size_t k = 0; k < c.order.size(); ++k) out.trace.weights(c.order[k], head) = w[k];
  }
  return out;
}

inline AttentionTrace attention_weights(std::span<const Observation> obs, const SeftModel& model) {
  return seft_attn_forward(obs, model).trace;
}

/// Concatenated head outputs r* of length heads × latent width.
inline std::vector<double> attend_aggregate(std::span<const Observation> obs, const SeftModel& model) {
  return seft_attn_forward(obs, model).representation;
}

inline constexpr std::string_view kAttentionCsvHeader = "instance_id,t,value,modality,head,weight";

/// CSV rows (one per observation and head). `obs` supplies the values to
/// print and must align with the trace (typically the raw, unnormalized
/// observations). Heads are numbered from 1.
inline void export_attention(std::string_view instance_id, std::span<const Observation> obs,
                             const AttentionTrace& trace, std::ostream& out) {
  if (obs.size() != trace.weights.rows()) {
    throw ShapeError("attention trace does not align with the observations");
  }
  char buf[256];
  for (std::size_t j = 0; j < obs.size(); ++j) {
    for (std::size_t head = 0; head < trace.heads(); ++head) {
      std::snprintf(buf, sizeof buf, ",%.10g,%.10g,%d,%zu,%.9g\n", obs[j].time, obs[j].value,
                    obs[j].modality, head + 1, trace.weight(j, head));
      out << instance_id << buf;
    }
  }
}

inline void export_attention(std::string_view instance_id, std::span<const Observation> obs,
                             const AttentionTrace& trace, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << kAttentionCsvHeader << '\n';
  export_attention(instance_id, obs, trace, out);
  if (!out) throw IoError("write failed for '" + path + "'");
}

}  // namespace seft
