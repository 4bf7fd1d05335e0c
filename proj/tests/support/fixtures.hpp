#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "seft/seft.hpp"

namespace fixture {

/// A small SeFT-Attn configuration that keeps per-evaluation cost tiny.
inline seft::ModelConfig tiny_config(seft::Aggregation agg = seft::Aggregation::attention) {
  seft::ModelConfig c;
  c.n_positional_dims = 4;
  c.max_timescale = 100.0;
  c.n_phi_layers = 2;
  c.phi_width = 8;
  c.phi_dropout = 0.0;
  c.latent_width = 5;
  c.n_psi_layers = 1;
  c.psi_width = 6;
  c.psi_latent_width = 4;
  c.n_heads = 2;
  c.dot_prod_dim = 3;
  c.attn_dropout = 0.0;
  c.n_rho_layers = 1;
  c.rho_width = 7;
  c.rho_dropout = 0.0;
  c.aggregation = agg;
  return c;
}

inline seft::SeftModel tiny_model(std::uint64_t seed, std::size_t modalities = 3,
                                  seft::Aggregation agg = seft::Aggregation::attention) {
  return seft::SeftModel(seft::make_model_spec(tiny_config(agg), modalities, 1), seed);
}

/// Random queries so that attention is not uniform.
inline void randomize_queries(seft::SeftModel& model, seft::Rng& rng, double scale = 1.0) {
  auto& q = model.params()[model.queries()];
  for (double& v : q.data()) v = rng.normal(0.0, scale);
}

/// Random valid set: distinct (t, m), values ~ N(0,1).
inline std::vector<seft::Observation> random_set(seft::Rng& rng, std::size_t m, std::size_t modalities,
                                                 double max_time = 48.0) {
  std::set<std::pair<double, int>> used;
  std::vector<seft::Observation> out;
  while (out.size() < m) {
    const double t = std::round(rng.uniform(0.0, max_time) * 100.0) / 100.0;
    const int mod = static_cast<int>(rng.below(modalities)) + 1;
    if (!used.emplace(t, mod).second) continue;
    out.push_back({t, rng.normal(), mod});
  }
  return out;
}

/// Monotone-time stream (ties allowed across modalities).
inline std::vector<seft::Observation> random_stream(seft::Rng& rng, std::size_t m, std::size_t modalities) {
  auto s = random_set(rng, m, modalities);
  std::sort(s.begin(), s.end(), [](const seft::Observation& a, const seft::Observation& b) {
    return a.time != b.time ? a.time < b.time : a.modality < b.modality;
  });
  return s;
}

struct GradCheck {
  std::size_t checked = 0;
  std::size_t skipped = 0;  // kinks crossed by the finite difference
  double max_rel_error = 0.0;
  std::string worst;
};

inline std::vector<std::size_t> pattern(const std::vector<seft::Observation>& canonical, const seft::SeftModel& m) {
  seft::Tape tape(false);
  m.build(tape, m.features(canonical), seft::Mode::eval);
  return tape.activation_pattern();
}

inline double eval_loss(const std::vector<seft::Observation>& canonical, const seft::SeftModel& m, int label) {
  seft::Tape tape(false);
  const auto g = m.build(tape, m.features(canonical), seft::Mode::eval);
  return seft::classification_loss(tape.value(g.logits).data(), label).loss;
}

/// Central differences over every scalar parameter against the tape's
/// gradient. Relative error uses a 1e-6 floor on the magnitude.
inline GradCheck gradient_check(const std::vector<seft::Observation>& obs, seft::SeftModel& model, int label,
                                double step = 1e-5, double floor = 1e-6) {
  const auto canonical = seft::canonicalize(obs).sorted;
  const auto analytic = seft::seft_gradient(obs, model, label);
  const auto flat = analytic.gradients.flatten();
  const auto base_pattern = pattern(canonical, model);
  GradCheck out;
  for (std::size_t i = 0; i < flat.size(); ++i) {
    double& theta = model.params().scalar(i);
    const double saved = theta;
    theta = saved + step;
    const double up = eval_loss(canonical, model, label);
    const bool same_up = pattern(canonical, model) == base_pattern;
    theta = saved - step;
    const double down = eval_loss(canonical, model, label);
    const bool same_down = pattern(canonical, model) == base_pattern;
    theta = saved;
    if (!same_up || !same_down) {
      ++out.skipped;
      continue;
    }
    const double numeric = (up - down) / (2.0 * step);
    const double rel = std::abs(flat[i] - numeric) / std::max({std::abs(flat[i]), std::abs(numeric), floor});
    ++out.checked;
    if (rel > out.max_rel_error) {
      out.max_rel_error = rel;
      out.worst = "scalar " + std::to_string(i) + ": analytic " + std::to_string(flat[i]) + " numeric " +
                  std::to_string(numeric);
    }
  }
  return out;
}

/// Dataset of `n` synthetic instances with fitted meta, ready for training.
inline seft::Dataset synthetic(std::size_t n, double amplitude, std::uint64_t seed, double prevalence = 0.3,
                               double mean_obs = 12.0) {
  seft::SyntheticSpec spec;
  spec.instances = n;
  spec.amplitude = amplitude;
  spec.prevalence = prevalence;
  spec.mean_observations = mean_obs;
  spec.modalities = 3;
  spec.signal_channels = 2;
  spec.statics = 1;
  return seft::generate_synthetic(spec, seed);
}

inline seft::TrainConfig tiny_train_config(std::uint64_t seed = 1) {
  seft::TrainConfig c;
  c.model = tiny_config();
  c.learning_rate = 0.01;
  c.batch_size = 32;
  c.max_epochs = 5;
  c.patience = 30;
  c.seed = seed;
  return c;
}

}  // namespace fixture
