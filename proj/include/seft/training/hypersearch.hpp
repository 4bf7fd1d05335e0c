#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "seft/data/types.hpp"
#include "seft/errors.hpp"
#include "seft/random.hpp"
#include "seft/training/config.hpp"
#include "seft/training/trainer.hpp"

namespace seft {

/// Sampling ranges for SeFT-Attn. The attention summary network, the head
/// count and the dot-product width stay fixed; everything else is drawn
/// per trial.
struct SearchSpace {
  std::size_t min_layers = 1;
  std::size_t max_layers = 5;
  std::vector<std::size_t> widths{16, 32, 64, 128, 256, 512};
  std::vector<double> dropouts{0.0, 0.1, 0.2, 0.3};
  std::vector<std::size_t> latent_widths{32, 64, 128, 256, 512, 1024, 2048};
  std::vector<std::size_t> positional_dims{4, 8, 16};
  std::vector<double> max_timescales{10.0, 100.0, 1000.0};
  std::vector<double> attn_dropouts{0.0, 0.1, 0.25, 0.5};
  double min_learning_rate = 1e-4;
  double max_learning_rate = 1e-2;
  std::vector<std::size_t> batch_sizes{32, 64, 128, 256, 512};

  void validate() const {
    if (min_layers == 0 || min_layers > max_layers) throw ConfigError("bad layer range");
    if (widths.empty() || dropouts.empty() || latent_widths.empty() || positional_dims.empty() ||
        max_timescales.empty() || attn_dropouts.empty() || batch_sizes.empty()) {
      throw ConfigError("search space has an empty choice list");
    }
    if (!(min_learning_rate > 0.0 && min_learning_rate <= max_learning_rate)) {
      throw ConfigError("bad learning rate range");
    }
  }
};

namespace detail {

template <class T>
const T& pick(Rng& rng, const std::vector<T>& choices) {
  return choices[static_cast<std::size_t>(rng.below(choices.size()))];
}

}  // namespace detail

/// `n` configurations drawn from `space`; architecture fields not in the
/// space are taken from `base`. Trial i gets seed derive_seed(seed, i).
inline std::vector<TrainConfig> sample_configs(const SearchSpace& space, std::size_t n, std::uint64_t seed,
                                               const TrainConfig& base = {}) {
  space.validate();
  Rng rng(seed);
  std::vector<TrainConfig> out;
  for (std::size_t i = 0; i < n; ++i) {
    TrainConfig c = base;
    const auto layers = [&] {
      return space.min_layers + static_cast<std::size_t>(rng.below(space.max_layers - space.min_layers + 1));
    };
    c.model.aggregation = Aggregation::attention;
    c.model.n_phi_layers = layers();
    c.model.phi_width = detail::pick(rng, space.widths);
    c.model.phi_dropout = detail::pick(rng, space.dropouts);
    c.model.n_rho_layers = layers();
    c.model.rho_width = detail::pick(rng, space.widths);
    c.model.rho_dropout = detail::pick(rng, space.dropouts);
    c.model.latent_width = detail::pick(rng, space.latent_widths);
    c.model.n_positional_dims = detail::pick(rng, space.positional_dims);
    c.model.max_timescale = detail::pick(rng, space.max_timescales);
    c.model.attn_dropout = detail::pick(rng, space.attn_dropouts);
    c.learning_rate = std::exp(std::log(space.min_learning_rate) +
                               rng.uniform() * (std::log(space.max_learning_rate) - std::log(space.min_learning_rate)));
    c.batch_size = detail::pick(rng, space.batch_sizes);
    c.seed = derive_seed(seed, i);
    out.push_back(c);
  }
  return out;
}

struct TrialResult {
  std::size_t trial = 0;  // position in the sampled order
  TrainConfig config;
  double best_value = 0.0;
  std::size_t best_epoch = 0;
  std::size_t epochs_run = 0;
};

/// Trains every sampled configuration and ranks them by the best validation
/// monitor value, highest first (ties keep sampling order).
inline std::vector<TrialResult> hypersearch(const Dataset& train_data, const Dataset& val_data,
                                            const SearchSpace& space, std::size_t n, std::uint64_t seed,
                                            const TrainConfig& base = {},
                                            const std::function<void(const TrialResult&)>& on_trial = {}) {
  if (n == 0) throw ArgumentError("hypersearch needs at least one trial");
  std::vector<TrialResult> results;
  const auto configs = sample_configs(space, n, seed, base);
  for (std::size_t i = 0; i < configs.size(); ++i) {
    const TrainResult r = train(train_data, val_data, configs[i]);
    TrialResult t{i, configs[i], r.checkpoint.best_value, r.checkpoint.epoch, r.epochs_run};
    if (on_trial) on_trial(t);
    results.push_back(std::move(t));
  }
  std::stable_sort(results.begin(), results.end(),
                   [](const TrialResult& a, const TrialResult& b) { return a.best_value > b.best_value; });
  return results;
}

inline void to_json(nlohmann::json& j, const TrialResult& t) {
  j = nlohmann::json{{"trial", t.trial},
                     {"best_value", t.best_value},
                     {"best_epoch", t.best_epoch},
                     {"epochs_run", t.epochs_run},
                     {"config", t.config}};
}

}  // namespace seft
