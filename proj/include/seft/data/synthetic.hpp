#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "seft/data/types.hpp"
#include "seft/errors.hpp"
#include "seft/random.hpp"

namespace seft {

/// Generator for irregular, non-synchronized binary classification data.
///
/// Each channel c has its own scale (mean 50 + 20c, noise sd 5 + 2c). Every
/// channel is sampled at independent uniform times. Positive instances get a
/// level shift of `amplitude` noise standard deviations on the first
/// `signal_channels` channels for all observations after a random onset.
struct SyntheticSpec {
  std::size_t instances = 1000;
  std::size_t modalities = 6;
  double prevalence = 0.14;
  double mean_observations = 40.0;
  double max_time = 48.0;
  double amplitude = 3.0;
  std::size_t signal_channels = 3;
  std::size_t statics = 2;
  double instance_offset = 0.5;
};

inline double synthetic_channel_mean(std::size_t c) { return 50.0 + 20.0 * static_cast<double>(c); }
inline double synthetic_channel_sd(std::size_t c) { return 5.0 + 2.0 * static_cast<double>(c); }

inline Dataset generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed) {
  if (!(spec.prevalence > 0.0 && spec.prevalence < 1.0)) {
    throw ArgumentError("prevalence must lie in (0,1)");
  }
  if (spec.modalities == 0) throw ArgumentError("synthetic data needs at least one modality");
  if (!(spec.max_time > 0.0)) throw ArgumentError("max_time must be positive");
  if (spec.mean_observations <= 0.0) throw ArgumentError("mean observation count must be positive");

  Rng rng(seed);
  Dataset ds;
  ds.meta.modality_count = spec.modalities;
  ds.meta.class_count = 2;
  for (std::size_t k = 0; k < spec.statics; ++k) ds.meta.statics.push_back("static" + std::to_string(k + 1));
  ds.meta.channels.assign(ds.meta.total_modalities(), ChannelStats{});

  const double per_channel = spec.mean_observations / static_cast<double>(spec.modalities);
  const std::size_t signal = std::min(spec.signal_channels, spec.modalities);
  for (std::size_t i = 0; i < spec.instances; ++i) {
    TimeSeriesSet s;
    char id[32];
    std::snprintf(id, sizeof id, "synth-%06zu", i);
    s.id = id;
    s.label = rng.bernoulli(spec.prevalence) ? 1 : 0;
    const double onset = rng.uniform(0.0, 0.5 * spec.max_time);

    for (std::size_t c = 0; c < spec.modalities; ++c) {
      const double offset = rng.normal(0.0, spec.instance_offset);
      const std::uint64_t count = rng.poisson(per_channel);
      std::set<double> times;
      for (std::uint64_t k = 0; k < count; ++k) {
        times.insert(std::round(rng.uniform(0.0, spec.max_time) * 100.0) / 100.0);
      }
      for (double t : times) {
        double z = offset + rng.normal();
        if (s.label == 1 && c < signal && t >= onset) z += spec.amplitude;
        s.observations.push_back(
            {t, synthetic_channel_mean(c) + synthetic_channel_sd(c) * z, static_cast<int>(c + 1)});
      }
    }
    if (s.observations.empty()) {
      const std::size_t c = rng.below(spec.modalities);
      const double t = std::round(rng.uniform(0.0, spec.max_time) * 100.0) / 100.0;
      double z = rng.normal();
      if (s.label == 1 && c < signal && t >= onset) z += spec.amplitude;
      s.observations.push_back(
          {t, synthetic_channel_mean(c) + synthetic_channel_sd(c) * z, static_cast<int>(c + 1)});
    }
    for (std::size_t k = 0; k < spec.statics; ++k) {
      s.statics[ds.meta.statics[k]] = std::round(rng.normal(60.0, 15.0) * 10.0) / 10.0;
    }
    for (const auto& o : s.observations) ds.meta.max_time = std::max(ds.meta.max_time, o.time);
    ds.series.push_back(std::move(s));
  }
  return ds;
}

/// True if some observed time point lacks at least one of the D modalities.
inline bool is_non_synchronized(const TimeSeriesSet& s, std::size_t modalities) {
  std::map<double, std::size_t> per_time;
  for (const auto& o : s.observations) ++per_time[o.time];
  for (const auto& [t, n] : per_time) {
    if (n != modalities) return true;
  }
  return false;
}

}  // namespace seft
