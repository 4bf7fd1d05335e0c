#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "seft/data/types.hpp"
#include "seft/errors.hpp"
#include "seft/numerics/compensated_sum.hpp"

namespace seft {

namespace detail {

inline std::size_t static_channel(const DatasetMeta& meta, const std::string& name) {
  for (std::size_t k = 0; k < meta.statics.size(); ++k) {
    if (meta.statics[k] == name) return meta.modality_count + k;
  }
  throw ValidationError("unknown static variable '" + name + "'");
}

inline std::size_t dynamic_channel(const DatasetMeta& meta, int modality) {
  if (modality < 1 || static_cast<std::size_t>(modality) > meta.modality_count) {
    throw ValidationError("unknown modality " + std::to_string(modality));
  }
  return static_cast<std::size_t>(modality - 1);
}

}  // namespace detail

/// Per-channel mean and population standard deviation over `train`
/// (two-pass). Channels that are constant or unobserved get stddev 1.
inline DatasetMeta fit_normalization(std::span<const TimeSeriesSet> train, DatasetMeta meta) {
  const std::size_t n = meta.total_modalities();
  std::vector<std::vector<double>> values(n);
  for (const auto& s : train) {
    for (const auto& o : s.observations) values[detail::dynamic_channel(meta, o.modality)].push_back(o.value);
    for (const auto& [name, v] : s.statics) values[detail::static_channel(meta, name)].push_back(v);
  }
  meta.channels.assign(n, ChannelStats{});
  for (std::size_t c = 0; c < n; ++c) {
    const auto& v = values[c];
    if (v.empty()) continue;
    const double mean = compensated_sum(v) / static_cast<double>(v.size());
    CompensatedSum sq;
    for (double x : v) sq.add((x - mean) * (x - mean));
    double sd = std::sqrt(sq.value() / static_cast<double>(v.size()));
    if (!(sd > 1e-12 * std::max(1.0, std::abs(mean)))) sd = 1.0;
    meta.channels[c] = {mean, sd};
  }
  meta.normalized = true;
  return meta;
}

inline double normalize_value(const DatasetMeta& meta, std::size_t channel, double v) {
  const ChannelStats& c = meta.channels.at(channel);
  return (v - c.mean) / c.stddev;
}

/// z-scores every observation and static with the statistics in `meta`.
inline std::vector<TimeSeriesSet> normalize(std::vector<TimeSeriesSet> data, const DatasetMeta& meta) {
  if (meta.channels.size() != meta.total_modalities()) {
    throw ValidationError("meta has no channel statistics");
  }
  for (auto& s : data) {
    for (auto& o : s.observations) {
      o.value = normalize_value(meta, detail::dynamic_channel(meta, o.modality), o.value);
    }
    for (auto& [name, v] : s.statics) v = normalize_value(meta, detail::static_channel(meta, name), v);
  }
  return data;
}

/// Observation list seen by the model: events plus statics injected at t=0
/// with modality D+1..D+S.
inline std::vector<Observation> model_observations(const TimeSeriesSet& s, const DatasetMeta& meta) {
  std::vector<Observation> out;
  out.reserve(s.observations.size() + s.statics.size());
  for (const auto& o : s.observations) {
    detail::dynamic_channel(meta, o.modality);
    out.push_back(o);
  }
  for (const auto& [name, v] : s.statics) {
    out.push_back({0.0, v, static_cast<int>(detail::static_channel(meta, name) + 1)});
  }
  return out;
}

}  // namespace seft
