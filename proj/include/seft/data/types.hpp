#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <tuple>
#include <vector>

namespace seft {

/// One measurement (t, z, m). Modalities are 1-based.
struct Observation {
  double time = 0.0;
  double value = 0.0;
  int modality = 1;

  friend bool operator==(const Observation&, const Observation&) = default;
};

/// Canonical order used before every reduction: (t, m, z).
inline bool canonical_less(const Observation& a, const Observation& b) noexcept {
  return std::tie(a.time, a.modality, a.value) < std::tie(b.time, b.modality, b.value);
}

/// One instance: an unordered set of observations plus static covariates.
struct TimeSeriesSet {
  std::string id;
  std::vector<Observation> observations;
  std::map<std::string, double> statics;
  int label = -1;  // 0-based class, -1 when unlabeled
};

struct ChannelStats {
  double mean = 0.0;
  double stddev = 1.0;

  friend bool operator==(const ChannelStats&, const ChannelStats&) = default;
};

/// Dataset-level schema. Channels 0..D-1 are the dynamic modalities, channels
/// D..D+S-1 the static variables (injected as t=0 pseudo-observations with
/// modality D+1..D+S).
struct DatasetMeta {
  int format_version = 1;
  std::size_t modality_count = 0;  // D
  std::size_t class_count = 0;     // C
  std::vector<ChannelStats> channels;
  std::vector<std::string> statics;
  double max_time = 0.0;
  bool normalized = false;

  std::size_t total_modalities() const noexcept { return modality_count + statics.size(); }

  friend bool operator==(const DatasetMeta&, const DatasetMeta&) = default;
};

struct Dataset {
  std::vector<TimeSeriesSet> series;
  DatasetMeta meta;
};

}  // namespace seft
