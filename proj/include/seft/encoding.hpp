#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "seft/data/types.hpp"
#include "seft/errors.hpp"
#include "seft/numerics/matrix.hpp"

namespace seft {

/// Sinusoidal time encoding with `dims` (even) entries and wavelengths in
/// geometric progression from 2π up to 2π·max_timescale.
struct TimeEncodingSpec {
  std::size_t dims = 4;
  double max_timescale = 100.0;

  void validate() const {
    if (dims == 0 || dims % 2 != 0) {
      throw ConfigError("positional_dims must be a positive even integer, got " + std::to_string(dims));
    }
    if (!(max_timescale > 0.0)) throw ConfigError("max_timescale must be positive");
  }

  /// Divisor of the k-th sin/cos pair: max_timescale^(2k/dims).
  double divisor(std::size_t k) const {
    return std::pow(max_timescale, 2.0 * static_cast<double>(k) / static_cast<double>(dims));
  }
};

/// Writes [sin(t/d_0), cos(t/d_0), sin(t/d_1), ...] into `out` (length dims).
inline void time_encode_into(double t, const TimeEncodingSpec& spec, std::span<double> out) {
  for (std::size_t k = 0; k < spec.dims / 2; ++k) {
    const double phase = t / spec.divisor(k);
    out[2 * k] = std::sin(phase);
    out[2 * k + 1] = std::cos(phase);
  }
}

inline std::vector<double> time_encode(double t, const TimeEncodingSpec& spec) {
  spec.validate();
  if (!(t >= 0.0)) throw ValidationError("time must be non-negative");
  std::vector<double> out(spec.dims);
  time_encode_into(t, spec, out);
  return out;
}

inline std::size_t feature_width(const TimeEncodingSpec& spec, std::size_t modalities) {
  return spec.dims + 1 + modalities;
}

/// Feature layout: [time encoding | value | one-hot modality].
inline void featurize_into(const Observation& obs, const TimeEncodingSpec& spec, std::size_t modalities,
                           std::span<double> out) {
  if (obs.modality < 1 || static_cast<std::size_t>(obs.modality) > modalities) {
    throw ValidationError("modality " + std::to_string(obs.modality) + " outside 1.." +
                          std::to_string(modalities));
  }
  if (!(obs.time >= 0.0)) throw ValidationError("time must be non-negative");
  time_encode_into(obs.time, spec, out.subspan(0, spec.dims));
  out[spec.dims] = obs.value;
  for (std::size_t m = 0; m < modalities; ++m) out[spec.dims + 1 + m] = 0.0;
  out[spec.dims + static_cast<std::size_t>(obs.modality)] = 1.0;
}

inline std::vector<double> featurize(const Observation& obs, const TimeEncodingSpec& spec,
                                     std::size_t modalities) {
  spec.validate();
  std::vector<double> out(feature_width(spec, modalities));
  featurize_into(obs, spec, modalities, out);
  return out;
}

/// One feature row per observation, in the given order.
inline Matrix featurize_all(std::span<const Observation> obs, const TimeEncodingSpec& spec,
                            std::size_t modalities) {
  spec.validate();
  Matrix out(obs.size(), feature_width(spec, modalities));
  for (std::size_t j = 0; j < obs.size(); ++j) featurize_into(obs[j], spec, modalities, out.row(j));
  return out;
}

}  // namespace seft
