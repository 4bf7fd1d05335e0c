#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "seft/errors.hpp"
#include "seft/numerics/compensated_sum.hpp"

namespace seft {

/// Max-subtracted softmax with a compensated denominator.
inline std::vector<double> softmax_stable(std::span<const double> logits) {
  if (logits.empty()) throw ArgumentError("softmax of an empty vector");
  const double top = *std::max_element(logits.begin(), logits.end());
  std::vector<double> out(logits.size());
  CompensatedSum denom;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - top);
    denom.add(out[i]);
  }
  const double z = denom.value();
  for (double& v : out) v /= z;
  return out;
}

inline double sigmoid(double x) noexcept {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

/// log(1 + exp(x)) without overflow.
inline double softplus(double x) noexcept {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

}  // namespace seft
