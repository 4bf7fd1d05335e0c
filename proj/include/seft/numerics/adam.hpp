#pragma once

#include <cmath>
#include <cstdint>

#include "seft/errors.hpp"
#include "seft/numerics/parameters.hpp"

namespace seft {

struct AdamState {
  std::uint64_t step = 0;
  ParameterSet first_moment;
  ParameterSet second_moment;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  static AdamState for_parameters(const ParameterSet& params, double learning_rate) {
    AdamState s;
    s.first_moment = params.zeros_like();
    s.second_moment = params.zeros_like();
    s.learning_rate = learning_rate;
    return s;
  }
};

/// One bias-corrected Adam update, in place.
inline void adam_step(AdamState& state, ParameterSet& params, const ParameterSet& grads) {
  params.require_same_layout(grads, "adam_step gradients");
  params.require_same_layout(state.first_moment, "adam_step first moment");
  params.require_same_layout(state.second_moment, "adam_step second moment");

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  for (ParamId p = 0; p < params.size(); ++p) {
    auto theta = params[p].data();
    auto g = grads[p].data();
    auto m = state.first_moment[p].data();
    auto v = state.second_moment[p].data();
    for (std::size_t i = 0; i < theta.size(); ++i) {
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
      const double m_hat = m[i] / c1;
      const double v_hat = v[i] / c2;
      theta[i] -= state.learning_rate * m_hat / (std::sqrt(v_hat) + state.epsilon);
    }
  }
}

}  // namespace seft
