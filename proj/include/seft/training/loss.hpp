#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "seft/errors.hpp"
#include "seft/numerics/softmax.hpp"

namespace seft {

struct LossValue {
  double loss = 0.0;
  std::vector<double> gradient;  // d loss / d logits
};

/// Binary cross-entropy on a logit: softplus(x) - y·x, gradient σ(x) - y.
inline LossValue bce_loss(double logit, int label) {
  if (!std::isfinite(logit)) throw TrainingError("non-finite logit in loss");
  if (label != 0 && label != 1) throw ValidationError("binary loss needs a 0/1 label");
  const double y = static_cast<double>(label);
  return {softplus(logit) - y * logit, {sigmoid(logit) - y}};
}

/// Softmax cross-entropy for more than two classes.
inline LossValue softmax_cross_entropy(std::span<const double> logits, int label) {
  if (label < 0 || static_cast<std::size_t>(label) >= logits.size()) {
    throw ValidationError("label outside the class range");
  }
  auto p = softmax_stable(logits);
  LossValue out;
  out.loss = -std::log(std::max(p[static_cast<std::size_t>(label)], 1e-300));
  p[static_cast<std::size_t>(label)] -= 1.0;
  out.gradient = std::move(p);
  return out;
}

/// BCE for a single logit, softmax cross-entropy otherwise.
inline LossValue classification_loss(std::span<const double> logits, int label) {
  if (logits.size() == 1) return bce_loss(logits[0], label);
  return softmax_cross_entropy(logits, label);
}

}  // namespace seft
