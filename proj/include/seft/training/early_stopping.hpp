#pragma once

#include <cmath>
#include <cstddef>
#include <limits>

#include "seft/errors.hpp"

namespace seft {

/// Tracks the best monitored value (higher is better). `update` reports stop
/// once `patience` epochs have passed without a strict improvement.
class EarlyStopping {
 public:
  explicit EarlyStopping(std::size_t patience) : patience_(patience) {
    if (patience == 0) throw ConfigError("patience must be positive");
  }

  /// Returns true when training should stop after this epoch.
  bool update(double value) {
    ++epoch_;
    improved_ = std::isfinite(value) && (best_epoch_ == 0 || value > best_);
    if (improved_) {
      best_ = value;
      best_epoch_ = epoch_;
    }
    return epoch_ - best_epoch_ >= patience_;
  }

  bool improved() const noexcept { return improved_; }
  double best() const noexcept { return best_; }
  std::size_t best_epoch() const noexcept { return best_epoch_; }  // 1-based, 0 = none yet
  std::size_t epochs_seen() const noexcept { return epoch_; }
  std::size_t patience() const noexcept { return patience_; }

 private:
  std::size_t patience_;
  std::size_t epoch_ = 0;
  std::size_t best_epoch_ = 0;
  double best_ = -std::numeric_limits<double>::infinity();
  bool improved_ = false;
};

}  // namespace seft
