#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace seft {

/// Neumaier's variant of Kahan summation. Unlike plain Kahan it also
/// recovers the small term when a later addend is larger than the running
/// sum (e.g. 1e16 + 1 - 1e16).
class CompensatedSum {
 public:
  void add(double x) noexcept {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      comp_ += (sum_ - t) + x;
    } else {
      comp_ += (x - t) + sum_;
    }
    sum_ = t;
  }

  /// Multiplies the represented value by `s` (used for running-max rescaling).
  void scale(double s) noexcept {
    sum_ *= s;
    comp_ *= s;
  }

  double value() const noexcept { return sum_ + comp_; }
  double raw_sum() const noexcept { return sum_; }
  double compensation() const noexcept { return comp_; }
  void restore(double raw_sum, double compensation) noexcept {
    sum_ = raw_sum;
    comp_ = compensation;
  }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

inline double compensated_sum(std::span<const double> values) noexcept {
  CompensatedSum acc;
  for (double v : values) acc.add(v);
  return acc.value();
}

/// Elementwise compensated accumulation of equally sized vectors.
class CompensatedVector {
 public:
  CompensatedVector() = default;
  explicit CompensatedVector(std::size_t n) : sum_(n, 0.0), comp_(n, 0.0) {}

  std::size_t size() const noexcept { return sum_.size(); }

  void add(std::span<const double> x, double weight = 1.0) noexcept {
    for (std::size_t i = 0; i < sum_.size(); ++i) {
      const double v = weight * x[i];
      const double t = sum_[i] + v;
      if (std::abs(sum_[i]) >= std::abs(v)) {
        comp_[i] += (sum_[i] - t) + v;
      } else {
        comp_[i] += (v - t) + sum_[i];
      }
      sum_[i] = t;
    }
  }

  void scale(double s) noexcept {
    for (std::size_t i = 0; i < sum_.size(); ++i) {
      sum_[i] *= s;
      comp_[i] *= s;
    }
  }

  double value(std::size_t i) const noexcept { return sum_[i] + comp_[i]; }

  std::vector<double> values() const {
    std::vector<double> out(sum_.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = value(i);
    return out;
  }

  const std::vector<double>& raw_sums() const noexcept { return sum_; }
  const std::vector<double>& compensations() const noexcept { return comp_; }
  void restore(std::vector<double> sums, std::vector<double> comps) {
    sum_ = std::move(sums);
    comp_ = std::move(comps);
  }

 private:
  std::vector<double> sum_;
  std::vector<double> comp_;
};

}  // namespace seft
