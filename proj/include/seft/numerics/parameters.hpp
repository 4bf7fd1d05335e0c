#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "seft/errors.hpp"
#include "seft/numerics/matrix.hpp"

namespace seft {

using ParamId = std::size_t;

/// Ordered, named collection of trainable matrices. Gradients and Adam
/// moments use the same container with identical layout.
class ParameterSet {
 public:
  ParamId add(std::string name, Matrix value) {
    names_.push_back(std::move(name));
    values_.push_back(std::move(value));
    return values_.size() - 1;
  }

  std::size_t size() const noexcept { return values_.size(); }

  Matrix& operator[](ParamId id) { return values_.at(id); }
  const Matrix& operator[](ParamId id) const { return values_.at(id); }

  const std::string& name(ParamId id) const { return names_.at(id); }
  const std::vector<std::string>& names() const noexcept { return names_; }

  std::size_t scalar_count() const noexcept {
    std::size_t n = 0;
    for (const auto& m : values_) n += m.size();
    return n;
  }

  ParameterSet zeros_like() const {
    ParameterSet out;
    for (std::size_t i = 0; i < values_.size(); ++i) {
      out.add(names_[i], Matrix(values_[i].rows(), values_[i].cols()));
    }
    return out;
  }

  bool same_layout(const ParameterSet& o) const noexcept {
    if (o.size() != size()) return false;
    for (std::size_t i = 0; i < size(); ++i) {
      if (!values_[i].same_shape(o.values_[i])) return false;
    }
    return true;
  }

  void require_same_layout(const ParameterSet& o, std::string_view what) const {
    if (!same_layout(o)) throw ShapeError(std::string(what) + ": parameter layout mismatch");
  }

  void set_zero() {
    for (auto& m : values_) m.fill(0.0);
  }

  ParameterSet& operator+=(const ParameterSet& o) {
    require_same_layout(o, "parameter accumulation");
    for (std::size_t i = 0; i < size(); ++i) values_[i] += o.values_[i];
    return *this;
  }

  ParameterSet& operator*=(double s) {
    for (auto& m : values_) m *= s;
    return *this;
  }

  /// Flat view in declaration order, used for checkpoints and gradient checks.
  std::vector<double> flatten() const {
    std::vector<double> out;
    out.reserve(scalar_count());
    for (const auto& m : values_) out.insert(out.end(), m.values().begin(), m.values().end());
    return out;
  }

  void assign_flat(std::span<const double> flat) {
    if (flat.size() != scalar_count()) throw ShapeError("flat parameter length mismatch");
    std::size_t k = 0;
    for (auto& m : values_) {
      for (double& v : m.data()) v = flat[k++];
    }
  }

  double& scalar(std::size_t flat_index) {
    for (auto& m : values_) {
      if (flat_index < m.size()) return m[flat_index];
      flat_index -= m.size();
    }
    throw ArgumentError("scalar index out of range");
  }

  friend bool operator==(const ParameterSet&, const ParameterSet&) = default;

 private:
  std::vector<std::string> names_;
  std::vector<Matrix> values_;
};

}  // namespace seft
