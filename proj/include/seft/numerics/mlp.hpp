#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "seft/errors.hpp"
#include "seft/numerics/matrix.hpp"
#include "seft/numerics/parameters.hpp"
#include "seft/numerics/softmax.hpp"
#include "seft/numerics/tape.hpp"
#include "seft/random.hpp"

namespace seft {

enum class Activation { identity, relu, sigmoid };

/// Fully connected network. Hidden layers use relu; `final_activation`
/// applies to the last layer only. `dropout[l]` applies after hidden layer l
/// in train mode.
struct MlpSpec {
  std::size_t input_width = 0;
  std::vector<std::size_t> widths;
  Activation final_activation = Activation::identity;
  std::vector<double> dropout;

  std::size_t output_width() const { return widths.empty() ? input_width : widths.back(); }

  void validate() const {
    if (input_width == 0) throw ConfigError("mlp input width must be positive");
    if (widths.empty()) throw ConfigError("mlp needs at least one layer");
    for (std::size_t w : widths) {
      if (w == 0) throw ConfigError("mlp layer widths must be positive");
    }
    if (!dropout.empty() && dropout.size() != widths.size() - 1) {
      throw ConfigError("mlp dropout list must have one rate per hidden layer");
    }
    for (double r : dropout) {
      if (!(r >= 0.0 && r < 1.0)) throw ConfigError("dropout rate must lie in [0,1)");
    }
  }

  double dropout_after(std::size_t layer) const {
    return layer < dropout.size() ? dropout[layer] : 0.0;
  }
};

/// Glorot-uniform weights, zero biases.
inline Matrix glorot_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Matrix w(fan_in, fan_out);
  for (double& v : w.data()) v = rng.uniform(-limit, limit);
  return w;
}

class Mlp {
 public:
  Mlp() = default;

  /// Registers weights `<prefix>.W<l>` and biases `<prefix>.b<l>` in `params`.
  Mlp(MlpSpec spec, ParameterSet& params, const std::string& prefix, Rng& init)
      : spec_(std::move(spec)) {
    spec_.validate();
    std::size_t in = spec_.input_width;
    for (std::size_t l = 0; l < spec_.widths.size(); ++l) {
      const std::size_t out = spec_.widths[l];
      weights_.push_back(params.add(prefix + ".W" + std::to_string(l), glorot_uniform(in, out, init)));
      biases_.push_back(params.add(prefix + ".b" + std::to_string(l), Matrix(1, out)));
      in = out;
    }
  }

  const MlpSpec& spec() const noexcept { return spec_; }
  std::size_t layer_count() const noexcept { return weights_.size(); }
  ParamId weight(std::size_t l) const { return weights_.at(l); }
  ParamId bias(std::size_t l) const { return biases_.at(l); }

  /// Applies the network row-wise to `x` (rows are independent samples).
  NodeId forward(Tape& tape, const ParameterSet& params, NodeId x, Mode mode,
                 Rng* rng = nullptr) const {
    if (tape.value(x).cols() != spec_.input_width) {
      throw ShapeError("mlp input width " + std::to_string(tape.value(x).cols()) +
                       ", expected " + std::to_string(spec_.input_width));
    }
    NodeId h = x;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
      h = tape.add_row(tape.matmul(h, tape.parameter(params, weights_[l])),
                       tape.parameter(params, biases_[l]));
      const bool last = l + 1 == weights_.size();
      if (!last) {
        h = tape.relu(h);
        const double rate = spec_.dropout_after(l);
        if (mode == Mode::train && rate > 0.0) {
          if (rng == nullptr) throw ArgumentError("train-mode dropout needs a generator");
          h = tape.dropout(h, rate, *rng);
        }
      } else if (spec_.final_activation == Activation::relu) {
        h = tape.relu(h);
      } else if (spec_.final_activation == Activation::sigmoid) {
        h = tape.sigmoid(h);
      }
    }
    return h;
  }

 private:
  MlpSpec spec_;
  std::vector<ParamId> weights_;
  std::vector<ParamId> biases_;
};

struct MlpResult {
  std::vector<double> output;
  std::optional<Tape> tape;
  NodeId output_node = 0;
};

/// Single-vector forward pass. In train mode the tape is returned so the
/// caller can run backward() from `output_node`.
inline MlpResult mlp_forward(const Mlp& mlp, const ParameterSet& params,
                             std::span<const double> input, Mode mode, Rng* rng = nullptr) {
  if (input.size() != mlp.spec().input_width) {
    throw ShapeError("mlp_forward: input length " + std::to_string(input.size()) +
                     ", expected " + std::to_string(mlp.spec().input_width));
  }
  Tape tape(mode == Mode::train);
  const NodeId out =
      mlp.forward(tape, params, tape.constant(Matrix::row_vector(input)), mode, rng);
  MlpResult result;
  result.output = tape.value(out).values();
  result.output_node = out;
  if (mode == Mode::train) result.tape = std::move(tape);
  return result;
}

}  // namespace seft
