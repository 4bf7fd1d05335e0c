#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "seft/errors.hpp"
#include "seft/numerics/compensated_sum.hpp"
#include "seft/numerics/matrix.hpp"
#include "seft/numerics/parameters.hpp"
#include "seft/numerics/softmax.hpp"
#include "seft/random.hpp"

namespace seft {

using NodeId = std::size_t;

enum class Mode { train, eval };

/// Reverse-mode differentiation over matrix-valued primitives.
///
/// Nodes are appended in evaluation order, so the node list is a topological
/// order by construction and the reverse sweep is a single backwards pass.
/// The operator set is exactly what the set-function models need; reductions
/// over set elements (rows) use compensated summation.
class Tape {
 public:
  enum class Op : std::uint8_t {
    constant,
    parameter,
    matmul,
    add_row,
    relu,
    sigmoid,
    dropout,
    scale,
    transpose,
    select_row,
    concat_cols,
    tile_rows,
    mean_rows,
    sum_rows,
    max_rows,
    softmax_column,
    mask_renormalize,
    weighted_sum_rows,
  };

  /// A non-recording tape only evaluates; backward() on it is a state error.
  explicit Tape(bool record = true) : record_(record) {}

  bool recording() const noexcept { return record_; }
  std::size_t node_count() const noexcept { return nodes_.size(); }
  Op op(NodeId id) const { return nodes_.at(id).op; }

  const Matrix& value(NodeId id) const {
    const Node& n = nodes_.at(id);
    return n.ref != nullptr ? *n.ref : n.value;
  }

  NodeId constant(Matrix v) {
    Node n{Op::constant};
    n.value = std::move(v);
    return push(std::move(n), false);
  }

  /// Leaf referencing `params[id]`; `params` must outlive the tape.
  NodeId parameter(const ParameterSet& params, ParamId id) {
    if (params_ == nullptr) {
      params_ = &params;
    } else if (params_ != &params) {
      throw StateError("a tape may only reference one parameter set");
    }
    Node n{Op::parameter};
    n.ref = &params[id];
    n.param = id;
    return push(std::move(n), true);
  }

  NodeId matmul(NodeId a, NodeId b) {
    Node n{Op::matmul};
    n.inputs = {a, b};
    n.value = kernels::matmul(value(a), value(b));
    return push(std::move(n), needs(a) || needs(b));
  }

  /// a (M×n) + row (1×n) broadcast over rows.
  NodeId add_row(NodeId a, NodeId row) {
    const Matrix& x = value(a);
    const Matrix& b = value(row);
    if (b.rows() != 1 || b.cols() != x.cols()) {
      throw ShapeError("add_row: " + x.shape_string() + " + " + b.shape_string());
    }
    Node n{Op::add_row};
    n.inputs = {a, row};
    n.value = x;
    for (std::size_t r = 0; r < x.rows(); ++r) {
      auto dst = n.value.row(r);
      for (std::size_t c = 0; c < dst.size(); ++c) dst[c] += b[c];
    }
    return push(std::move(n), needs(a) || needs(row));
  }

  NodeId relu(NodeId a) {
    Node n{Op::relu};
    n.inputs = {a};
    n.value = value(a);
    for (double& v : n.value.data()) v = v > 0.0 ? v : 0.0;
    return push(std::move(n), needs(a));
  }

  NodeId sigmoid(NodeId a) {
    Node n{Op::sigmoid};
    n.inputs = {a};
    n.value = value(a);
    for (double& v : n.value.data()) v = seft::sigmoid(v);
    return push(std::move(n), needs(a));
  }

  /// Inverted dropout: kept entries are scaled by 1/(1-rate).
  NodeId dropout(NodeId a, double rate, Rng& rng) {
    if (rate <= 0.0) return a;
    if (rate >= 1.0) throw ArgumentError("dropout rate must be in [0,1)");
    Node n{Op::dropout};
    n.inputs = {a};
    n.value = value(a);
    n.aux.resize(n.value.size());
    const double keep = 1.0 / (1.0 - rate);
    for (std::size_t i = 0; i < n.aux.size(); ++i) {
      n.aux[i] = rng.uniform() < rate ? 0.0 : keep;
      n.value[i] *= n.aux[i];
    }
    return push(std::move(n), needs(a));
  }

  NodeId scale(NodeId a, double s) {
    Node n{Op::scale};
    n.inputs = {a};
    n.scalar = s;
    n.value = value(a);
    n.value *= s;
    return push(std::move(n), needs(a));
  }

  NodeId transpose(NodeId a) {
    const Matrix& x = value(a);
    Node n{Op::transpose};
    n.inputs = {a};
    n.value = Matrix(x.cols(), x.rows());
    for (std::size_t r = 0; r < x.rows(); ++r) {
      for (std::size_t c = 0; c < x.cols(); ++c) n.value(c, r) = x(r, c);
    }
    return push(std::move(n), needs(a));
  }

  NodeId select_row(NodeId a, std::size_t row) {
    const Matrix& x = value(a);
    if (row >= x.rows()) throw ShapeError("select_row: index out of range");
    Node n{Op::select_row};
    n.inputs = {a};
    n.index = {row};
    n.value = Matrix::row_vector(x.row(row));
    return push(std::move(n), needs(a));
  }

  NodeId concat_cols(std::span<const NodeId> parts) {
    if (parts.empty()) throw ShapeError("concat_cols: no inputs");
    const std::size_t rows = value(parts[0]).rows();
    std::size_t cols = 0;
    bool grad = false;
    for (NodeId p : parts) {
      if (value(p).rows() != rows) throw ShapeError("concat_cols: row count mismatch");
      cols += value(p).cols();
      grad = grad || needs(p);
    }
    Node n{Op::concat_cols};
    n.inputs.assign(parts.begin(), parts.end());
    n.value = Matrix(rows, cols);
    for (std::size_t r = 0; r < rows; ++r) {
      std::size_t offset = 0;
      for (NodeId p : parts) {
        auto src = value(p).row(r);
        std::copy(src.begin(), src.end(), n.value.row(r).begin() + static_cast<std::ptrdiff_t>(offset));
        offset += src.size();
      }
    }
    return push(std::move(n), grad);
  }

  NodeId concat_cols(std::initializer_list<NodeId> parts) {
    return concat_cols(std::span<const NodeId>(parts.begin(), parts.size()));
  }

  NodeId tile_rows(NodeId row, std::size_t count) {
    const Matrix& x = value(row);
    if (x.rows() != 1) throw ShapeError("tile_rows expects a row vector");
    Node n{Op::tile_rows};
    n.inputs = {row};
    n.value = Matrix(count, x.cols());
    for (std::size_t r = 0; r < count; ++r) {
      std::copy(x.data().begin(), x.data().end(), n.value.row(r).begin());
    }
    return push(std::move(n), needs(row));
  }

  NodeId mean_rows(NodeId a) { return reduce_rows(a, Op::mean_rows); }
  NodeId sum_rows(NodeId a) { return reduce_rows(a, Op::sum_rows); }

  /// Column-wise max; ties resolve to the first maximizing row.
  NodeId max_rows(NodeId a) {
    const Matrix& x = value(a);
    if (x.rows() == 0) throw ValidationError("max over an empty set");
    Node n{Op::max_rows};
    n.inputs = {a};
    n.value = Matrix::row_vector(x.row(0));
    n.index.assign(x.cols(), 0);
    for (std::size_t r = 1; r < x.rows(); ++r) {
      for (std::size_t c = 0; c < x.cols(); ++c) {
        if (x(r, c) > n.value[c]) {
          n.value[c] = x(r, c);
          n.index[c] = r;
        }
      }
    }
    return push(std::move(n), needs(a));
  }

  /// Softmax over the entries of an M×1 column.
  NodeId softmax_column(NodeId a) {
    const Matrix& x = value(a);
    if (x.cols() != 1) throw ShapeError("softmax_column expects an M×1 column");
    Node n{Op::softmax_column};
    n.inputs = {a};
    n.value = Matrix::column_vector(softmax_stable(x.data()));
    return push(std::move(n), needs(a));
  }

  /// y_j = w_j m_j / Σ_k w_k m_k for a 0/1 keep-mask m. An all-zero mask
  /// falls back to keeping every element.
  NodeId mask_renormalize(NodeId weights, std::vector<double> mask) {
    const Matrix& w = value(weights);
    if (w.cols() != 1 || mask.size() != w.rows()) {
      throw ShapeError("mask_renormalize: mask does not match weights");
    }
    CompensatedSum total;
    for (std::size_t j = 0; j < mask.size(); ++j) total.add(w[j] * mask[j]);
    if (!(total.value() > 0.0)) {
      std::fill(mask.begin(), mask.end(), 1.0);
      total = CompensatedSum{};
      for (std::size_t j = 0; j < mask.size(); ++j) total.add(w[j]);
    }
    Node n{Op::mask_renormalize};
    n.inputs = {weights};
    n.scalar = total.value();
    n.value = Matrix(w.rows(), 1);
    for (std::size_t j = 0; j < mask.size(); ++j) n.value[j] = w[j] * mask[j] / n.scalar;
    n.aux = std::move(mask);
    return push(std::move(n), needs(weights));
  }

  /// Σ_j w_j · V_j for w (M×1) and V (M×d); result 1×d.
  NodeId weighted_sum_rows(NodeId weights, NodeId values) {
    const Matrix& w = value(weights);
    const Matrix& v = value(values);
    if (w.cols() != 1 || w.rows() != v.rows()) {
      throw ShapeError("weighted_sum_rows: " + w.shape_string() + " vs " + v.shape_string());
    }
    if (v.rows() == 0) throw ValidationError("weighted sum over an empty set");
    CompensatedVector acc(v.cols());
    for (std::size_t r = 0; r < v.rows(); ++r) acc.add(v.row(r), w[r]);
    Node n{Op::weighted_sum_rows};
    n.inputs = {weights, values};
    n.value = Matrix(1, v.cols(), acc.values());
    return push(std::move(n), needs(weights) || needs(values));
  }

  /// ReLU activation masks and max-aggregation argmaxes, in node order.
  /// Two evaluations with equal patterns lie on the same smooth piece.
  std::vector<std::size_t> activation_pattern() const {
    std::vector<std::size_t> out;
    for (const Node& n : nodes_) {
      if (n.op == Op::relu) {
        for (double v : n.value.data()) out.push_back(v > 0.0 ? 1 : 0);
      } else if (n.op == Op::max_rows) {
        out.insert(out.end(), n.index.begin(), n.index.end());
      }
    }
    return out;
  }

  /// Accumulates d(output)/d(params) · upstream into `grads`.
  void backward(NodeId output, const Matrix& upstream, ParameterSet& grads) {
    if (!record_) throw StateError("backward on a tape recorded in eval mode");
    if (consumed_) throw StateError("tape already consumed by a previous backward pass");
    if (!value(output).same_shape(upstream)) {
      throw ShapeError("backward: upstream " + upstream.shape_string() + " vs output " +
                       value(output).shape_string());
    }
    if (params_ != nullptr) params_->require_same_layout(grads, "backward");
    consumed_ = true;

    std::vector<Matrix> adj(nodes_.size());
    adj[output] = upstream;
    for (std::size_t i = output + 1; i-- > 0;) {
      if (adj[i].empty() || !nodes_[i].requires_grad) continue;
      propagate(i, adj, grads);
      adj[i] = Matrix{};
    }
  }

  ParameterSet backward(NodeId output, const Matrix& upstream) {
    ParameterSet grads = params_ != nullptr ? params_->zeros_like() : ParameterSet{};
    backward(output, upstream, grads);
    return grads;
  }

 private:
  struct Node {
    Op op;
    std::vector<NodeId> inputs{};
    Matrix value{};
    const Matrix* ref = nullptr;
    ParamId param = 0;
    double scalar = 0.0;
    std::vector<double> aux{};
    std::vector<std::size_t> index{};
    bool requires_grad = false;
  };

  bool needs(NodeId id) const { return nodes_.at(id).requires_grad; }

  NodeId push(Node n, bool requires_grad) {
    n.requires_grad = record_ && requires_grad;
    nodes_.push_back(std::move(n));
    return nodes_.size() - 1;
  }

  NodeId reduce_rows(NodeId a, Op op) {
    const Matrix& x = value(a);
    if (x.rows() == 0) throw ValidationError("aggregation over an empty set");
    CompensatedVector acc(x.cols());
    for (std::size_t r = 0; r < x.rows(); ++r) acc.add(x.row(r));
    Node n{op};
    n.inputs = {a};
    n.value = Matrix(1, x.cols(), acc.values());
    if (op == Op::mean_rows) n.value *= 1.0 / static_cast<double>(x.rows());
    return push(std::move(n), needs(a));
  }

  Matrix& slot(std::vector<Matrix>& adj, NodeId id) {
    if (adj[id].empty()) {
      const Matrix& v = value(id);
      adj[id] = Matrix(v.rows(), v.cols());
    }
    return adj[id];
  }

  void propagate(NodeId i, std::vector<Matrix>& adj, ParameterSet& grads) {
    const Node& n = nodes_[i];
    const Matrix& g = adj[i];
    switch (n.op) {
      case Op::constant:
        break;
      case Op::parameter:
        grads[n.param] += g;
        break;
      case Op::matmul: {
        const NodeId a = n.inputs[0], b = n.inputs[1];
        if (needs(a)) kernels::add_matmul_nt(slot(adj, a), g, value(b));
        if (needs(b)) kernels::add_matmul_tn(slot(adj, b), value(a), g);
        break;
      }
      case Op::add_row: {
        const NodeId a = n.inputs[0], b = n.inputs[1];
        if (needs(a)) slot(adj, a) += g;
        if (needs(b)) {
          Matrix& db = slot(adj, b);
          CompensatedVector acc(g.cols());
          for (std::size_t r = 0; r < g.rows(); ++r) acc.add(g.row(r));
          for (std::size_t c = 0; c < g.cols(); ++c) db[c] += acc.value(c);
        }
        break;
      }
      case Op::relu: {
        Matrix& da = slot(adj, n.inputs[0]);
        for (std::size_t k = 0; k < g.size(); ++k) {
          if (n.value[k] > 0.0) da[k] += g[k];
        }
        break;
      }
      case Op::sigmoid: {
        Matrix& da = slot(adj, n.inputs[0]);
        for (std::size_t k = 0; k < g.size(); ++k) {
          da[k] += g[k] * n.value[k] * (1.0 - n.value[k]);
        }
        break;
      }
      case Op::dropout: {
        Matrix& da = slot(adj, n.inputs[0]);
        for (std::size_t k = 0; k < g.size(); ++k) da[k] += g[k] * n.aux[k];
        break;
      }
      case Op::scale: {
        Matrix& da = slot(adj, n.inputs[0]);
        for (std::size_t k = 0; k < g.size(); ++k) da[k] += g[k] * n.scalar;
        break;
      }
      case Op::transpose: {
        Matrix& da = slot(adj, n.inputs[0]);
        for (std::size_t r = 0; r < g.rows(); ++r) {
          for (std::size_t c = 0; c < g.cols(); ++c) da(c, r) += g(r, c);
        }
        break;
      }
      case Op::select_row: {
        auto dst = slot(adj, n.inputs[0]).row(n.index[0]);
        for (std::size_t c = 0; c < dst.size(); ++c) dst[c] += g[c];
        break;
      }
      case Op::concat_cols: {
        std::size_t offset = 0;
        for (NodeId p : n.inputs) {
          const std::size_t w = value(p).cols();
          if (needs(p)) {
            Matrix& dp = slot(adj, p);
            for (std::size_t r = 0; r < g.rows(); ++r) {
              for (std::size_t c = 0; c < w; ++c) dp(r, c) += g(r, offset + c);
            }
          }
          offset += w;
        }
        break;
      }
      case Op::tile_rows: {
        Matrix& dr = slot(adj, n.inputs[0]);
        CompensatedVector acc(g.cols());
        for (std::size_t r = 0; r < g.rows(); ++r) acc.add(g.row(r));
        for (std::size_t c = 0; c < g.cols(); ++c) dr[c] += acc.value(c);
        break;
      }
      case Op::mean_rows:
      case Op::sum_rows: {
        Matrix& da = slot(adj, n.inputs[0]);
        const double f =
            n.op == Op::mean_rows ? 1.0 / static_cast<double>(da.rows()) : 1.0;
        for (std::size_t r = 0; r < da.rows(); ++r) {
          auto dst = da.row(r);
          for (std::size_t c = 0; c < dst.size(); ++c) dst[c] += g[c] * f;
        }
        break;
      }
      case Op::max_rows: {
        Matrix& da = slot(adj, n.inputs[0]);
        for (std::size_t c = 0; c < g.cols(); ++c) da(n.index[c], c) += g[c];
        break;
      }
      case Op::softmax_column: {
        CompensatedSum dot;
        for (std::size_t j = 0; j < g.rows(); ++j) dot.add(g[j] * n.value[j]);
        const double s = dot.value();
        Matrix& da = slot(adj, n.inputs[0]);
        for (std::size_t j = 0; j < g.rows(); ++j) da[j] += n.value[j] * (g[j] - s);
        break;
      }
      case Op::mask_renormalize: {
        CompensatedSum dot;
        for (std::size_t j = 0; j < g.rows(); ++j) dot.add(g[j] * n.value[j]);
        const double s = dot.value();
        Matrix& dw = slot(adj, n.inputs[0]);
        for (std::size_t j = 0; j < g.rows(); ++j) dw[j] += n.aux[j] * (g[j] - s) / n.scalar;
        break;
      }
      case Op::weighted_sum_rows: {
        const NodeId wid = n.inputs[0], vid = n.inputs[1];
        const Matrix& w = value(wid);
        const Matrix& v = value(vid);
        if (needs(wid)) {
          Matrix& dw = slot(adj, wid);
          for (std::size_t r = 0; r < v.rows(); ++r) {
            CompensatedSum dot;
            auto vr = v.row(r);
            for (std::size_t c = 0; c < vr.size(); ++c) dot.add(vr[c] * g[c]);
            dw[r] += dot.value();
          }
        }
        if (needs(vid)) {
          Matrix& dv = slot(adj, vid);
          for (std::size_t r = 0; r < v.rows(); ++r) {
            auto dst = dv.row(r);
            for (std::size_t c = 0; c < dst.size(); ++c) dst[c] += w[r] * g[c];
          }
        }
        break;
      }
    }
  }

  bool record_;
  bool consumed_ = false;
  const ParameterSet* params_ = nullptr;
  std::vector<Node> nodes_;
};

}  // namespace seft
