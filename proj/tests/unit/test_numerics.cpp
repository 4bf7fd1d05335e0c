#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <vector>

#include "seft/numerics/adam.hpp"
#include "seft/numerics/compensated_sum.hpp"
#include "seft/numerics/matrix.hpp"
#include "seft/numerics/mlp.hpp"
#include "seft/numerics/softmax.hpp"
#include "seft/numerics/tape.hpp"
#include "support/oracles.hpp"

using namespace seft;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, Rng& rng) {
  Matrix m(r, c);
  for (double& v : m.data()) v = rng.normal();
  return m;
}

// <upstream, f(params)> against central differences for every scalar.
void expect_op_gradient(ParameterSet params, const std::function<NodeId(Tape&, const ParameterSet&)>& build,
                        double tol = 1e-7) {
  Tape tape;
  const NodeId out = build(tape, params);
  Rng rng(99);
  const Matrix upstream = random_matrix(tape.value(out).rows(), tape.value(out).cols(), rng);
  const auto grads = tape.backward(out, upstream).flatten();

  auto objective = [&] {
    Tape t(false);
    const Matrix& v = t.value(build(t, params));
    long double acc = 0;
    for (std::size_t i = 0; i < v.size(); ++i) acc += static_cast<long double>(v[i]) * upstream[i];
    return static_cast<double>(acc);
  };
  const double h = 1e-6;
  for (std::size_t i = 0; i < grads.size(); ++i) {
    double& x = params.scalar(i);
    const double saved = x;
    x = saved + h;
    const double up = objective();
    x = saved - h;
    const double down = objective();
    x = saved;
    const double numeric = (up - down) / (2 * h);
    EXPECT_NEAR(grads[i], numeric, tol * std::max(1.0, std::abs(numeric))) << "scalar " << i;
  }
}

}  // namespace

TEST(CompensatedSum, RecoversCancellationThatNaiveSumLoses) {
  std::vector<double> v{1e16, 1.0, -1e16, 1.0};
  EXPECT_DOUBLE_EQ(compensated_sum(v), 2.0);
  double naive = 0;
  for (double x : v) naive += x;
  EXPECT_NE(naive, 2.0);
}

TEST(CompensatedSum, MatchesLongDoubleOnRandomData) {
  Rng rng(3);
  std::vector<double> v(100000);
  for (double& x : v) x = rng.normal() * std::pow(10.0, rng.uniform(-6, 6));
  long double ref = 0;
  for (double x : v) ref += x;
  EXPECT_NEAR(compensated_sum(v), static_cast<double>(ref), 1e-12 * std::abs(static_cast<double>(ref)) + 1e-9);
}

TEST(CompensatedSum, ScaleAndRestoreKeepState) {
  CompensatedSum a;
  for (int i = 0; i < 10; ++i) a.add(0.1);
  CompensatedSum b;
  b.restore(a.raw_sum(), a.compensation());
  EXPECT_EQ(a.value(), b.value());
  a.scale(0.5);
  EXPECT_NEAR(a.value(), 0.5, 1e-16);
}

TEST(CompensatedVector, WeightedAccumulation) {
  CompensatedVector v(2);
  const double x[] = {1.0, 2.0};
  v.add(x, 3.0);
  v.add(x);
  EXPECT_DOUBLE_EQ(v.value(0), 4.0);
  EXPECT_DOUBLE_EQ(v.value(1), 8.0);
}

TEST(Matrix, ShapeChecksAndChecked) {
  EXPECT_THROW(Matrix(2, 2, std::vector<double>{1, 2, 3}), ShapeError);
  EXPECT_THROW(Matrix::checked(1, 1, {std::numeric_limits<double>::quiet_NaN()}), ValidationError);
  Matrix a{{1, 2}, {3, 4}};
  EXPECT_EQ(a(1, 0), 3);
  EXPECT_EQ(a.shape_string(), "2x2");
}

TEST(MatrixKernels, MatmulMatchesLoops) {
  Rng rng(1);
  const Matrix a = random_matrix(7, 5, rng), b = random_matrix(5, 3, rng);
  const Matrix c = kernels::matmul(a, b);
  for (std::size_t i = 0; i < 7; ++i)
    for (std::size_t j = 0; j < 3; ++j) {
      long double acc = 0;
      for (std::size_t k = 0; k < 5; ++k) acc += static_cast<long double>(a(i, k)) * b(k, j);
      EXPECT_NEAR(c(i, j), static_cast<double>(acc), 1e-13);
    }
  EXPECT_THROW(kernels::matmul(a, a), ShapeError);
}

TEST(Softmax, StableForHugeLogits) {
  const std::vector<double> l{1000.0, 0.0};
  const auto p = softmax_stable(l);
  EXPECT_DOUBLE_EQ(p[0], 1.0);
  EXPECT_GE(p[1], 0.0);
  EXPECT_LT(p[1], 1e-300);
  EXPECT_THROW(softmax_stable(std::vector<double>{}), ArgumentError);
}

TEST(Softmax, ShiftInvariant) {
  Rng rng(5);
  std::vector<double> l(9), s(9);
  for (std::size_t i = 0; i < l.size(); ++i) {
    l[i] = rng.normal();
    s[i] = l[i] + 123.25;
  }
  const auto a = softmax_stable(l), b = softmax_stable(s);
  for (std::size_t i = 0; i < l.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-13);  // the shift itself rounds l[i]
}

TEST(Softmax, SigmoidAndSoftplusAtExtremes) {
  EXPECT_DOUBLE_EQ(sigmoid(0.0), 0.5);
  EXPECT_EQ(sigmoid(-800.0), 0.0);
  EXPECT_EQ(sigmoid(800.0), 1.0);
  EXPECT_DOUBLE_EQ(softplus(100.0), 100.0);
  EXPECT_NEAR(softplus(0.0), std::log(2.0), 1e-16);
}

TEST(TapeGradients, MatmulAddRowRelu) {
  Rng rng(11);
  ParameterSet p;
  p.add("x", random_matrix(4, 3, rng));
  p.add("w", random_matrix(3, 5, rng));
  p.add("b", random_matrix(1, 5, rng));
  expect_op_gradient(p, [](Tape& t, const ParameterSet& ps) {
    return t.relu(t.add_row(t.matmul(t.parameter(ps, 0), t.parameter(ps, 1)), t.parameter(ps, 2)));
  });
}

TEST(TapeGradients, SigmoidScaleTranspose) {
  Rng rng(12);
  ParameterSet p;
  p.add("x", random_matrix(3, 2, rng));
  expect_op_gradient(p, [](Tape& t, const ParameterSet& ps) {
    return t.transpose(t.scale(t.sigmoid(t.parameter(ps, 0)), -1.7));
  });
}

TEST(TapeGradients, SelectConcatTile) {
  Rng rng(13);
  ParameterSet p;
  p.add("a", random_matrix(3, 2, rng));
  p.add("b", random_matrix(4, 3, rng));
  expect_op_gradient(p, [](Tape& t, const ParameterSet& ps) {
    const NodeId row = t.select_row(t.parameter(ps, 0), 1);
    return t.concat_cols({t.tile_rows(row, 4), t.parameter(ps, 1)});
  });
}

TEST(TapeGradients, Reductions) {
  Rng rng(14);
  ParameterSet p;
  p.add("a", random_matrix(6, 4, rng));
  expect_op_gradient(p, [](Tape& t, const ParameterSet& ps) {
    const NodeId a = t.parameter(ps, 0);
    return t.concat_cols({t.mean_rows(a), t.sum_rows(a), t.max_rows(a)});
  });
}

TEST(TapeGradients, SoftmaxWeightedSumAndMask) {
  Rng rng(15);
  ParameterSet p;
  p.add("logits", random_matrix(5, 1, rng));
  p.add("values", random_matrix(5, 3, rng));
  expect_op_gradient(p, [](Tape& t, const ParameterSet& ps) {
    const NodeId w = t.mask_renormalize(t.softmax_column(t.parameter(ps, 0)), {1, 0, 1, 1, 0});
    return t.weighted_sum_rows(w, t.parameter(ps, 1));
  });
}

TEST(Tape, MaxRoutesToFirstMaximizer) {
  ParameterSet p;
  p.add("a", Matrix{{1, 5}, {1, 2}});
  Tape t;
  const NodeId m = t.max_rows(t.parameter(p, 0));
  const auto g = t.backward(m, Matrix{{1, 1}});
  EXPECT_EQ(g[0], (Matrix{{1, 1}, {0, 0}}));
}

TEST(Tape, MaskAllZeroKeepsWeights) {
  Tape t(false);
  const NodeId w = t.constant(Matrix{{0.25}, {0.75}});
  const Matrix& r = t.value(t.mask_renormalize(w, {0, 0}));
  EXPECT_DOUBLE_EQ(r[0], 0.25);
  EXPECT_DOUBLE_EQ(r[1], 0.75);
}

TEST(Tape, BackwardErrors) {
  ParameterSet p;
  p.add("a", Matrix(2, 2, 1.0));
  Tape eval(false);
  const NodeId e = eval.parameter(p, 0);
  EXPECT_THROW(eval.backward(e, Matrix(2, 2)), StateError);
  Tape t;
  const NodeId n = t.parameter(p, 0);
  EXPECT_THROW(t.backward(n, Matrix(1, 2)), ShapeError);
  t.backward(n, Matrix(2, 2, 1.0));
  EXPECT_THROW(t.backward(n, Matrix(2, 2, 1.0)), StateError);
}

TEST(Tape, DropoutInvertedScalingAndRateZero) {
  Tape t(false);
  Rng rng(4);
  const NodeId x = t.constant(Matrix(1, 10000, 1.0));
  EXPECT_EQ(t.dropout(x, 0.0, rng), x);
  const Matrix& y = t.value(t.dropout(x, 0.25, rng));
  double mean = 0;
  for (double v : y.data()) {
    EXPECT_TRUE(v == 0.0 || std::abs(v - 1.0 / 0.75) < 1e-15);
    mean += v / 10000.0;
  }
  EXPECT_NEAR(mean, 1.0, 0.05);
}

TEST(Mlp, MatchesStraightLineOracle) {
  Rng rng(21);
  MlpSpec spec;
  spec.input_width = 5;
  spec.widths = {7, 6, 3};
  spec.dropout = {0.0, 0.0};
  ParameterSet params;
  Mlp net(spec, params, "net", rng);
  for (ParamId i = 0; i < params.size(); ++i)
    for (double& v : params[i].data()) v = rng.normal();
  std::vector<double> x(5);
  oracle::Vec xl;
  for (double& v : x) {
    v = rng.normal();
    xl.push_back(v);
  }
  const auto got = mlp_forward(net, params, x, Mode::eval).output;
  const auto want = oracle::mlp(xl, net, params);
  ASSERT_EQ(got.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(got[i], static_cast<double>(want[i]), 1e-12);
}

TEST(Mlp, GlorotBounds) {
  Rng rng(2);
  const Matrix w = glorot_uniform(30, 20, rng);
  const double limit = std::sqrt(6.0 / 50.0);
  for (double v : w.data()) EXPECT_LE(std::abs(v), limit);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  ParameterSet p;
  p.add("w", Matrix{{1.0, -2.0}});
  ParameterSet g;
  g.add("w", Matrix{{0.3, -5.0}});
  auto state = AdamState::for_parameters(p, 0.1);
  adam_step(state, p, g);
  // bias-corrected first step is lr * sign(g) up to epsilon
  EXPECT_NEAR(p[0](0, 0), 0.9, 1e-7);
  EXPECT_NEAR(p[0](0, 1), -1.9, 1e-7);
  EXPECT_EQ(state.step, 1u);
}

TEST(Adam, MinimizesQuadratic) {
  ParameterSet p;
  p.add("w", Matrix{{5.0, -3.0}});
  auto state = AdamState::for_parameters(p, 0.05);
  for (int i = 0; i < 2000; ++i) {
    ParameterSet g = p;  // gradient of 0.5 |w|^2
    adam_step(state, p, g);
  }
  EXPECT_NEAR(p[0](0, 0), 0.0, 1e-3);
  EXPECT_NEAR(p[0](0, 1), 0.0, 1e-3);
}
