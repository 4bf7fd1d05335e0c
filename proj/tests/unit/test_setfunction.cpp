#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "seft/seft.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace seft;

namespace {

void randomize_all(SeftModel& model, Rng& rng, double scale = 0.5) {
  for (ParamId i = 0; i < model.params().size(); ++i)
    for (double& v : model.params()[i].data()) v = rng.normal(0.0, scale);
}

}  // namespace

TEST(Aggregate, SmallExamples) {
  const Matrix e{{1, 3}, {3, 1}};
  EXPECT_EQ(aggregate(e, Aggregation::mean), (std::vector<double>{2, 2}));
  EXPECT_EQ(aggregate(e, Aggregation::max), (std::vector<double>{3, 3}));
  EXPECT_EQ(aggregate(e, Aggregation::sum), (std::vector<double>{4, 4}));
  EXPECT_THROW(aggregate(Matrix(0, 2), Aggregation::mean), ValidationError);
}

TEST(Aggregate, SumMatchesHighPrecisionOracle) {
  Rng rng(4);
  Matrix e(1000, 3);
  for (double& v : e.data()) v = rng.normal() * std::pow(10.0, rng.uniform(-3, 3));
  const auto got = aggregate(e, Aggregation::sum);
  const auto mean = aggregate(e, Aggregation::mean);
  for (std::size_t c = 0; c < 3; ++c) {
    long double ref = 0;
    for (std::size_t r = 0; r < 1000; ++r) ref += e(r, c);
    EXPECT_NEAR(got[c], static_cast<double>(ref), 1e-12 * std::abs(static_cast<double>(ref)));
    EXPECT_NEAR(got[c], 1000.0 * mean[c], 1e-12 * std::abs(got[c]));
  }
}

TEST(SeftForward, SingletonMeanIsGOfH) {
  SeftModel model = fixture::tiny_model(1, 3, Aggregation::mean);
  const std::vector<Observation> obs{{2.0, 0.3, 2}};
  const auto logits = seft_forward(obs, model);
  const auto s = featurize(obs[0], model.spec().encoding, 3);
  const auto h = mlp_forward(model.h(), model.params(), s, Mode::eval).output;
  const auto g = mlp_forward(model.g(), model.params(), h, Mode::eval).output;
  EXPECT_EQ(logits, g);
}

TEST(SeftForward, MeanUnchangedByDuplicatingEveryElement) {
  SeftModel model = fixture::tiny_model(2, 3, Aggregation::mean);
  Rng rng(2);
  const auto obs = fixture::random_set(rng, 6, 3);
  // duplicate as a multiset: evaluate the embeddings directly
  const Matrix x = model.features(canonicalize(obs).sorted);
  Matrix doubled(12, x.cols());
  for (std::size_t r = 0; r < 12; ++r)
    for (std::size_t c = 0; c < x.cols(); ++c) doubled(r, c) = x(r / 2, c);
  Tape a(false), b(false);
  const auto la = a.value(model.build(a, x, Mode::eval).logits);
  const auto lb = b.value(model.build(b, doubled, Mode::eval).logits);
  EXPECT_NEAR(la[0], lb[0], 1e-14);
}

TEST(SeftForward, MatchesEquationOracleForEachAggregation) {
  for (auto agg : {Aggregation::mean, Aggregation::sum, Aggregation::max}) {
    SeftModel model = fixture::tiny_model(3, 3, agg);
    Rng rng(30);
    randomize_all(model, rng);
    for (std::size_t m = 1; m <= 8; ++m) {
      const auto obs = fixture::random_set(rng, m, 3);
      const auto got = seft_forward(obs, model);
      const auto want = oracle::forward(obs, model);
      EXPECT_NEAR(got[0], static_cast<double>(want.logits[0]), 1e-12) << to_string(agg) << " M=" << m;
    }
  }
}

TEST(SeftForward, PermutationInvariantBitwise) {
  SeftModel model = fixture::tiny_model(5, 3, Aggregation::sum);
  Rng rng(5);
  randomize_all(model, rng);
  auto obs = fixture::random_set(rng, 40, 3);
  const auto ref = seft_forward(obs, model);
  for (int i = 0; i < 100; ++i) {
    rng.shuffle(std::span<Observation>(obs));
    EXPECT_EQ(seft_forward(obs, model), ref);
  }
}

TEST(SeftForward, ShapeMismatch) {
  SeftModel model = fixture::tiny_model(5, 3, Aggregation::mean);
  Tape t(false);
  EXPECT_THROW(model.build(t, Matrix(2, 3), Mode::eval), ShapeError);
  EXPECT_THROW(seft_forward(std::vector<Observation>{}, model), ValidationError);
}

TEST(SeftGradient, ZeroGNetworkGivesHalfOnBias) {
  SeftModel model = fixture::tiny_model(6, 3, Aggregation::mean);
  const Mlp& g = model.g();
  for (std::size_t l = 0; l < g.layer_count(); ++l) {
    model.params()[g.weight(l)].fill(0.0);
    model.params()[g.bias(l)].fill(0.0);
  }
  Rng rng(6);
  const auto obs = fixture::random_set(rng, 5, 3);
  const ParamId out_bias = g.bias(g.layer_count() - 1);
  EXPECT_DOUBLE_EQ(seft_gradient(obs, model, 1).gradients[out_bias][0], -0.5);
  EXPECT_DOUBLE_EQ(seft_gradient(obs, model, 0).gradients[out_bias][0], 0.5);
}

TEST(SeftGradient, FiniteDifferencesEachAggregation) {
  for (auto agg : {Aggregation::mean, Aggregation::sum, Aggregation::max}) {
    SeftModel model = fixture::tiny_model(7, 3, agg);
    Rng rng(70);
    const auto obs = fixture::random_set(rng, 7, 3);
    const auto r = fixture::gradient_check(obs, model, 1);
    EXPECT_LT(r.max_rel_error, 1e-4) << to_string(agg) << " " << r.worst;
    EXPECT_GT(r.checked, r.skipped);
  }
}

TEST(SeftGradient, PermutationLeavesGradientsUnchanged) {
  SeftModel model = fixture::tiny_model(8, 3, Aggregation::mean);
  Rng rng(8);
  auto obs = fixture::random_set(rng, 12, 3);
  const auto ref = seft_gradient(obs, model, 0).gradients;
  for (int i = 0; i < 10; ++i) {
    rng.shuffle(std::span<Observation>(obs));
    EXPECT_EQ(seft_gradient(obs, model, 0).gradients, ref);
  }
}

TEST(Loss, BceExamples) {
  auto a = bce_loss(0.0, 1);
  EXPECT_NEAR(a.loss, std::log(2.0), 1e-15);
  EXPECT_DOUBLE_EQ(a.gradient[0], -0.5);
  auto b = bce_loss(0.0, 0);
  EXPECT_DOUBLE_EQ(b.gradient[0], 0.5);
  auto c = bce_loss(100.0, 0);
  EXPECT_TRUE(std::isfinite(c.loss));
  EXPECT_NEAR(c.loss, static_cast<double>(oracle::bce(100.0L, 0)), 1e-12);
  EXPECT_NEAR(bce_loss(-800.0, 1).loss, 800.0, 1e-9);
  EXPECT_THROW(bce_loss(std::nan(""), 1), TrainingError);
}

TEST(Loss, SoftmaxCrossEntropyGradientSumsToZero) {
  const std::vector<double> l{0.5, -1.0, 2.0};
  const auto r = softmax_cross_entropy(l, 2);
  EXPECT_NEAR(r.gradient[0] + r.gradient[1] + r.gradient[2], 0.0, 1e-15);
  EXPECT_LT(r.gradient[2], 0.0);
  EXPECT_THROW(softmax_cross_entropy(l, 3), ValidationError);
}

TEST(ModelConfig, JsonRoundTripAndSpec) {
  ModelConfig c;
  c.latent_width = 17;
  c.aggregation = Aggregation::max;
  const auto back = nlohmann::json(c).get<ModelConfig>();
  EXPECT_EQ(back, c);
  const ModelSpec s = make_model_spec(ModelConfig{}, 8, 1);
  EXPECT_EQ(s.feature_width(), 4u + 1u + 8u);
  EXPECT_EQ(s.set.g.input_width, 32u * 4u);
  EXPECT_EQ(s.attention->summary_width(), 128u);
  EXPECT_THROW(aggregation_from_string("median"), ConfigError);
}
