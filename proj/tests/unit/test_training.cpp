#include <gtest/gtest.h>

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "seft/seft.hpp"
#include "support/fixtures.hpp"

using namespace seft;

namespace {

// first `n` series vs the rest, both keeping the source schema
std::pair<Dataset, Dataset> cut(const Dataset& d, std::size_t n) {
  Dataset a{{d.series.begin(), d.series.begin() + static_cast<std::ptrdiff_t>(n)}, d.meta};
  Dataset b{{d.series.begin() + static_cast<std::ptrdiff_t>(n), d.series.end()}, d.meta};
  return {a, b};
}

std::string bytes_of(const Checkpoint& c) {
  std::ostringstream out;
  save_checkpoint(c, out);
  return out.str();
}

Checkpoint small_checkpoint() {
  const Dataset d = fixture::synthetic(60, 3.0, 5);
  auto [tr, va] = cut(d, 40);
  TrainConfig c = fixture::tiny_train_config(5);
  c.max_epochs = 2;
  return train(tr, va, c).checkpoint;
}

}  // namespace

TEST(TrainConfig, KeyValueAndJsonAgree) {
  std::istringstream kv("# comment\nlearning_rate = 0.01\nbatch_size=64\nmonitor = balanced_accuracy\n"
                        "aggregation = mean  # trailing\nnormalize = false\n");
  const TrainConfig a = parse_train_config(kv);
  EXPECT_DOUBLE_EQ(a.learning_rate, 0.01);
  EXPECT_EQ(a.batch_size, 64u);
  EXPECT_EQ(a.monitor, Monitor::balanced_accuracy);
  EXPECT_EQ(a.model.aggregation, Aggregation::mean);
  EXPECT_FALSE(a.normalize);
  EXPECT_EQ(a.patience, 30u);
  std::istringstream js(nlohmann::json(a).dump());
  EXPECT_EQ(parse_train_config(js), a);
}

TEST(TrainConfig, Rejections) {
  auto parse = [](const std::string& s) {
    std::istringstream in(s);
    return parse_train_config(in);
  };
  EXPECT_THROW(parse("learning_rte = 0.1\n"), ConfigError);
  EXPECT_THROW(parse("{\"bogus\": 1}"), ConfigError);
  EXPECT_THROW(parse("batch_size\n"), ConfigError);
  EXPECT_THROW(parse("patience = 0\n"), ConfigError);
  EXPECT_THROW(parse("phi_dropout = 1.0\n"), ConfigError);
  EXPECT_THROW(parse("monitor = loss\n"), ConfigError);
  EXPECT_THROW(parse("batch_size = many\n"), ConfigError);
  EXPECT_THROW(parse("seed = 1\nseed = 2\n"), ConfigError);
  EXPECT_THROW(load_train_config("/nonexistent/seft.cfg"), IoError);
}

TEST(TrainConfig, ShippedDefaultMatchesBuiltIn) {
  EXPECT_EQ(load_train_config(std::string(SEFT_SOURCE_DIR) + "/configs/default.cfg"), TrainConfig{});
}

TEST(EarlyStopping, StopsAfterPatienceEpochsWithoutStrictGain) {
  EarlyStopping s(3);
  const double trace[] = {0.5, 0.6, 0.6, 0.55, 0.59};
  const bool stops[] = {false, false, false, false, true};
  for (int i = 0; i < 5; ++i) EXPECT_EQ(s.update(trace[i]), stops[i]) << i;
  EXPECT_EQ(s.best_epoch(), 2u);
  EXPECT_DOUBLE_EQ(s.best(), 0.6);
}

TEST(EarlyStopping, NonFiniteNeverImproves) {
  EarlyStopping s(2);
  EXPECT_FALSE(s.update(std::nan("")));
  EXPECT_FALSE(s.improved());
  EXPECT_FALSE(s.update(0.1));
  EXPECT_TRUE(s.improved());
  EXPECT_FALSE(s.update(INFINITY));
  EXPECT_TRUE(s.update(0.05));
  EXPECT_THROW(EarlyStopping(0), ConfigError);
}

TEST(Training, DeterministicInSeed) {
  const Dataset d = fixture::synthetic(120, 2.0, 3);
  auto [tr, va] = cut(d, 80);
  const TrainConfig c = fixture::tiny_train_config(9);
  const TrainResult a = train(tr, va, c);
  const TrainResult b = train(tr, va, c);
  EXPECT_EQ(log_to_jsonl(a.log), log_to_jsonl(b.log));
  EXPECT_EQ(bytes_of(a.checkpoint), bytes_of(b.checkpoint));
  TrainConfig other = c;
  other.seed = 10;
  EXPECT_NE(log_to_jsonl(train(tr, va, other).log), log_to_jsonl(a.log));
}

TEST(Training, LogRecordsAndBestCheckpoint) {
  const Dataset d = fixture::synthetic(120, 2.0, 4);
  auto [tr, va] = cut(d, 80);
  std::size_t callbacks = 0;
  const TrainResult r = train(tr, va, fixture::tiny_train_config(4), [&](const nlohmann::json&) { ++callbacks; });
  ASSERT_EQ(r.log.size(), 5u);
  EXPECT_EQ(callbacks, 5u);
  double best = -1;
  for (const auto& rec : r.log) {
    for (const char* k : {"epoch", "steps", "train_loss", "val", "monitor_value", "best_value", "best_epoch", "improved"})
      EXPECT_TRUE(rec.contains(k)) << k;
    best = std::max(best, rec["monitor_value"].get<double>());
  }
  EXPECT_DOUBLE_EQ(r.checkpoint.best_value, best);
  // the stored parameters reproduce the logged score of their epoch
  const auto& rec = r.log[r.checkpoint.epoch - 1];
  EXPECT_DOUBLE_EQ(evaluate(va, r.checkpoint).auprc, rec["val"]["auprc"].get<double>());
}

TEST(Training, LearnsSeparableSignal) {
  const Dataset d = fixture::synthetic(400, 3.0, 6);
  auto [tr, va] = cut(d, 300);
  TrainConfig c = fixture::tiny_train_config(6);
  c.max_epochs = 8;
  const TrainResult r = train(tr, va, c);
  const EvalReport val = evaluate(va, r.checkpoint);
  const EvalReport fit = evaluate(tr, r.checkpoint);
  EXPECT_GE(val.auroc, 0.9);
  EXPECT_GE(fit.auroc, val.auroc - 0.05);
}

TEST(Training, NoSignalStopsEarlyNearChance) {
  const Dataset d = fixture::synthetic(900, 0.0, 7);
  auto [tr, va] = cut(d, 400);
  TrainConfig c = fixture::tiny_train_config(7);
  c.max_epochs = 40;
  c.patience = 4;
  const TrainResult r = train(tr, va, c);
  EXPECT_TRUE(r.stopped_early);
  EXPECT_LT(r.epochs_run, 40u);
  const double auroc = evaluate(va, r.checkpoint).auroc;
  EXPECT_GE(auroc, 0.4);
  EXPECT_LE(auroc, 0.6);
}

TEST(Training, ConstantPredictor) {
  Checkpoint c = small_checkpoint();
  for (ParamId i = 0; i < c.params.size(); ++i) c.params[i].fill(0.0);
  const Dataset d = fixture::synthetic(200, 3.0, 8);
  const EvalReport r = evaluate(d, c);
  EXPECT_EQ(r.auroc, 0.5);
  EXPECT_DOUBLE_EQ(r.auprc, r.prevalence);
}

TEST(Training, InputValidation) {
  const Dataset d = fixture::synthetic(60, 1.0, 9);
  auto [tr, va] = cut(d, 40);
  Dataset one_class = va;
  for (auto& s : one_class.series) s.label = 0;
  EXPECT_THROW(train(tr, one_class, fixture::tiny_train_config()), ValidationError);
  Dataset other = va;
  other.meta.statics.push_back("extra");
  EXPECT_THROW(train(tr, other, fixture::tiny_train_config()), CompatibilityError);
  Dataset multi = tr;
  multi.meta.class_count = 3;
  EXPECT_THROW(train(multi, va, fixture::tiny_train_config()), ConfigError);
  TrainConfig bad = fixture::tiny_train_config();
  bad.learning_rate = 0;
  EXPECT_THROW(train(tr, va, bad), ConfigError);
}

TEST(Checkpoint, RoundTripIsExact) {
  const Checkpoint c = small_checkpoint();
  std::istringstream in(bytes_of(c));
  const Checkpoint back = load_checkpoint(in);
  EXPECT_TRUE(back == c);
  EXPECT_EQ(bytes_of(back), bytes_of(c));
  const Dataset d = fixture::synthetic(30, 3.0, 10);
  for (const auto& s : d.series) {
    const auto obs = prepare({s}, c.meta).observations[0];
    EXPECT_EQ(seft_forward(obs, back.model()), seft_forward(obs, c.model()));
  }
}

TEST(Checkpoint, CorruptionIsReported) {
  const std::string good = bytes_of(small_checkpoint());
  auto load = [](std::string b) {
    std::istringstream in(b);
    return load_checkpoint(in);
  };
  std::string magic = good;
  magic[0] = 'X';
  EXPECT_THROW(load(magic), ValidationError);
  EXPECT_THROW(load(good.substr(0, good.size() - 5)), ValidationError);
  EXPECT_THROW(load(good.substr(0, 30)), ValidationError);
  std::string version = good;
  version[8] = 9;
  EXPECT_THROW(load(version), CompatibilityError);
  EXPECT_THROW(load_checkpoint(std::string("/nonexistent/x.ckpt")), IoError);
}

TEST(Checkpoint, EvaluateRejectsOtherSchema) {
  const Checkpoint c = small_checkpoint();
  Dataset d = fixture::synthetic(40, 3.0, 11);
  d.meta.statics.push_back("extra");
  EXPECT_THROW(evaluate(d, c), CompatibilityError);
}

TEST(Hypersearch, SamplingIsSeededAndInRange) {
  const SearchSpace space;
  const auto a = sample_configs(space, 20, 42);
  EXPECT_EQ(a, sample_configs(space, 20, 42));
  EXPECT_NE(a, sample_configs(space, 20, 43));
  for (const auto& c : a) {
    EXPECT_GE(c.model.n_phi_layers, 1u);
    EXPECT_LE(c.model.n_phi_layers, 5u);
    EXPECT_GE(c.learning_rate, 1e-4);
    EXPECT_LE(c.learning_rate, 1e-2);
    EXPECT_NE(std::find(space.latent_widths.begin(), space.latent_widths.end(), c.model.latent_width),
              space.latent_widths.end());
    EXPECT_NE(std::find(space.attn_dropouts.begin(), space.attn_dropouts.end(), c.model.attn_dropout),
              space.attn_dropouts.end());
    EXPECT_NO_THROW(c.validate());
  }
}

TEST(Hypersearch, SingleTrialRanks) {
  const Dataset d = fixture::synthetic(60, 3.0, 12);
  auto [tr, va] = cut(d, 40);
  SearchSpace space;
  space.max_layers = 1;
  space.widths = {8};
  space.latent_widths = {8};
  space.batch_sizes = {16};
  TrainConfig base = fixture::tiny_train_config();
  base.max_epochs = 1;
  const auto r = hypersearch(tr, va, space, 2, 3, base);
  ASSERT_EQ(r.size(), 2u);
  EXPECT_GE(r[0].best_value, r[1].best_value);
  EXPECT_THROW(hypersearch(tr, va, space, 0, 3, base), ArgumentError);
}
