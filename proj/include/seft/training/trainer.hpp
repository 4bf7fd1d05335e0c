#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "json.hpp"
#include "seft/data/batching.hpp"
#include "seft/data/io.hpp"
#include "seft/data/normalize.hpp"
#include "seft/data/types.hpp"
#include "seft/errors.hpp"
#include "seft/metrics.hpp"
#include "seft/model/seft.hpp"
#include "seft/numerics/adam.hpp"
#include "seft/numerics/compensated_sum.hpp"
#include "seft/numerics/softmax.hpp"
#include "seft/random.hpp"
#include "seft/training/checkpoint.hpp"
#include "seft/training/config.hpp"
#include "seft/training/early_stopping.hpp"

namespace seft {

/// Model-space view of a split: normalized values, statics injected, sets
/// already in canonical order.
struct PreparedData {
  std::vector<std::vector<Observation>> observations;
  std::vector<int> labels;
  std::vector<std::string> ids;

  std::size_t size() const noexcept { return labels.size(); }
};

inline PreparedData prepare(const std::vector<TimeSeriesSet>& series, const DatasetMeta& meta) {
  PreparedData out;
  const auto normalized = meta.normalized ? normalize(series, meta) : series;
  for (const auto& s : normalized) {
    out.observations.push_back(canonicalize(model_observations(s, meta)).sorted);
    out.labels.push_back(s.label);
    out.ids.push_back(s.id);
  }
  return out;
}

/// Sigmoid of the first logit per instance.
inline std::vector<double> predict_scores(const SeftModel& model, const PreparedData& data) {
  std::vector<double> scores;
  scores.reserve(data.size());
  for (const auto& obs : data.observations) scores.push_back(sigmoid(seft_forward(obs, model).front()));
  return scores;
}

struct TrainResult {
  Checkpoint checkpoint;  // parameters from the best validation epoch
  std::vector<nlohmann::json> log;
  std::size_t epochs_run = 0;
  bool stopped_early = false;
  std::vector<std::string> warnings;
};

inline double monitor_value(const EvalReport& r, Monitor m) {
  return m == Monitor::auprc ? r.auprc : r.balanced_accuracy;
}

namespace detail {

inline void require_binary(const Dataset& d, const char* what) {
  if (d.series.empty()) throw ValidationError(std::string(what) + " split is empty");
  for (const auto& s : d.series) {
    if (s.label != 0 && s.label != 1) {
      throw ValidationError(std::string(what) + " instance '" + s.id + "' needs a 0/1 label");
    }
  }
}

}  // namespace detail

using EpochCallback = std::function<void(const nlohmann::json&)>;

/// Balanced-batch Adam training with early stopping on the validation
/// monitor. Deterministic in (data, config); the seed drives initialization,
/// batch order and dropout masks through independent derived streams.
inline TrainResult train(const Dataset& train_data, const Dataset& val_data, const TrainConfig& config,
                         const EpochCallback& on_epoch = {}) {
  config.validate();
  detail::require_binary(train_data, "training");
  detail::require_binary(val_data, "validation");
  if (train_data.meta.class_count > 2) {
    throw ConfigError("training supports binary tasks only (C = " + std::to_string(train_data.meta.class_count) +
                      ")");
  }
  if (meta_fingerprint(train_data.meta) != meta_fingerprint(val_data.meta)) {
    throw CompatibilityError("training and validation data have different schemas");
  }

  DatasetMeta meta = train_data.meta;
  meta.class_count = 2;
  if (config.normalize) {
    meta = fit_normalization(train_data.series, meta);
  } else {
    meta.channels.assign(meta.total_modalities(), ChannelStats{});
    meta.normalized = false;
  }
  const PreparedData train_set = prepare(train_data.series, meta);
  const PreparedData val_set = prepare(val_data.series, meta);
  {
    const auto c = detail::count_classes(val_set.labels);
    if (c.positives == 0 || c.negatives == 0) throw ValidationError("validation split needs both classes");
  }

  TrainResult result;
  std::size_t largest_set = 0;
  for (const auto& o : train_set.observations) largest_set = std::max(largest_set, o.size());
  if (config.model.latent_width < largest_set) {
    result.warnings.push_back("latent_width " + std::to_string(config.model.latent_width) +
                              " is below the largest set size " + std::to_string(largest_set) +
                              "; sum-decomposition is not guaranteed to be universal");
  }

  BalancedBatcher batcher(train_set.labels, config.batch_size, derive_seed(config.seed, 2));
  SeftModel model(make_model_spec(config.model, meta.total_modalities(), 1), derive_seed(config.seed, 3));
  AdamState adam = AdamState::for_parameters(model.params(), config.learning_rate);
  EarlyStopping stopper(config.patience);
  const std::uint64_t dropout_seed = derive_seed(config.seed, 1);

  Checkpoint& best = result.checkpoint;
  best.config = config;
  best.meta = meta;
  best.params = model.params();
  best.optimizer = adam;

  ParameterSet grads = model.params().zeros_like();
  const double inv_batch = 1.0 / static_cast<double>(config.batch_size);
  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const std::uint64_t epoch_seed = derive_seed(dropout_seed, epoch);
    CompensatedSum epoch_loss;
    std::size_t seen = 0;
    for (std::size_t step = 0; step < batcher.steps_per_epoch(); ++step) {
      const auto batch = batcher.next_batch();
      grads.set_zero();
      for (std::size_t k = 0; k < batch.size(); ++k) {
        const std::size_t idx = batch[k];
        Rng rng(derive_seed(epoch_seed, step * config.batch_size + k));
        double loss = 0.0;
        try {
          loss = accumulate_gradient(train_set.observations[idx], model, train_set.labels[idx], grads, Mode::train,
                                     &rng);
        } catch (const TrainingError& e) {
          throw TrainingError("epoch " + std::to_string(epoch) + ", step " + std::to_string(step + 1) +
                              ", instance '" + train_set.ids[idx] + "': " + e.what());
        }
        if (!std::isfinite(loss)) {
          throw TrainingError("non-finite loss at epoch " + std::to_string(epoch) + ", step " +
                              std::to_string(step + 1) + " (instance '" + train_set.ids[idx] + "')");
        }
        epoch_loss.add(loss);
        ++seen;
      }
      grads *= inv_batch;
      adam_step(adam, model.params(), grads);
    }

    const auto scores = predict_scores(model, val_set);
    for (double s : scores) {
      if (!std::isfinite(s)) throw TrainingError("non-finite validation score at epoch " + std::to_string(epoch));
    }
    const EvalReport report = evaluate_scores(scores, val_set.labels);
    const double monitored = monitor_value(report, config.monitor);
    const bool stop = stopper.update(monitored);
    if (stopper.improved()) {
      best.params = model.params();
      best.optimizer = adam;
      best.epoch = epoch;
      best.best_value = monitored;
    }

    nlohmann::json record{{"epoch", epoch},
                          {"steps", batcher.steps_per_epoch()},
                          {"train_loss", epoch_loss.value() / static_cast<double>(seen)},
                          {"val", report},
                          {"monitor", to_string(config.monitor)},
                          {"monitor_value", monitored},
                          {"best_value", stopper.best()},
                          {"best_epoch", stopper.best_epoch()},
                          {"improved", stopper.improved()}};
    result.log.push_back(record);
    result.epochs_run = epoch;
    if (on_epoch) on_epoch(record);
    if (stop) {
      result.stopped_early = true;
      break;
    }
  }
  return result;
}

/// Metrics of a checkpoint on a labeled split. The data's schema must match
/// the one the checkpoint was trained on.
inline EvalReport evaluate(const Dataset& data, const Checkpoint& checkpoint) {
  if (meta_fingerprint(data.meta) != checkpoint.fingerprint()) {
    throw CompatibilityError("dataset schema " + meta_fingerprint(data.meta) + " does not match checkpoint " +
                             checkpoint.fingerprint());
  }
  detail::require_binary(data, "evaluation");
  const SeftModel model = checkpoint.model();
  const PreparedData prepared = prepare(data.series, checkpoint.meta);
  return evaluate_scores(predict_scores(model, prepared), prepared.labels);
}

/// JSON-lines form of a training log.
inline std::string log_to_jsonl(const std::vector<nlohmann::json>& log) {
  std::string out;
  for (const auto& r : log) out += r.dump() + "\n";
  return out;
}

}  // namespace seft
