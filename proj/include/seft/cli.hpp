#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "seft/data/io.hpp"
#include "seft/data/normalize.hpp"
#include "seft/data/split.hpp"
#include "seft/data/synthetic.hpp"
#include "seft/errors.hpp"
#include "seft/metrics.hpp"
#include "seft/model/attention.hpp"
#include "seft/online.hpp"
#include "seft/training/checkpoint.hpp"
#include "seft/training/config.hpp"
#include "seft/training/hypersearch.hpp"
#include "seft/training/trainer.hpp"

namespace seft {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInvalid = 1;
inline constexpr int kExitIo = 2;

/// Schema sidecar written next to every generated dataset.
inline std::string meta_path_for(const std::string& data_path) { return data_path + ".meta.json"; }

/// Reads a dataset, validating against `meta_path` (or the sidecar next to
/// the data when present); otherwise the schema is inferred.
inline Dataset load_dataset(const std::string& path, const std::string& meta_path = {}) {
  std::string mp = meta_path;
  if (mp.empty() && std::filesystem::exists(meta_path_for(path))) mp = meta_path_for(path);
  if (mp.empty()) return parse_dataset(path);
  const DatasetMeta meta = read_meta(mp);
  return parse_dataset(path, &meta);
}

namespace detail {

struct GlobalOptions {
  std::optional<std::uint64_t> seed;
  std::string config;
  bool quiet = false;
  std::string format = "human";

  bool json() const { return format == "json"; }
  std::uint64_t seed_or(std::uint64_t fallback) const { return seed.value_or(fallback); }
};

inline TrainConfig resolve_config(const GlobalOptions& g) {
  TrainConfig c = g.config.empty() ? TrainConfig{} : load_train_config(g.config);
  if (g.seed) c.seed = *g.seed;
  return c;
}

inline std::string fixed(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

/// Splits off a stratified 80/20 validation part when no file is given.
inline std::pair<Dataset, Dataset> train_val(const std::string& data, const std::string& val,
                                             const std::string& meta, std::uint64_t seed) {
  Dataset train_set = load_dataset(data, meta);
  if (!val.empty()) {
    std::string val_meta = meta;
    if (val_meta.empty() && !std::filesystem::exists(meta_path_for(val)) &&
        std::filesystem::exists(meta_path_for(data))) {
      val_meta = meta_path_for(data);
    }
    Dataset val_set = load_dataset(val, val_meta);
    return {std::move(train_set), std::move(val_set)};
  }
  const double fractions[] = {0.8, 0.2};
  auto parts = split_stratified(train_set.series, fractions, derive_seed(seed, 17));
  Dataset a{std::move(parts[0]), train_set.meta};
  Dataset b{std::move(parts[1]), train_set.meta};
  return {std::move(a), std::move(b)};
}

inline void print_report(std::ostream& out, const EvalReport& r) {
  out << "n                  " << r.n << "\n"
      << "prevalence         " << fixed(r.prevalence) << "\n"
      << "accuracy           " << fixed(r.accuracy) << "\n"
      << "balanced_accuracy  " << fixed(r.balanced_accuracy) << "\n"
      << "auroc              " << fixed(r.auroc) << "\n"
      << "auprc              " << fixed(r.auprc) << "\n";
}

/// One line of predict-online input: [t, value, modality], an object with
/// t/value/modality, or {"static": name, "value": v}.
inline Observation parse_event(const std::string& line, const DatasetMeta& meta) {
  const auto j = nlohmann::json::parse(line, nullptr, false);
  if (j.is_discarded()) throw ParseError("malformed JSON event", 0);
  Observation o;
  if (j.is_array() && j.size() == 3 && j[0].is_number() && j[1].is_number() && j[2].is_number_integer()) {
    o = {j[0].get<double>(), j[1].get<double>(), j[2].get<int>()};
  } else if (j.is_object() && j.contains("static")) {
    if (!j.at("static").is_string() || !j.contains("value") || !j.at("value").is_number()) {
      throw ValidationError("static event needs a name and a numeric value");
    }
    const std::size_t ch = static_channel(meta, j.at("static").get<std::string>());
    return {0.0, normalize_value(meta, ch, j.at("value").get<double>()), static_cast<int>(ch + 1)};
  } else if (j.is_object() && j.contains("t") && j.contains("value") && j.contains("modality")) {
    if (!j.at("t").is_number() || !j.at("value").is_number() || !j.at("modality").is_number_integer()) {
      throw ValidationError("event fields t/value must be numbers and modality an integer");
    }
    o = {j.at("t").get<double>(), j.at("value").get<double>(), j.at("modality").get<int>()};
  } else {
    throw ValidationError("event must be [t, value, modality] or an object with t, value, modality");
  }
  if (!std::isfinite(o.time) || o.time < 0.0 || !std::isfinite(o.value)) {
    throw ValidationError("event time and value must be finite, time >= 0");
  }
  o.value = normalize_value(meta, dynamic_channel(meta, o.modality), o.value);
  return o;
}

}  // namespace detail

/// Entry point of the command-line tool. Returns the process exit code.
inline int run_cli(int argc, const char* const* argv, std::istream& in, std::ostream& out, std::ostream& err) {
  CLI::App app{"SeFT set-function classifier for irregular time series", "seft"};
  app.require_subcommand(1);
  app.fallthrough();

  detail::GlobalOptions g;
  std::uint64_t seed_value = 0;
  auto* seed_opt = app.add_option("--seed", seed_value, "Seed for all randomness");
  app.add_option("--config", g.config, "Training config (key = value or JSON)");
  app.add_flag("--quiet", g.quiet, "Suppress progress output");
  app.add_option("--format", g.format, "Output format")->check(CLI::IsMember({"human", "json"}));

  // synth-data
  auto* synth = app.add_subcommand("synth-data", "Generate a synthetic irregular time-series dataset");
  std::string synth_out;
  SyntheticSpec spec;
  synth->add_option("--out", synth_out, "Output JSON-lines file")->required();
  synth->add_option("--n", spec.instances, "Number of instances")->check(CLI::PositiveNumber);
  synth->add_option("--prevalence", spec.prevalence, "Fraction of positive instances");
  synth->add_option("--amplitude", spec.amplitude, "Signal strength in noise standard deviations");
  synth->add_option("--modalities", spec.modalities, "Number of dynamic modalities");
  synth->add_option("--mean-observations", spec.mean_observations, "Mean observations per instance");
  synth->add_option("--statics", spec.statics, "Number of static variables");
  synth->add_option("--max-time", spec.max_time, "Observation window length");

  // train
  auto* train_cmd = app.add_subcommand("train", "Train a SeFT-Attn model");
  std::string data_path, val_path, meta_path, model_path, log_path;
  std::size_t max_epochs = 0, repeat = 1;
  train_cmd->add_option("--data", data_path, "Training data")->required();
  train_cmd->add_option("--val", val_path, "Validation data (default: stratified 20% of --data)");
  train_cmd->add_option("--meta", meta_path, "Schema file (default: <data>.meta.json if present)");
  train_cmd->add_option("--out", model_path, "Checkpoint to write")->required();
  train_cmd->add_option("--log", log_path, "Training log (default: <out>.log.jsonl)");
  train_cmd->add_option("--max-epochs", max_epochs, "Override max_epochs");
  bool no_normalize = false;
  train_cmd->add_flag("--no-normalize", no_normalize, "Feed raw values to the model");
  train_cmd->add_option("--repeat", repeat, "Independent runs with derived seeds")->check(CLI::PositiveNumber);

  // evaluate
  auto* eval_cmd = app.add_subcommand("evaluate", "Evaluate a checkpoint on labeled data");
  eval_cmd->add_option("--data", data_path, "Labeled data")->required();
  eval_cmd->add_option("--meta", meta_path, "Schema file");
  eval_cmd->add_option("--model", model_path, "Checkpoint")->required();

  // predict-online
  auto* online_cmd = app.add_subcommand("predict-online", "Cumulative predictions over an event stream on stdin");
  online_cmd->add_option("--model", model_path, "Checkpoint")->required();

  // attention-export
  auto* attn_cmd = app.add_subcommand("attention-export", "Write per-observation attention weights as CSV");
  std::string csv_path, only_id;
  attn_cmd->add_option("--model", model_path, "Checkpoint")->required();
  attn_cmd->add_option("--data", data_path, "Data to explain")->required();
  attn_cmd->add_option("--meta", meta_path, "Schema file");
  attn_cmd->add_option("--out", csv_path, "CSV output")->required();
  attn_cmd->add_option("--id", only_id, "Only this instance");

  // hypersearch
  auto* search_cmd = app.add_subcommand("hypersearch", "Random hyperparameter search");
  std::size_t trials = 20;
  std::string search_out;
  search_cmd->add_option("--data", data_path, "Training data")->required();
  search_cmd->add_option("--val", val_path, "Validation data");
  search_cmd->add_option("--meta", meta_path, "Schema file");
  search_cmd->add_option("--n", trials, "Number of sampled configurations")->check(CLI::PositiveNumber);
  search_cmd->add_option("--max-epochs", max_epochs, "Override max_epochs for every trial");
  search_cmd->add_option("--out", search_out, "Ranked results as JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return kExitInvalid;
  }
  if (seed_opt->count() > 0) g.seed = seed_value;
  auto progress = [&](const std::string& s) {
    if (!g.quiet) err << s << "\n";
  };

  try {
    if (*synth) {
      const Dataset ds = generate_synthetic(spec, g.seed_or(0));
      write_dataset(synth_out, ds.series);
      write_meta(meta_path_for(synth_out), ds.meta);
      std::size_t positives = 0;
      for (const auto& s : ds.series) positives += s.label == 1;
      if (g.json()) {
        out << nlohmann::json{{"out", synth_out}, {"n", ds.series.size()}, {"positives", positives}}.dump() << "\n";
      } else {
        out << "wrote " << ds.series.size() << " instances (" << positives << " positive) to " << synth_out << "\n";
      }
      return kExitOk;
    }

    if (*train_cmd) {
      TrainConfig config = detail::resolve_config(g);
      if (max_epochs > 0) config.max_epochs = max_epochs;
      if (no_normalize) config.normalize = false;
      auto [train_set, val_set] = detail::train_val(data_path, val_path, meta_path, config.seed);
      nlohmann::json runs = nlohmann::json::array();
      for (std::size_t r = 0; r < repeat; ++r) {
        TrainConfig run_config = config;
        if (r > 0) run_config.seed = derive_seed(config.seed, r);
        const std::string suffix = r == 0 ? "" : ".r" + std::to_string(r);
        const auto result = train(train_set, val_set, run_config, [&](const nlohmann::json& rec) {
          progress("epoch " + rec["epoch"].dump() + "  loss " + detail::fixed(rec["train_loss"].get<double>()) +
                   "  val auroc " + detail::fixed(rec["val"]["auroc"].get<double>()) + "  auprc " +
                   detail::fixed(rec["val"]["auprc"].get<double>()) + "  bal_acc " +
                   detail::fixed(rec["val"]["balanced_accuracy"].get<double>()));
        });
        for (const auto& w : result.warnings) progress("warning: " + w);
        save_checkpoint(result.checkpoint, model_path + suffix);
        const std::string lp = (log_path.empty() ? model_path + ".log.jsonl" : log_path) + suffix;
        std::ofstream log(lp, std::ios::binary);
        if (!log) throw IoError("cannot write training log '" + lp + "'");
        log << log_to_jsonl(result.log);
        runs.push_back({{"checkpoint", model_path + suffix},
                        {"seed", run_config.seed},
                        {"best_epoch", result.checkpoint.epoch},
                        {"best_value", result.checkpoint.best_value},
                        {"epochs_run", result.epochs_run},
                        {"monitor", to_string(config.monitor)}});
      }
      if (g.json()) {
        out << (repeat == 1 ? runs[0] : runs).dump() << "\n";
      } else {
        for (const auto& r : runs) {
          out << r["checkpoint"].get<std::string>() << ": best " << r["monitor"].get<std::string>() << " "
              << detail::fixed(r["best_value"].get<double>()) << " at epoch " << r["best_epoch"].dump() << " of "
              << r["epochs_run"].dump() << "\n";
        }
      }
      return kExitOk;
    }

    if (*eval_cmd) {
      const Checkpoint ckpt = load_checkpoint(model_path);
      const Dataset ds = load_dataset(data_path, meta_path);
      const EvalReport report = evaluate(ds, ckpt);
      // JSON unless a human table is asked for explicitly.
      if (g.format == "human" && app.get_option("--format")->count() > 0) {
        detail::print_report(out, report);
      } else {
        out << nlohmann::json(report).dump() << "\n";
      }
      return kExitOk;
    }

    if (*online_cmd) {
      const Checkpoint ckpt = load_checkpoint(model_path);
      const SeftModel model = ckpt.model();
      const OnlinePredictor predictor(model);
      OnlineState state = predictor.init();
      std::string line;
      std::size_t n = 0;
      while (std::getline(in, line)) {
        ++n;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
          predictor.ingest(state, detail::parse_event(line, ckpt.meta));
        } catch (const ParseError&) {
          throw ParseError("malformed JSON event", n);
        } catch (const Error& e) {
          throw ValidationError("line " + std::to_string(n) + ": " + e.what());
        }
        const PrefixPrediction p = predictor.predict(state);
        out << nlohmann::json{{"t", p.time}, {"logits", p.logits}, {"score", p.score}}.dump() << "\n";
        out.flush();
      }
      return kExitOk;
    }

    if (*attn_cmd) {
      const Checkpoint ckpt = load_checkpoint(model_path);
      const SeftModel model = ckpt.model();
      const Dataset ds = load_dataset(data_path, meta_path);
      if (meta_fingerprint(ds.meta) != ckpt.fingerprint()) {
        throw CompatibilityError("dataset schema does not match the checkpoint");
      }
      const auto normalized = ckpt.meta.normalized ? normalize(ds.series, ckpt.meta) : ds.series;
      std::ofstream csv(csv_path, std::ios::binary);
      if (!csv) throw IoError("cannot open '" + csv_path + "' for writing");
      csv << kAttentionCsvHeader << '\n';
      std::size_t written = 0;
      for (std::size_t i = 0; i < ds.series.size(); ++i) {
        if (!only_id.empty() && ds.series[i].id != only_id) continue;
        const auto raw = model_observations(ds.series[i], ckpt.meta);
        const auto trace = attention_weights(model_observations(normalized[i], ckpt.meta), model);
        export_attention(ds.series[i].id, raw, trace, csv);
        ++written;
      }
      if (!csv) throw IoError("write failed for '" + csv_path + "'");
      if (!only_id.empty() && written == 0) throw ValidationError("no instance with id '" + only_id + "'");
      if (g.json()) {
        out << nlohmann::json{{"out", csv_path}, {"instances", written}}.dump() << "\n";
      } else {
        out << "wrote attention for " << written << " instances to " << csv_path << "\n";
      }
      return kExitOk;
    }

    if (*search_cmd) {
      TrainConfig base = detail::resolve_config(g);
      if (max_epochs > 0) base.max_epochs = max_epochs;
      auto [train_set, val_set] = detail::train_val(data_path, val_path, meta_path, base.seed);
      const auto ranked = hypersearch(train_set, val_set, SearchSpace{}, trials, base.seed, base,
                                      [&](const TrialResult& t) {
                                        progress("trial " + std::to_string(t.trial + 1) + ": best " +
                                                 detail::fixed(t.best_value) + " at epoch " +
                                                 std::to_string(t.best_epoch));
                                      });
      const nlohmann::json j = ranked;
      if (!search_out.empty()) {
        std::ofstream f(search_out, std::ios::binary);
        if (!f) throw IoError("cannot write '" + search_out + "'");
        f << j.dump(2) << "\n";
      }
      if (g.json()) {
        out << j.dump() << "\n";
      } else {
        out << "rank  trial  best     lr        batch  latent\n";
        for (std::size_t r = 0; r < ranked.size(); ++r) {
          char buf[128];
          std::snprintf(buf, sizeof buf, "%-5zu %-6zu %-8.4f %-9.2e %-6zu %zu\n", r + 1, ranked[r].trial + 1,
                        ranked[r].best_value, ranked[r].config.learning_rate, ranked[r].config.batch_size,
                        ranked[r].config.model.latent_width);
          out << buf;
        }
      }
      return kExitOk;
    }
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const nlohmann::json::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitInvalid;
  }
  return kExitInvalid;
}

}  // namespace seft
