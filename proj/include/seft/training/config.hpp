#pragma once

#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"
#include "seft/errors.hpp"
#include "seft/model/config.hpp"

namespace seft {

enum class Monitor { auprc, balanced_accuracy };

inline std::string to_string(Monitor m) { return m == Monitor::auprc ? "auprc" : "balanced_accuracy"; }

inline Monitor monitor_from_string(const std::string& s) {
  if (s == "auprc") return Monitor::auprc;
  if (s == "balanced_accuracy") return Monitor::balanced_accuracy;
  throw ConfigError("unknown monitor '" + s + "' (expected auprc or balanced_accuracy)");
}

struct TrainConfig {
  double learning_rate = 0.00081;
  std::size_t batch_size = 512;
  std::size_t max_epochs = 100;
  std::size_t patience = 30;
  Monitor monitor = Monitor::auprc;
  std::uint64_t seed = 0;
  bool normalize = true;
  ModelConfig model;

  void validate() const {
    if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
    if (batch_size < 2) throw ConfigError("batch_size must be at least 2");
    if (max_epochs == 0) throw ConfigError("max_epochs must be positive");
    if (patience == 0) throw ConfigError("patience must be positive");
    for (double p : {model.phi_dropout, model.rho_dropout, model.attn_dropout}) {
      if (!(p >= 0.0 && p < 1.0)) throw ConfigError("dropout rates must lie in [0,1)");
    }
  }

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

inline void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = c.model;
  j["learning_rate"] = c.learning_rate;
  j["batch_size"] = c.batch_size;
  j["max_epochs"] = c.max_epochs;
  j["patience"] = c.patience;
  j["monitor"] = to_string(c.monitor);
  j["seed"] = c.seed;
  j["normalize"] = c.normalize;
}

inline void from_json(const nlohmann::json& j, TrainConfig& c) {
  static const char* const known[] = {
      "learning_rate", "batch_size",   "max_epochs",     "patience",         "monitor",
      "seed",          "normalize",    "n_positional_dims", "max_timescale", "n_phi_layers",
      "phi_width",     "phi_dropout",  "latent_width",   "n_psi_layers",     "psi_width",
      "psi_latent_width", "n_heads",   "dot_prod_dim",   "attn_dropout",     "n_rho_layers",
      "rho_width",     "rho_dropout",  "aggregation"};
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok) throw ConfigError("unknown config key '" + key + "'");
  }
  try {
    TrainConfig d;
    c.model = j.get<ModelConfig>();
    c.learning_rate = j.value("learning_rate", d.learning_rate);
    c.batch_size = j.value("batch_size", d.batch_size);
    c.max_epochs = j.value("max_epochs", d.max_epochs);
    c.patience = j.value("patience", d.patience);
    c.monitor = monitor_from_string(j.value("monitor", to_string(d.monitor)));
    c.seed = j.value("seed", d.seed);
    c.normalize = j.value("normalize", d.normalize);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad config value: ") + e.what());
  }
}

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

/// `key = value` lines, `#` comments. Values that parse as JSON scalars
/// (numbers, true/false) keep that type, anything else is a string.
inline nlohmann::json parse_key_values(std::istream& in) {
  nlohmann::json j = nlohmann::json::object();
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(n) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("config line " + std::to_string(n) + ": empty key");
    if (j.contains(key)) throw ConfigError("config line " + std::to_string(n) + ": duplicate key '" + key + "'");
    auto parsed = nlohmann::json::parse(value, nullptr, false);
    j[key] = (parsed.is_discarded() || parsed.is_structured() || parsed.is_null()) ? nlohmann::json(value)
                                                                                   : parsed;
  }
  return j;
}

}  // namespace detail

/// Reads a JSON object or a key = value document; missing keys keep defaults.
inline TrainConfig parse_train_config(std::istream& in) {
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  const auto first = text.find_first_not_of(" \t\r\n");
  nlohmann::json j;
  if (first != std::string::npos && text[first] == '{') {
    j = nlohmann::json::parse(text, nullptr, false);
    if (j.is_discarded()) throw ConfigError("config is not valid JSON");
  } else {
    std::istringstream lines(text);
    j = detail::parse_key_values(lines);
  }
  TrainConfig c = j.get<TrainConfig>();
  c.validate();
  return c;
}

inline TrainConfig load_train_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path + "'");
  try {
    return parse_train_config(in);
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

}  // namespace seft
