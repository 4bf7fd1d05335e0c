#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "seft/encoding.hpp"
#include "seft/errors.hpp"
#include "seft/numerics/mlp.hpp"

namespace seft {

enum class Aggregation { mean, sum, max, attention };

inline std::string to_string(Aggregation a) {
  switch (a) {
    case Aggregation::mean: return "mean";
    case Aggregation::sum: return "sum";
    case Aggregation::max: return "max";
    case Aggregation::attention: return "attention";
  }
  return "?";
}

inline Aggregation aggregation_from_string(const std::string& s) {
  if (s == "mean") return Aggregation::mean;
  if (s == "sum") return Aggregation::sum;
  if (s == "max") return Aggregation::max;
  if (s == "attention") return Aggregation::attention;
  throw ConfigError("unknown aggregation '" + s + "'");
}

/// Architecture hyperparameters. Field names follow the usual SeFT-Attn
/// naming (phi = per-observation network h, psi = attention summary network,
/// rho = classifier g). Defaults are the P-Mortality selection.
struct ModelConfig {
  std::size_t n_positional_dims = 4;
  double max_timescale = 100.0;

  std::size_t n_phi_layers = 4;
  std::size_t phi_width = 128;
  double phi_dropout = 0.2;
  std::size_t latent_width = 32;

  std::size_t n_psi_layers = 2;
  std::size_t psi_width = 64;
  std::size_t psi_latent_width = 128;
  std::size_t n_heads = 4;
  std::size_t dot_prod_dim = 128;
  double attn_dropout = 0.5;

  std::size_t n_rho_layers = 2;
  std::size_t rho_width = 512;
  double rho_dropout = 0.0;

  Aggregation aggregation = Aggregation::attention;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

inline void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = nlohmann::json{{"n_positional_dims", c.n_positional_dims},
                     {"max_timescale", c.max_timescale},
                     {"n_phi_layers", c.n_phi_layers},
                     {"phi_width", c.phi_width},
                     {"phi_dropout", c.phi_dropout},
                     {"latent_width", c.latent_width},
                     {"n_psi_layers", c.n_psi_layers},
                     {"psi_width", c.psi_width},
                     {"psi_latent_width", c.psi_latent_width},
                     {"n_heads", c.n_heads},
                     {"dot_prod_dim", c.dot_prod_dim},
                     {"attn_dropout", c.attn_dropout},
                     {"n_rho_layers", c.n_rho_layers},
                     {"rho_width", c.rho_width},
                     {"rho_dropout", c.rho_dropout},
                     {"aggregation", to_string(c.aggregation)}};
}

inline void from_json(const nlohmann::json& j, ModelConfig& c) {
  ModelConfig d;
  c.n_positional_dims = j.value("n_positional_dims", d.n_positional_dims);
  c.max_timescale = j.value("max_timescale", d.max_timescale);
  c.n_phi_layers = j.value("n_phi_layers", d.n_phi_layers);
  c.phi_width = j.value("phi_width", d.phi_width);
  c.phi_dropout = j.value("phi_dropout", d.phi_dropout);
  c.latent_width = j.value("latent_width", d.latent_width);
  c.n_psi_layers = j.value("n_psi_layers", d.n_psi_layers);
  c.psi_width = j.value("psi_width", d.psi_width);
  c.psi_latent_width = j.value("psi_latent_width", d.psi_latent_width);
  c.n_heads = j.value("n_heads", d.n_heads);
  c.dot_prod_dim = j.value("dot_prod_dim", d.dot_prod_dim);
  c.attn_dropout = j.value("attn_dropout", d.attn_dropout);
  c.n_rho_layers = j.value("n_rho_layers", d.n_rho_layers);
  c.rho_width = j.value("rho_width", d.rho_width);
  c.rho_dropout = j.value("rho_dropout", d.rho_dropout);
  c.aggregation = aggregation_from_string(j.value("aggregation", to_string(d.aggregation)));
}

/// h, g and the aggregation of the sum-decomposed set function.
struct SetFunctionSpec {
  MlpSpec h;
  MlpSpec g;
  Aggregation aggregation = Aggregation::mean;
  std::size_t latent_width = 0;
};

/// Multi-head attention aggregation. The set summary f'(S) is itself a mean
/// set function: summary_g(mean_j summary_h(s_j)).
struct AttentionSpec {
  std::size_t heads = 4;
  std::size_t dot_prod_dim = 128;
  double dropout = 0.0;
  MlpSpec summary_h;
  MlpSpec summary_g;

  std::size_t summary_width() const { return summary_g.output_width(); }
};

struct ModelSpec {
  TimeEncodingSpec encoding;
  std::size_t modalities = 0;  // D' = dynamic modalities + statics
  std::size_t outputs = 1;
  SetFunctionSpec set;
  std::optional<AttentionSpec> attention;

  std::size_t feature_width() const { return seft::feature_width(encoding, modalities); }
};

namespace detail {

inline MlpSpec stack(std::size_t input, std::size_t hidden_layers, std::size_t hidden_width,
                     std::size_t output, double dropout, Activation final_activation) {
  MlpSpec s;
  s.input_width = input;
  s.widths.assign(hidden_layers, hidden_width);
  s.widths.push_back(output);
  s.dropout.assign(hidden_layers, dropout);
  s.final_activation = final_activation;
  return s;
}

}  // namespace detail

inline ModelSpec make_model_spec(const ModelConfig& c, std::size_t modalities, std::size_t outputs) {
  if (modalities == 0) throw ConfigError("model needs at least one modality");
  if (outputs == 0) throw ConfigError("model needs at least one output");
  if (c.latent_width == 0) throw ConfigError("latent_width must be positive");
  ModelSpec s;
  s.encoding = {c.n_positional_dims, c.max_timescale};
  s.encoding.validate();
  s.modalities = modalities;
  s.outputs = outputs;
  const std::size_t features = s.feature_width();

  s.set.aggregation = c.aggregation;
  s.set.latent_width = c.latent_width;
  s.set.h = detail::stack(features, c.n_phi_layers, c.phi_width, c.latent_width, c.phi_dropout,
                          Activation::identity);
  std::size_t g_in = c.latent_width;
  if (c.aggregation == Aggregation::attention) {
    if (c.n_heads == 0) throw ConfigError("n_heads must be positive");
    if (c.dot_prod_dim == 0) throw ConfigError("dot_prod_dim must be positive");
    if (!(c.attn_dropout >= 0.0 && c.attn_dropout < 1.0)) {
      throw ConfigError("attn_dropout must lie in [0,1)");
    }
    AttentionSpec a;
    a.heads = c.n_heads;
    a.dot_prod_dim = c.dot_prod_dim;
    a.dropout = c.attn_dropout;
    a.summary_h = detail::stack(features, c.n_psi_layers, c.psi_width, c.psi_latent_width, 0.0,
                                Activation::relu);
    a.summary_g = detail::stack(c.psi_latent_width, 0, 0, c.psi_latent_width, 0.0, Activation::relu);
    s.attention = a;
    g_in = c.latent_width * c.n_heads;
  }
  s.set.g = detail::stack(g_in, c.n_rho_layers, c.rho_width, outputs, c.rho_dropout,
                          Activation::identity);
  s.set.h.validate();
  s.set.g.validate();
  return s;
}

}  // namespace seft
