#pragma once

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"
#include "seft/data/io.hpp"
#include "seft/data/types.hpp"
#include "seft/errors.hpp"
#include "seft/model/seft.hpp"
#include "seft/numerics/adam.hpp"
#include "seft/training/config.hpp"

namespace seft {

inline constexpr std::uint32_t kCheckpointVersion = 1;
inline constexpr std::array<char, 8> kCheckpointMagic = {'S', 'E', 'F', 'T', 'C', 'K', 'P', 'T'};

/// Everything needed to rebuild a trained model and resume its optimizer.
/// `meta` carries the normalization statistics of the training split.
struct Checkpoint {
  TrainConfig config;
  DatasetMeta meta;
  ParameterSet params;
  std::size_t epoch = 0;  // epoch the parameters were taken from (1-based)
  double best_value = -std::numeric_limits<double>::infinity();
  std::optional<AdamState> optimizer;

  std::string fingerprint() const { return meta_fingerprint(meta); }

  std::size_t outputs() const { return meta.class_count > 2 ? meta.class_count : 1; }

  ModelSpec model_spec() const { return make_model_spec(config.model, meta.total_modalities(), outputs()); }

  SeftModel model() const {
    SeftModel m(model_spec(), 0);
    m.load_parameters(params);
    return m;
  }

  friend bool operator==(const Checkpoint& a, const Checkpoint& b) {
    auto same_opt = [](const std::optional<AdamState>& x, const std::optional<AdamState>& y) {
      if (x.has_value() != y.has_value()) return false;
      if (!x) return true;
      return x->step == y->step && x->first_moment == y->first_moment && x->second_moment == y->second_moment &&
             x->learning_rate == y->learning_rate && x->beta1 == y->beta1 && x->beta2 == y->beta2 &&
             x->epsilon == y->epsilon;
    };
    const bool same_best = a.best_value == b.best_value || (std::isnan(a.best_value) && std::isnan(b.best_value));
    return a.config == b.config && a.meta == b.meta && a.params == b.params && a.epoch == b.epoch && same_best &&
           same_opt(a.optimizer, b.optimizer);
  }
};

namespace detail {

inline void put_u32(std::ostream& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.put(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_u64(std::ostream& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.put(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline std::uint64_t get_uint(std::istream& in, int bytes) {
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) {
    const int c = in.get();
    if (c == std::char_traits<char>::eof()) throw ValidationError("checkpoint is truncated");
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(c)) << (8 * i);
  }
  return v;
}

inline void put_values(std::ostream& out, const ParameterSet& p) {
  for (ParamId i = 0; i < p.size(); ++i) {
    for (double v : p[i].values()) put_u64(out, std::bit_cast<std::uint64_t>(v));
  }
}

inline void get_values(std::istream& in, ParameterSet& p) {
  for (ParamId i = 0; i < p.size(); ++i) {
    for (double& v : p[i].data()) v = std::bit_cast<double>(get_uint(in, 8));
  }
}

}  // namespace detail

inline nlohmann::json checkpoint_header(const Checkpoint& c) {
  using nlohmann::json;
  json layout = json::array();
  for (ParamId i = 0; i < c.params.size(); ++i) {
    layout.push_back({{"name", c.params.name(i)}, {"rows", c.params[i].rows()}, {"cols", c.params[i].cols()}});
  }
  json h{{"format_version", kCheckpointVersion},
         {"config", c.config},
         {"meta", c.meta},
         {"fingerprint", c.fingerprint()},
         {"parameters", layout},
         {"epoch", c.epoch},
         {"best_value", std::isfinite(c.best_value) ? json(c.best_value) : json(nullptr)}};
  if (c.optimizer) {
    h["optimizer"] = {{"kind", "adam"},
                      {"step", c.optimizer->step},
                      {"learning_rate", c.optimizer->learning_rate},
                      {"beta1", c.optimizer->beta1},
                      {"beta2", c.optimizer->beta2},
                      {"epsilon", c.optimizer->epsilon}};
  }
  return h;
}

/// Layout: magic, u32 version, u64 header length, JSON header, u64 value
/// count, then little-endian float64 values (parameters, then Adam first and
/// second moments when present).
inline void save_checkpoint(const Checkpoint& c, std::ostream& out) {
  const std::string header = checkpoint_header(c).dump();
  out.write(kCheckpointMagic.data(), kCheckpointMagic.size());
  detail::put_u32(out, kCheckpointVersion);
  detail::put_u64(out, header.size());
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  const std::size_t n = c.params.scalar_count() * (c.optimizer ? 3 : 1);
  detail::put_u64(out, n);
  detail::put_values(out, c.params);
  if (c.optimizer) {
    detail::put_values(out, c.optimizer->first_moment);
    detail::put_values(out, c.optimizer->second_moment);
  }
}

inline void save_checkpoint(const Checkpoint& c, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint '" + path + "'");
  save_checkpoint(c, out);
  if (!out) throw IoError("write failed for '" + path + "'");
}

inline Checkpoint load_checkpoint(std::istream& in) {
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kCheckpointMagic) throw ValidationError("not a checkpoint file");
  const auto version = detail::get_uint(in, 4);
  if (version != kCheckpointVersion) {
    throw CompatibilityError("unsupported checkpoint version " + std::to_string(version));
  }
  const auto header_len = detail::get_uint(in, 8);
  if (header_len > (std::uint64_t{1} << 30)) throw ValidationError("checkpoint header too large");
  std::string text(header_len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(header_len));
  if (!in) throw ValidationError("checkpoint is truncated");

  Checkpoint c;
  try {
    const auto h = nlohmann::json::parse(text);
    c.config = h.at("config").get<TrainConfig>();
    c.meta = h.at("meta").get<DatasetMeta>();
    if (h.at("fingerprint").get<std::string>() != c.fingerprint()) {
      throw CompatibilityError("checkpoint fingerprint does not match its meta");
    }
    c.epoch = h.at("epoch").get<std::size_t>();
    c.best_value = h.at("best_value").is_null() ? -std::numeric_limits<double>::infinity()
                                                : h.at("best_value").get<double>();
    for (const auto& p : h.at("parameters")) {
      c.params.add(p.at("name").get<std::string>(),
                   Matrix(p.at("rows").get<std::size_t>(), p.at("cols").get<std::size_t>()));
    }
    if (h.contains("optimizer")) {
      const auto& o = h.at("optimizer");
      AdamState a = AdamState::for_parameters(c.params, o.at("learning_rate").get<double>());
      a.step = o.at("step").get<std::uint64_t>();
      a.beta1 = o.at("beta1").get<double>();
      a.beta2 = o.at("beta2").get<double>();
      a.epsilon = o.at("epsilon").get<double>();
      c.optimizer = std::move(a);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed checkpoint header: ") + e.what());
  }

  const auto n = detail::get_uint(in, 8);
  if (n != c.params.scalar_count() * (c.optimizer ? 3 : 1)) {
    throw ValidationError("checkpoint payload size does not match its header");
  }
  detail::get_values(in, c.params);
  if (c.optimizer) {
    detail::get_values(in, c.optimizer->first_moment);
    detail::get_values(in, c.optimizer->second_moment);
  }
  // Shapes must also match what the config builds.
  SeftModel check(c.model_spec(), 0);
  if (!check.params().same_layout(c.params) || check.params().names() != c.params.names()) {
    throw CompatibilityError("checkpoint parameters do not match its model config");
  }
  return c;
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint '" + path + "'");
  return load_checkpoint(in);
}

}  // namespace seft
