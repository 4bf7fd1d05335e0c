#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "seft/data/types.hpp"
#include "seft/errors.hpp"

namespace seft {

using json = nlohmann::json;

inline constexpr int kFormatVersion = 1;

inline void to_json(json& j, const ChannelStats& c) { j = json{{"mean", c.mean}, {"std", c.stddev}}; }

inline void from_json(const json& j, ChannelStats& c) {
  c.mean = j.at("mean").get<double>();
  c.stddev = j.at("std").get<double>();
}

inline void to_json(json& j, const DatasetMeta& m) {
  j = json{{"format_version", m.format_version},
           {"D", m.modality_count},
           {"C", m.class_count},
           {"channels", m.channels},
           {"statics", m.statics},
           {"max_time", m.max_time},
           {"normalized", m.normalized}};
}

inline void from_json(const json& j, DatasetMeta& m) {
  m.format_version = j.value("format_version", kFormatVersion);
  if (m.format_version != kFormatVersion) {
    throw ValidationError("unsupported meta format_version " + std::to_string(m.format_version));
  }
  m.modality_count = j.at("D").get<std::size_t>();
  m.class_count = j.at("C").get<std::size_t>();
  m.channels = j.value("channels", std::vector<ChannelStats>{});
  m.statics = j.value("statics", std::vector<std::string>{});
  m.max_time = j.value("max_time", 0.0);
  m.normalized = j.value("normalized", false);
  if (!m.channels.empty() && m.channels.size() != m.total_modalities()) {
    throw ValidationError("meta lists " + std::to_string(m.channels.size()) +
                          " channels, expected " + std::to_string(m.total_modalities()));
  }
}

/// FNV-1a over the schema part of the meta (D, C, static names). Channel
/// statistics are excluded: they belong to the training split, not the data
/// layout, and evaluation files are checked before normalization.
inline std::string meta_fingerprint(const DatasetMeta& meta) {
  const std::string text =
      json{{"format_version", meta.format_version}, {"D", meta.modality_count}, {"C", meta.class_count},
           {"statics", meta.statics}}
          .dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace detail {

inline TimeSeriesSet parse_record(const json& j, std::size_t line, const DatasetMeta* schema) {
  auto fail = [line](const std::string& msg) { return ValidationError("line " + std::to_string(line) + ": " + msg); };
  if (!j.is_object()) throw ParseError("record is not a JSON object", line);
  if (j.contains("format_version") && j.at("format_version") != kFormatVersion) {
    throw fail("unsupported format_version");
  }
  TimeSeriesSet s;
  if (!j.contains("id") || !j.at("id").is_string()) throw ParseError("missing string field 'id'", line);
  s.id = j.at("id").get<std::string>();
  if (j.contains("label") && !j.at("label").is_null()) {
    if (!j.at("label").is_number_integer()) throw ParseError("'label' must be an integer", line);
    s.label = j.at("label").get<int>();
    if (s.label < 0) throw fail("label must be non-negative");
    if (schema != nullptr && static_cast<std::size_t>(s.label) >= schema->class_count) {
      throw fail("label " + std::to_string(s.label) + " outside the declared class count");
    }
  }
  if (j.contains("statics")) {
    const json& st = j.at("statics");
    if (!st.is_object()) throw ParseError("'statics' must be an object", line);
    for (const auto& [name, v] : st.items()) {
      if (!v.is_number()) throw ParseError("static '" + name + "' is not a number", line);
      const double x = v.get<double>();
      if (!std::isfinite(x)) throw fail("static '" + name + "' is not finite");
      if (schema != nullptr &&
          std::find(schema->statics.begin(), schema->statics.end(), name) == schema->statics.end()) {
        throw fail("static '" + name + "' is not in the schema");
      }
      s.statics.emplace(name, x);
    }
  }
  if (!j.contains("events") || !j.at("events").is_array()) {
    throw ParseError("missing array field 'events'", line);
  }
  std::set<std::pair<double, int>> seen;
  for (const json& e : j.at("events")) {
    if (!e.is_array() || e.size() != 3 || !e[0].is_number() || !e[1].is_number() ||
        !e[2].is_number_integer()) {
      throw ParseError("event must be [time, value, modality]", line);
    }
    Observation o{e[0].get<double>(), e[1].get<double>(), e[2].get<int>()};
    if (!std::isfinite(o.time) || o.time < 0.0) throw fail("event time must be finite and >= 0");
    if (!std::isfinite(o.value)) throw fail("event value must be finite");
    if (o.modality < 1) throw fail("modality must be >= 1");
    if (schema != nullptr && static_cast<std::size_t>(o.modality) > schema->modality_count) {
      throw fail("modality " + std::to_string(o.modality) + " exceeds D=" +
                 std::to_string(schema->modality_count));
    }
    if (!seen.emplace(o.time, o.modality).second) {
      throw fail("duplicate observation of modality " + std::to_string(o.modality) + " at t=" +
                 std::to_string(o.time));
    }
    s.observations.push_back(o);
  }
  if (s.observations.empty()) throw fail("instance '" + s.id + "' has no events");
  return s;
}

}  // namespace detail

/// Reads one JSON record per line. With `schema` the records are validated
/// against it and it becomes the returned meta; otherwise D, C and the static
/// schema are inferred from the data (channel statistics are left at 0/1).
inline Dataset parse_dataset(std::istream& in, const DatasetMeta* schema = nullptr) {
  Dataset ds;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(text);
    } catch (const json::parse_error& e) {
      throw ParseError(std::string("malformed JSON: ") + e.what(), line);
    }
    ds.series.push_back(detail::parse_record(j, line, schema));
  }

  if (schema != nullptr) {
    ds.meta = *schema;
    return ds;
  }
  DatasetMeta& m = ds.meta;
  std::set<std::string> statics;
  int max_label = -1;
  for (const auto& s : ds.series) {
    for (const auto& o : s.observations) {
      m.modality_count = std::max(m.modality_count, static_cast<std::size_t>(o.modality));
      m.max_time = std::max(m.max_time, o.time);
    }
    for (const auto& [name, v] : s.statics) statics.insert(name);
    max_label = std::max(max_label, s.label);
  }
  m.class_count = static_cast<std::size_t>(max_label + 1);
  m.statics.assign(statics.begin(), statics.end());
  m.channels.assign(m.total_modalities(), ChannelStats{});
  return ds;
}

inline Dataset parse_dataset(const std::string& path, const DatasetMeta* schema = nullptr) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open dataset '" + path + "'");
  try {
    return parse_dataset(in, schema);
  } catch (const ParseError& e) {
    throw e.with_context(path);
  } catch (const ValidationError& e) {
    throw ValidationError(path + ": " + e.what());
  }
}

inline json record_to_json(const TimeSeriesSet& s) {
  json events = json::array();
  for (const auto& o : s.observations) events.push_back(json::array({o.time, o.value, o.modality}));
  json j{{"format_version", kFormatVersion}, {"id", s.id}, {"events", std::move(events)}};
  if (s.label >= 0) j["label"] = s.label;
  if (!s.statics.empty()) j["statics"] = s.statics;
  return j;
}

inline void write_dataset(std::ostream& out, const std::vector<TimeSeriesSet>& series) {
  for (const auto& s : series) out << record_to_json(s).dump() << '\n';
}

inline void write_dataset(const std::string& path, const std::vector<TimeSeriesSet>& series) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write dataset '" + path + "'");
  write_dataset(out, series);
  if (!out) throw IoError("write failed for '" + path + "'");
}

inline DatasetMeta read_meta(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open meta file '" + path + "'");
  try {
    return json::parse(in).get<DatasetMeta>();
  } catch (const json::exception& e) {
    throw ValidationError(path + ": malformed meta: " + e.what());
  }
}

inline void write_meta(const std::string& path, const DatasetMeta& meta) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write meta file '" + path + "'");
  out << json(meta).dump(2) << '\n';
}

}  // namespace seft
