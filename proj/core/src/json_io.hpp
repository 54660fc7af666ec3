#pragma once

// JSON conversions shared by checkpoint and config files (not installed).

#include "dcfair/data.hpp"
#include "dcfair/errors.hpp"
#include "dcfair/model.hpp"

#include "json.hpp"

#include <string>

namespace dcfair::detail {

using Json = nlohmann::json;

template <typename T>
T get_or(const Json& j, const char* key, T fallback) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("field '") + key + "': " + e.what());
  }
}

template <typename T>
T get_required(const Json& j, const char* key) {
  if (!j.contains(key)) throw ConfigError(std::string("missing field '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("field '") + key + "': " + e.what());
  }
}

inline Json to_json(const model::MlpConfig& c) {
  return Json{{"hidden_layers", c.hidden_layers}, {"hidden_size", c.hidden_size},
              {"dropout_prob", c.dropout_prob},   {"l2_weight", c.l2_weight},
              {"learning_rate", c.learning_rate}, {"init_seed", c.init_seed}};
}

inline model::MlpConfig mlp_from(const Json& j, model::MlpConfig base = {}) {
  if (!j.is_object()) throw ConfigError("mlp config must be an object");
  base.hidden_layers = get_or(j, "hidden_layers", base.hidden_layers);
  base.hidden_size = get_or(j, "hidden_size", base.hidden_size);
  base.dropout_prob = get_or(j, "dropout_prob", base.dropout_prob);
  base.l2_weight = get_or(j, "l2_weight", base.l2_weight);
  base.learning_rate = get_or(j, "learning_rate", base.learning_rate);
  base.init_seed = get_or(j, "init_seed", base.init_seed);
  return base;
}

inline std::string to_string(data::FeatureKind kind) {
  return kind == data::FeatureKind::Numeric ? "numeric" : "categorical";
}

inline data::FeatureKind kind_from(const std::string& text) {
  if (text == "numeric") return data::FeatureKind::Numeric;
  if (text == "categorical") return data::FeatureKind::Categorical;
  throw ConfigError("feature kind must be 'numeric' or 'categorical', got '" + text + "'");
}

inline Json to_json(const data::DataSchema& s) {
  Json features = Json::array();
  for (const auto& f : s.feature_columns) features.push_back({{"name", f.name}, {"kind", to_string(f.kind)}});
  Json j{{"target_column", s.target_column},
         {"positive_label", s.positive_label},
         {"protected_column", s.protected_column},
         {"protected_one_value", s.protected_one_value},
         {"feature_columns", features},
         {"protected_as_input", s.protected_as_input}};
  if (s.negative_label) j["negative_label"] = *s.negative_label;
  if (s.protected_zero_value) j["protected_zero_value"] = *s.protected_zero_value;
  return j;
}

inline data::DataSchema schema_from(const Json& j) {
  if (!j.is_object()) throw ConfigError("schema must be an object");
  data::DataSchema s;
  s.target_column = get_required<std::string>(j, "target_column");
  s.positive_label = get_required<std::string>(j, "positive_label");
  if (j.contains("negative_label")) s.negative_label = get_required<std::string>(j, "negative_label");
  s.protected_column = get_required<std::string>(j, "protected_column");
  s.protected_one_value = get_required<std::string>(j, "protected_one_value");
  if (j.contains("protected_zero_value")) s.protected_zero_value = get_required<std::string>(j, "protected_zero_value");
  s.protected_as_input = get_or(j, "protected_as_input", false);
  if (!j.contains("feature_columns") || !j.at("feature_columns").is_array()) {
    throw ConfigError("schema.feature_columns must be an array");
  }
  for (const auto& f : j.at("feature_columns")) {
    s.feature_columns.push_back({get_required<std::string>(f, "name"), kind_from(get_or<std::string>(f, "kind", "numeric"))});
  }
  return s;
}

inline Json to_json(const data::FeatureEncoder& e) {
  Json cols = Json::array();
  for (const auto& c : e.columns) {
    cols.push_back({{"name", c.name}, {"kind", to_string(c.kind)}, {"mean", c.mean}, {"scale", c.scale}, {"levels", c.levels}});
  }
  return Json{{"schema", to_json(e.schema)}, {"columns", cols}};
}

inline data::FeatureEncoder encoder_from(const Json& j) {
  data::FeatureEncoder e;
  e.schema = schema_from(j.at("schema"));
  for (const auto& c : j.at("columns")) {
    data::EncodedColumn col;
    col.name = c.at("name").get<std::string>();
    col.kind = kind_from(c.at("kind").get<std::string>());
    col.mean = c.at("mean").get<double>();
    col.scale = c.at("scale").get<double>();
    col.levels = c.at("levels").get<std::vector<std::string>>();
    e.columns.push_back(std::move(col));
  }
  return e;
}

}  // namespace dcfair::detail
