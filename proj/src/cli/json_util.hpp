#pragma once

// Typed accessors over config JSON that raise ConfigError with the key path.

#include <cmath>
#include <string>

#include <json.hpp>

#include "kbrw/cli.hpp"
#include "kbrw/stationary.hpp"

namespace kbrw::cli {

inline const nlohmann::json* find(const nlohmann::json& obj, const std::string& key) {
  if (!obj.is_object()) return nullptr;
  auto it = obj.find(key);
  return it == obj.end() ? nullptr : &*it;
}

inline void expect_object(const nlohmann::json& v, const std::string& where) {
  if (!v.is_object()) throw ConfigError(where + " must be a JSON object");
}

inline double get_number(const nlohmann::json& obj, const std::string& key, double fallback,
                         const std::string& where) {
  const auto* v = find(obj, key);
  if (!v) return fallback;
  if (!v->is_number()) throw ConfigError(where + "." + key + " must be a number");
  const double x = v->get<double>();
  if (!std::isfinite(x)) throw ConfigError(where + "." + key + " must be finite");
  return x;
}

inline std::size_t get_count(const nlohmann::json& obj, const std::string& key, std::size_t fallback,
                             const std::string& where) {
  const auto* v = find(obj, key);
  if (!v) return fallback;
  if (!v->is_number_integer() || v->get<std::int64_t>() < 1) {
    throw ConfigError(where + "." + key + " must be an integer >= 1");
  }
  return v->get<std::size_t>();
}

inline bool get_bool(const nlohmann::json& obj, const std::string& key, bool fallback, const std::string& where) {
  const auto* v = find(obj, key);
  if (!v) return fallback;
  if (!v->is_boolean()) throw ConfigError(where + "." + key + " must be true or false");
  return v->get<bool>();
}

inline std::string get_string(const nlohmann::json& obj, const std::string& key, const std::string& fallback,
                              const std::string& where) {
  const auto* v = find(obj, key);
  if (!v) {
    if (fallback.empty()) throw ConfigError(where + "." + key + " is required");
    return fallback;
  }
  if (!v->is_string()) throw ConfigError(where + "." + key + " must be a string");
  return v->get<std::string>();
}

inline Vector3 get_vector3(const nlohmann::json& v, const std::string& where) {
  if (!v.is_array() || v.size() != 3) throw ConfigError(where + " must be an array of 3 numbers");
  Vector3 out{};
  for (std::size_t i = 0; i < 3; ++i) {
    if (!v[i].is_number()) throw ConfigError(where + " must be an array of 3 numbers");
    out[i] = v[i].get<double>();
    if (!std::isfinite(out[i])) throw ConfigError(where + " must be finite");
  }
  return out;
}

nlohmann::json solution_to_json(const StationarySolution& sol);
StationarySolution solution_from_json(const nlohmann::json& doc);

}  // namespace kbrw::cli
