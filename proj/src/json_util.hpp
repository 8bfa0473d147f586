#pragma once

#include <initializer_list>
#include <string>
#include <string_view>

#include <json.hpp>

#include "arcstab/errors.hpp"

namespace arcstab::detail {

inline void require_object(const nlohmann::json& j, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
}

inline void check_keys(const nlohmann::json& j, std::initializer_list<std::string_view> allowed,
                       const std::string& where) {
  require_object(j, where);
  for (const auto& [key, value] : j.items()) {
    bool known = false;
    for (auto a : allowed) known = known || key == a;
    if (!known) throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

// Reads j[key] into out when present; type mismatches become ConfigError.
template <typename T>
void read_opt(const nlohmann::json& j, const char* key, T& out, const std::string& where) {
  auto it = j.find(key);
  if (it == j.end()) return;
  try {
    out = it->template get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(where + ": bad value for '" + key + "'");
  }
}

template <typename T>
T read_req(const nlohmann::json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) {
    throw FormatError(where + ": missing '" + key + "'");
  }
  try {
    return j.at(key).template get<T>();
  } catch (const nlohmann::json::exception&) {
    throw FormatError(where + ": bad value for '" + key + "'");
  }
}

}  // namespace arcstab::detail
