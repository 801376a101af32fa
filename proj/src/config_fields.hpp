#pragma once

#include <initializer_list>
#include <string>
#include <string_view>

#include <json.hpp>

#include "rapc/errors.hpp"

namespace rapc::detail {

inline nlohmann::json parse_object(std::string_view text, const std::string& what) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text.begin(), text.end());
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(what + ": parse error: " + e.what());
  }
  if (!doc.is_object()) throw ConfigError(what + ": expected a JSON object");
  return doc;
}

inline void reject_unknown(const nlohmann::json& doc, std::initializer_list<std::string_view> keys,
                           const std::string& what) {
  for (const auto& item : doc.items()) {
    bool known = false;
    for (std::string_view k : keys) known = known || item.key() == k;
    if (!known) throw ConfigError(what + ": unknown field \"" + item.key() + "\"");
  }
}

template <class T>
T read_field(const nlohmann::json& doc, const char* key, T fallback) {
  if (!doc.contains(key)) return fallback;
  try {
    return doc.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(std::string("field \"") + key + "\" has the wrong type");
  }
}

}  // namespace rapc::detail
