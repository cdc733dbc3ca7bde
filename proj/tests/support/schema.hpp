#pragma once

// Checks a document against the JSON Schema keywords used by the files in
// schemas/: type, enum, required, properties, additionalProperties (false)
// and items. Returns the first violation as a JSON-pointer-ish message.

#include <optional>
#include <string>

#include <json.hpp>

namespace schema {

inline bool has_type(const nlohmann::json& v, const std::string& type) {
  if (type == "object") return v.is_object();
  if (type == "array") return v.is_array();
  if (type == "string") return v.is_string();
  if (type == "boolean") return v.is_boolean();
  if (type == "integer") return v.is_number_integer();
  if (type == "number") return v.is_number();
  if (type == "null") return v.is_null();
  return false;
}

inline std::optional<std::string> validate(const nlohmann::json& doc, const nlohmann::json& s,
                                           const std::string& at = "") {
  if (s.contains("type") && !has_type(doc, s["type"].get<std::string>())) {
    return at + ": expected " + s["type"].get<std::string>();
  }
  if (s.contains("enum")) {
    bool found = false;
    for (const auto& e : s["enum"]) found = found || e == doc;
    if (!found) return at + ": value not in enum";
  }
  if (doc.is_object()) {
    for (const auto& key : s.value("required", nlohmann::json::array())) {
      if (!doc.contains(key.get<std::string>())) return at + ": missing " + key.get<std::string>();
    }
    const auto props = s.value("properties", nlohmann::json::object());
    for (const auto& [key, value] : doc.items()) {
      if (props.contains(key)) {
        if (auto e = validate(value, props[key], at + "/" + key)) return e;
      } else if (s.contains("additionalProperties") && s["additionalProperties"] == false) {
        return at + ": unexpected property " + key;
      }
    }
  }
  if (doc.is_array() && s.contains("items")) {
    for (std::size_t i = 0; i < doc.size(); ++i) {
      if (auto e = validate(doc[i], s["items"], at + "/" + std::to_string(i))) return e;
    }
  }
  return std::nullopt;
}

}  // namespace schema
