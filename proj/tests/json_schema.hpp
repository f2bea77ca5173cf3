#pragma once

// Enough JSON Schema for the checked-in output schemas: type, enum,
// required, properties, additionalProperties, items, minimum, maximum and
// local "#/definitions/..." references.

#include <algorithm>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace schema {

using nlohmann::json;

class Validator {
 public:
  explicit Validator(json root) : root_(std::move(root)) {}

  std::vector<std::string> errors(const json& doc) const {
    std::vector<std::string> out;
    check(root_, doc, "$", out);
    return out;
  }

 private:
  static bool has_type(const json& v, const std::string& t) {
    if (t == "object") return v.is_object();
    if (t == "array") return v.is_array();
    if (t == "string") return v.is_string();
    if (t == "integer") return v.is_number_integer();
    if (t == "number") return v.is_number();
    if (t == "boolean") return v.is_boolean();
    if (t == "null") return v.is_null();
    return false;
  }

  const json& resolve(const json& s) const {
    if (!s.is_object() || !s.contains("$ref")) return s;
    const auto ref = s["$ref"].get<std::string>();
    const std::string prefix = "#/definitions/";
    if (ref.rfind(prefix, 0) != 0) throw std::runtime_error("unsupported $ref " + ref);
    return resolve(root_.at("definitions").at(ref.substr(prefix.size())));
  }

  void check(const json& raw, const json& v, const std::string& path, std::vector<std::string>& out) const {
    const json& s = resolve(raw);
    if (s.is_boolean()) {
      if (!s.get<bool>()) out.push_back(path + ": not allowed");
      return;
    }
    if (s.contains("type")) {
      bool ok = false;
      if (s["type"].is_array()) {
        for (const auto& t : s["type"]) ok = ok || has_type(v, t.get<std::string>());
      } else {
        ok = has_type(v, s["type"].get<std::string>());
      }
      if (!ok) {
        out.push_back(path + ": expected " + s["type"].dump() + ", got " + v.type_name());
        return;
      }
    }
    if (s.contains("enum") && std::find(s["enum"].begin(), s["enum"].end(), v) == s["enum"].end()) {
      out.push_back(path + ": " + v.dump() + " not in enum");
    }
    if (v.is_number()) {
      if (s.contains("minimum") && v.get<double>() < s["minimum"].get<double>()) out.push_back(path + ": below minimum");
      if (s.contains("maximum") && v.get<double>() > s["maximum"].get<double>()) out.push_back(path + ": above maximum");
    }
    if (v.is_object()) {
      if (s.contains("required")) {
        for (const auto& k : s["required"]) {
          if (!v.contains(k.get<std::string>())) out.push_back(path + ": missing " + k.get<std::string>());
        }
      }
      for (const auto& [k, child] : v.items()) {
        const auto p = path + "." + k;
        if (s.contains("properties") && s["properties"].contains(k)) check(s["properties"][k], child, p, out);
        else if (s.contains("additionalProperties")) check(s["additionalProperties"], child, p, out);
      }
    }
    if (v.is_array() && s.contains("items")) {
      for (std::size_t i = 0; i < v.size(); ++i) check(s["items"], v[i], path + "[" + std::to_string(i) + "]", out);
    }
  }

  json root_;
};

inline Validator load(const std::string& name) {
  std::ifstream in(std::string(SCHEMA_DIR) + "/" + name);
  return Validator(json::parse(in));
}

}  // namespace schema
