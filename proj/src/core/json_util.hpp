// Copyright 2026 The QFL Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Field accessors for reading interchange documents. Every failure is an
// Error{SchemaError} carrying the context path and the field name.

#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "qfl/error.hpp"

namespace qfl::detail {

using nlohmann::json;

[[noreturn]] inline void schema_error(const std::string& where, std::string_view field,
                                      const std::string& problem) {
  throw Error(Errc::SchemaError, where + ": field '" + std::string(field) + "' " + problem,
              {{"where", where}, {"field", std::string(field)}});
}

inline json parse_document(std::string_view text, const std::string& what) {
  try {
    return json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw Error(Errc::SchemaError, what + " is not valid JSON: " + e.what(),
                {{"where", what}, {"byte", e.byte}});
  }
}

inline const json& require(const json& obj, std::string_view field, const std::string& where) {
  if (!obj.is_object()) schema_error(where, field, "cannot be read from a non-object");
  auto it = obj.find(field);
  if (it == obj.end() || it->is_null()) schema_error(where, field, "is missing");
  return *it;
}

inline std::string require_string(const json& obj, std::string_view field,
                                  const std::string& where) {
  const json& v = require(obj, field, where);
  if (!v.is_string()) schema_error(where, field, "must be a string");
  return v.get<std::string>();
}

inline std::string optional_string(const json& obj, std::string_view field,
                                   const std::string& where, std::string fallback = {}) {
  auto it = obj.find(field);
  if (it == obj.end() || it->is_null()) return fallback;
  if (!it->is_string()) schema_error(where, field, "must be a string");
  return it->get<std::string>();
}

inline double require_number(const json& obj, std::string_view field, const std::string& where) {
  const json& v = require(obj, field, where);
  if (!v.is_number()) schema_error(where, field, "must be a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) schema_error(where, field, "must be finite");
  return d;
}

inline std::optional<double> optional_number(const json& obj, std::string_view field,
                                              const std::string& where) {
  auto it = obj.find(field);
  if (it == obj.end() || it->is_null()) return std::nullopt;
  if (!it->is_number()) schema_error(where, field, "must be a number");
  return it->get<double>();
}

inline bool optional_bool(const json& obj, std::string_view field, const std::string& where,
                          bool fallback) {
  auto it = obj.find(field);
  if (it == obj.end() || it->is_null()) return fallback;
  if (!it->is_boolean()) schema_error(where, field, "must be a boolean");
  return it->get<bool>();
}

inline const json& require_array(const json& obj, std::string_view field,
                                 const std::string& where) {
  const json& v = require(obj, field, where);
  if (!v.is_array()) schema_error(where, field, "must be an array");
  return v;
}

inline std::vector<std::string> string_list(const json& obj, std::string_view field,
                                            const std::string& where, bool required = true) {
  std::vector<std::string> out;
  auto it = obj.find(field);
  if (it == obj.end() || it->is_null()) {
    if (required) schema_error(where, field, "is missing");
    return out;
  }
  if (!it->is_array()) schema_error(where, field, "must be an array of strings");
  for (const auto& v : *it) {
    if (!v.is_string()) schema_error(where, field, "must be an array of strings");
    out.push_back(v.get<std::string>());
  }
  return out;
}

}  // namespace qfl::detail
