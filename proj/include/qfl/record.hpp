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

#include <optional>
#include <string>
#include <string_view>

#include "json.hpp"

namespace qfl {

enum class SourceKind { static_analysis, issue_tracker, ci_builds, vcs_log, backlog };

std::string_view to_string(SourceKind kind) noexcept;
/// Throws Error{SchemaError} for unknown names.
SourceKind parse_source_kind(std::string_view name);

/// One row exported by a development tool. Fields are kept verbatim
/// (including ones no evaluator reads) so documents round-trip.
class Record {
 public:
  Record() : fields_(nlohmann::json::object()) {}
  explicit Record(nlohmann::json fields);

  bool has(std::string_view field) const;
  /// Numeric field value; throws Error{FieldMissing} when absent or not a number.
  double number(std::string_view field) const;
  /// String form of a field: strings verbatim, integers in decimal.
  /// Throws Error{FieldMissing} when absent or null.
  std::string text(std::string_view field) const;
  std::optional<std::string> optional_text(std::string_view field) const;

  const nlohmann::json& fields() const noexcept { return fields_; }
  nlohmann::json& fields() noexcept { return fields_; }

  friend bool operator==(const Record&, const Record&) = default;

 private:
  nlohmann::json fields_;
};

}  // namespace qfl
