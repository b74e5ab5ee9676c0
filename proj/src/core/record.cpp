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

#include "qfl/record.hpp"

#include <array>

#include "qfl/error.hpp"

namespace qfl {
namespace {

constexpr std::array<std::string_view, 5> kKindNames{
    "static_analysis", "issue_tracker", "ci_builds", "vcs_log", "backlog"};

[[noreturn]] void field_missing(std::string_view field) {
  throw Error(Errc::FieldMissing, "record lacks field '" + std::string(field) + "'",
              {{"field", std::string(field)}});
}

}  // namespace

std::string_view to_string(SourceKind kind) noexcept {
  return kKindNames[static_cast<std::size_t>(kind)];
}

SourceKind parse_source_kind(std::string_view name) {
  for (std::size_t i = 0; i < kKindNames.size(); ++i) {
    if (kKindNames[i] == name) return static_cast<SourceKind>(i);
  }
  throw Error(Errc::SchemaError, "unknown source_kind '" + std::string(name) + "'",
              {{"field", "source_kind"}, {"value", std::string(name)}});
}

Record::Record(nlohmann::json fields) : fields_(std::move(fields)) {
  if (!fields_.is_object()) {
    throw Error(Errc::SchemaError, "record must be an object");
  }
}

bool Record::has(std::string_view field) const {
  auto it = fields_.find(field);
  return it != fields_.end() && !it->is_null();
}

double Record::number(std::string_view field) const {
  auto it = fields_.find(field);
  if (it == fields_.end() || !it->is_number()) field_missing(field);
  return it->get<double>();
}

std::string Record::text(std::string_view field) const {
  auto value = optional_text(field);
  if (!value) field_missing(field);
  return *value;
}

std::optional<std::string> Record::optional_text(std::string_view field) const {
  auto it = fields_.find(field);
  if (it == fields_.end() || it->is_null()) return std::nullopt;
  if (it->is_string()) return it->get<std::string>();
  if (it->is_number_integer()) return std::to_string(it->get<long long>());
  return it->dump();
}

}  // namespace qfl
