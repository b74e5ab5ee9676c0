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

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "json.hpp"
#include "qfl/model.hpp"

/// QR pattern catalogue: parameterized requirement templates bound to
/// quality metrics and classified by quality factor.
namespace qfl::catalogue {

using ParamValue = std::variant<double, std::string>;
using ParamMap = std::map<std::string, ParamValue>;

struct Interval {
  double min = 0.0;
  double max = 0.0;
  bool min_inclusive = true;
  bool max_inclusive = true;
  friend bool operator==(const Interval&, const Interval&) = default;
};

struct Enumeration {
  std::vector<std::string> values;
  friend bool operator==(const Enumeration&, const Enumeration&) = default;
};

struct ParamSpec {
  std::string name;
  std::variant<Interval, Enumeration> correctness;
  std::string description;

  bool accepts(const ParamValue& value) const;
  /// Human-readable constraint, e.g. "0 <= value <= 100".
  std::string constraint_text() const;
  friend bool operator==(const ParamSpec&, const ParamSpec&) = default;
};

struct QRPattern {
  std::string name;
  std::string description;
  std::string goal;
  /// Placeholders are written %name%; a literal percent sign is %%.
  std::string pattern_text;
  std::vector<ParamSpec> parameters;
  std::vector<std::string> linked_metric_ids;
  std::vector<std::string> categories;

  const ParamSpec* find_param(std::string_view name) const;
  friend bool operator==(const QRPattern&, const QRPattern&) = default;
};

class Catalogue {
 public:
  Catalogue() = default;
  explicit Catalogue(std::vector<QRPattern> patterns);

  const std::vector<QRPattern>& patterns() const noexcept { return patterns_; }
  const QRPattern* find(std::string_view name) const;
  /// Distinct categories, sorted.
  std::vector<std::string> categories() const;
  std::size_t size() const noexcept { return patterns_.size(); }

 private:
  std::vector<QRPattern> patterns_;
};

/// Placeholder names in order of appearance (duplicates kept).
/// Throws Error{SchemaError} on an unterminated placeholder.
std::vector<std::string> extract_placeholders(std::string_view pattern_text);

/// Parses and validates a catalogue document. When `model` is given, every
/// linked metric must be a metric of that model (Error{DanglingMetricLink}).
Catalogue load_catalogue(std::string_view document, const model::QualityModel* model = nullptr);
Catalogue catalogue_from_json(const nlohmann::json& doc,
                              const model::QualityModel* model = nullptr);
nlohmann::json pattern_to_json(const QRPattern& pattern);
nlohmann::json catalogue_to_json(const Catalogue& catalogue);

/// Patterns linked to the alerted element or, for a factor or indicator, to
/// any metric below it. Ordered by the number of matching linked metrics
/// (descending), then by name.
std::vector<QRPattern> candidates_for_alert(std::string_view element_id,
                                            const Catalogue& catalogue,
                                            const model::QualityModel& model);

/// Integers render without a decimal point; other reals with at most two
/// decimals, trailing zeros trimmed.
std::string render_value(const ParamValue& value);

/// Substitutes every placeholder. Throws Error{MissingParam} or
/// Error{ParamOutOfRange} (message cites the constraint).
std::string instantiate(const QRPattern& pattern, const ParamMap& params);

ParamMap params_from_json(const nlohmann::json& doc);
nlohmann::json params_to_json(const ParamMap& params);

}  // namespace qfl::catalogue
