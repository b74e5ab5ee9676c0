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
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>
#include <vector>

#include "json.hpp"
#include "qfl/record.hpp"
#include "qfl/time.hpp"

/// Three-layer quality model: metrics are computed from tool data, factors
/// aggregate metrics, strategic indicators aggregate factors. Every value is
/// a fraction in [0,1].
namespace qfl::model {

enum class Layer { metric, factor, indicator };
enum class Provenance { observed, whatif, forecast };

std::string_view to_string(Layer layer) noexcept;
std::string_view to_string(Provenance provenance) noexcept;
Layer parse_layer(std::string_view name);
Provenance parse_provenance(std::string_view name);

/// Restricts an evaluator to records whose `field` is one of `values`.
struct RecordFilter {
  std::string field;
  std::vector<std::string> values;
  friend bool operator==(const RecordFilter&, const RecordFilter&) = default;
};

/// Share of records with low <= field <= high.
struct RatioWithinRange {
  std::string field;
  double low = 0.0;
  double high = 1.0;
  friend bool operator==(const RatioWithinRange&, const RatioWithinRange&) = default;
};

/// Share of records with field <= max.
struct RatioAtMost {
  std::string field;
  double max = 0.0;
  friend bool operator==(const RatioAtMost&, const RatioAtMost&) = default;
};

/// Share of records with field >= min.
struct RatioAtLeast {
  std::string field;
  double min = 0.0;
  friend bool operator==(const RatioAtLeast&, const RatioAtLeast&) = default;
};

/// Share of records whose status is one of done_values.
struct CompletionRatio {
  std::string status_field;
  std::vector<std::string> done_values;
  friend bool operator==(const CompletionRatio&, const CompletionRatio&) = default;
};

/// Mean over records of clamp(scale * x + offset) where x is `field`, or
/// field / denominator_field when a denominator is named.
struct Direct {
  std::string field;
  std::optional<std::string> denominator_field;
  double scale = 1.0;
  double offset = 0.0;
  friend bool operator==(const Direct&, const Direct&) = default;
};

using EvaluatorKind =
    std::variant<RatioWithinRange, RatioAtMost, RatioAtLeast, CompletionRatio, Direct>;

struct EvaluatorSpec {
  EvaluatorKind kind;
  std::vector<RecordFilter> where;
  /// Value reported when no record survives the filters.
  double empty_value = 1.0;
  friend bool operator==(const EvaluatorSpec&, const EvaluatorSpec&) = default;
};

struct SourceDef {
  std::string id;
  SourceKind kind = SourceKind::static_analysis;
  std::string name;
  friend bool operator==(const SourceDef&, const SourceDef&) = default;
};

struct MetricDef {
  std::string id;
  std::string name;
  std::string description;
  std::string data_source_id;
  EvaluatorSpec evaluator;
  friend bool operator==(const MetricDef&, const MetricDef&) = default;
};

struct WeightedChild {
  std::string id;
  double weight = 1.0;
  friend bool operator==(const WeightedChild&, const WeightedChild&) = default;
};

/// Shared shape of factors and strategic indicators.
struct CompositeDef {
  std::string id;
  std::string name;
  std::string description;
  std::vector<WeightedChild> children;
  friend bool operator==(const CompositeDef&, const CompositeDef&) = default;
};
using FactorDef = CompositeDef;
using IndicatorDef = CompositeDef;

class QualityModel {
 public:
  /// Validates and indexes the parts. Throws Error{ValidationError} naming
  /// the offending element.
  static QualityModel build(std::string model_id, std::string version,
                            std::vector<SourceDef> sources, std::vector<MetricDef> metrics,
                            std::vector<FactorDef> factors,
                            std::vector<IndicatorDef> indicators);

  const std::string& model_id() const noexcept { return model_id_; }
  const std::string& version() const noexcept { return version_; }
  const std::vector<SourceDef>& sources() const noexcept { return sources_; }
  const std::vector<MetricDef>& metrics() const noexcept { return metrics_; }
  const std::vector<FactorDef>& factors() const noexcept { return factors_; }
  const std::vector<IndicatorDef>& indicators() const noexcept { return indicators_; }

  bool contains(std::string_view id) const;
  std::optional<Layer> layer_of(std::string_view id) const;
  const MetricDef* find_metric(std::string_view id) const;
  const CompositeDef* find_composite(std::string_view id) const;
  std::string_view name_of(std::string_view id) const;

  /// Sorted ids of all metrics at or below `id`.
  std::vector<std::string> descendant_metrics(std::string_view id) const;
  /// Every element id, metrics first, then factors, then indicators.
  std::vector<std::string> element_ids() const;

  friend bool operator==(const QualityModel& a, const QualityModel& b) {
    return a.model_id_ == b.model_id_ && a.version_ == b.version_ &&
           a.sources_ == b.sources_ && a.metrics_ == b.metrics_ &&
           a.factors_ == b.factors_ && a.indicators_ == b.indicators_;
  }

 private:
  struct Slot {
    Layer layer;
    std::size_t index;
  };

  std::string model_id_;
  std::string version_;
  std::vector<SourceDef> sources_;
  std::vector<MetricDef> metrics_;
  std::vector<FactorDef> factors_;
  std::vector<IndicatorDef> indicators_;
  std::unordered_map<std::string, Slot> index_;
};

/// Combines two disjoint models (e.g. a product model and the built-in
/// feedback-loop model). Sources with equal ids must agree.
QualityModel merge_models(const QualityModel& primary, const QualityModel& extra);

struct AssessmentPoint {
  std::string element_id;
  Layer layer = Layer::metric;
  Timestamp timestamp{};
  double value = 0.0;
  Provenance provenance = Provenance::observed;
  friend bool operator==(const AssessmentPoint&, const AssessmentPoint&) = default;
};

using Assessment = std::map<std::string, AssessmentPoint>;
using ValueMap = std::map<std::string, double>;

struct WeightedValue {
  double value;
  double weight;
};

/// Parses and validates a quality-model document. Throws Error{SchemaError}
/// for malformed documents and Error{ValidationError} for broken references.
QualityModel load_model(std::string_view document);
QualityModel model_from_json(const nlohmann::json& doc);
nlohmann::json model_to_json(const QualityModel& model);

EvaluatorSpec evaluator_from_json(const nlohmann::json& doc);
nlohmann::json evaluator_to_json(const EvaluatorSpec& spec);

/// Applies an evaluator to a record set. Result is in [0,1] and does not
/// depend on record order.
double evaluate_metric(const EvaluatorSpec& spec, std::span<const Record> items);

/// Weighted arithmetic mean, sum(w*v)/sum(w). Throws Error{EmptyChildren}.
double aggregate(std::span<const WeightedValue> children);

/// Bottom-up evaluation of the whole model from metric values.
Assessment evaluate_snapshot(const QualityModel& model, const ValueMap& metric_values,
                             Timestamp at);

/// Like evaluate_snapshot, with metric or factor values pinned by
/// `overrides`. A pinned factor ignores its children.
Assessment what_if(const QualityModel& model, const ValueMap& baseline,
                   const ValueMap& overrides, Timestamp at);

void to_json(nlohmann::json& j, const AssessmentPoint& point);
void from_json(const nlohmann::json& j, AssessmentPoint& point);
nlohmann::json assessment_to_json(const Assessment& assessment);

}  // namespace qfl::model
