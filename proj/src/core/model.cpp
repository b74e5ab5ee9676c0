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

#include "qfl/model.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <set>

#include "json_util.hpp"
#include "qfl/error.hpp"

namespace qfl::model {

using nlohmann::json;

namespace {

constexpr std::array<std::string_view, 3> kLayerNames{"metric", "factor", "indicator"};
constexpr std::array<std::string_view, 3> kProvenanceNames{"observed", "whatif", "forecast"};

[[noreturn]] void invalid(const std::string& element, const std::string& message) {
  throw Error(Errc::ValidationError, element + ": " + message, {{"element", element}});
}

void check_fraction(double value, const std::string& element) {
  if (!(value >= 0.0 && value <= 1.0)) {
    throw Error(Errc::ValueOutOfRange,
                element + ": value " + std::to_string(value) + " is outside [0,1]",
                {{"element", element}, {"value", std::isfinite(value) ? json(value) : json()}});
  }
}

void validate_evaluator(const EvaluatorSpec& spec, const std::string& metric) {
  if (!(spec.empty_value >= 0.0 && spec.empty_value <= 1.0)) {
    invalid(metric, "empty_value must lie in [0,1]");
  }
  for (const auto& filter : spec.where) {
    if (filter.field.empty()) invalid(metric, "filter field is empty");
  }
  std::visit(
      [&](const auto& kind) {
        using T = std::decay_t<decltype(kind)>;
        if constexpr (std::is_same_v<T, CompletionRatio>) {
          if (kind.status_field.empty()) invalid(metric, "status_field is empty");
          if (kind.done_values.empty()) invalid(metric, "done_values is empty");
        } else {
          if (kind.field.empty()) invalid(metric, "evaluator field is empty");
        }
        if constexpr (std::is_same_v<T, RatioWithinRange>) {
          if (!(kind.low <= kind.high)) invalid(metric, "range bounds must satisfy low <= high");
        }
        if constexpr (std::is_same_v<T, Direct>) {
          if (!std::isfinite(kind.scale) || !std::isfinite(kind.offset)) {
            invalid(metric, "direct map coefficients must be finite");
          }
        }
      },
      spec.kind);
}

bool passes_filters(const EvaluatorSpec& spec, const Record& record) {
  for (const auto& filter : spec.where) {
    const std::string value = record.text(filter.field);
    if (std::find(filter.values.begin(), filter.values.end(), value) == filter.values.end()) {
      return false;
    }
  }
  return true;
}

/// Shared bottom-up pass. `pins` replaces computed values for any element.
Assessment evaluate(const QualityModel& model, const ValueMap& metric_values,
                    const ValueMap& pins, Timestamp at, Provenance provenance) {
  Assessment out;
  std::vector<std::string> missing;
  for (const auto& metric : model.metrics()) {
    double value = 0.0;
    if (auto pin = pins.find(metric.id); pin != pins.end()) {
      value = pin->second;
    } else if (auto it = metric_values.find(metric.id); it != metric_values.end()) {
      value = it->second;
      check_fraction(value, metric.id);
    } else {
      missing.push_back(metric.id);
      continue;
    }
    out.emplace(metric.id, AssessmentPoint{metric.id, Layer::metric, at, value, provenance});
  }
  if (!missing.empty()) {
    std::string list;
    for (const auto& id : missing) list += (list.empty() ? "" : ", ") + id;
    throw Error(Errc::MissingMetricValue, "no value for metric(s): " + list,
                {{"missing", missing}});
  }

  auto fold = [&](const std::vector<CompositeDef>& layer, Layer kind) {
    for (const auto& composite : layer) {
      double value = 0.0;
      if (auto pin = pins.find(composite.id); pin != pins.end()) {
        value = pin->second;
      } else {
        std::vector<WeightedValue> children;
        children.reserve(composite.children.size());
        for (const auto& child : composite.children) {
          children.push_back({out.at(child.id).value, child.weight});
        }
        value = aggregate(children);
      }
      out.emplace(composite.id, AssessmentPoint{composite.id, kind, at, value, provenance});
    }
  };
  fold(model.factors(), Layer::factor);
  fold(model.indicators(), Layer::indicator);
  return out;
}

}  // namespace

std::string_view to_string(Layer layer) noexcept {
  return kLayerNames[static_cast<std::size_t>(layer)];
}

std::string_view to_string(Provenance provenance) noexcept {
  return kProvenanceNames[static_cast<std::size_t>(provenance)];
}

Layer parse_layer(std::string_view name) {
  for (std::size_t i = 0; i < kLayerNames.size(); ++i) {
    if (kLayerNames[i] == name) return static_cast<Layer>(i);
  }
  throw Error(Errc::SchemaError, "unknown layer '" + std::string(name) + "'");
}

Provenance parse_provenance(std::string_view name) {
  for (std::size_t i = 0; i < kProvenanceNames.size(); ++i) {
    if (kProvenanceNames[i] == name) return static_cast<Provenance>(i);
  }
  throw Error(Errc::SchemaError, "unknown provenance '" + std::string(name) + "'");
}

// ---------------------------------------------------------------------------
// QualityModel

QualityModel QualityModel::build(std::string model_id, std::string version,
                                 std::vector<SourceDef> sources,
                                 std::vector<MetricDef> metrics,
                                 std::vector<FactorDef> factors,
                                 std::vector<IndicatorDef> indicators) {
  QualityModel m;
  m.model_id_ = std::move(model_id);
  m.version_ = std::move(version);
  m.sources_ = std::move(sources);
  m.metrics_ = std::move(metrics);
  m.factors_ = std::move(factors);
  m.indicators_ = std::move(indicators);

  if (m.model_id_.empty()) invalid("model", "model_id is empty");

  std::set<std::string> source_ids;
  for (const auto& source : m.sources_) {
    if (source.id.empty()) invalid("sources", "source id is empty");
    if (!source_ids.insert(source.id).second) {
      invalid(source.id, "duplicate source id");
    }
  }

  auto add = [&](const std::string& id, Layer layer, std::size_t index) {
    if (id.empty()) invalid(std::string(to_string(layer)), "element id is empty");
    if (!m.index_.emplace(id, Slot{layer, index}).second) {
      invalid(id, "duplicate element id");
    }
  };
  for (std::size_t i = 0; i < m.metrics_.size(); ++i) add(m.metrics_[i].id, Layer::metric, i);
  for (std::size_t i = 0; i < m.factors_.size(); ++i) add(m.factors_[i].id, Layer::factor, i);
  for (std::size_t i = 0; i < m.indicators_.size(); ++i) {
    add(m.indicators_[i].id, Layer::indicator, i);
  }

  for (const auto& metric : m.metrics_) {
    if (!source_ids.contains(metric.data_source_id)) {
      invalid(metric.id, "data_source_id '" + metric.data_source_id +
                             "' is not a registered source");
    }
    validate_evaluator(metric.evaluator, metric.id);
  }

  auto check_children = [&](const CompositeDef& composite, Layer expected) {
    if (composite.children.empty()) invalid(composite.id, "has no children");
    std::set<std::string> seen;
    for (const auto& child : composite.children) {
      if (!seen.insert(child.id).second) {
        invalid(composite.id, "lists child '" + child.id + "' twice");
      }
      if (!(child.weight > 0.0) || !std::isfinite(child.weight)) {
        invalid(composite.id, "child '" + child.id + "' has nonpositive weight");
      }
      auto it = m.index_.find(child.id);
      if (it == m.index_.end()) {
        throw Error(Errc::ValidationError,
                    composite.id + ": references unknown child '" + child.id + "'",
                    {{"element", composite.id}, {"child", child.id}});
      }
      if (it->second.layer != expected) {
        throw Error(Errc::ValidationError,
                    composite.id + ": child '" + child.id + "' is a " +
                        std::string(to_string(it->second.layer)) + ", expected a " +
                        std::string(to_string(expected)),
                    {{"element", composite.id}, {"child", child.id}});
      }
    }
  };
  for (const auto& factor : m.factors_) check_children(factor, Layer::metric);
  for (const auto& indicator : m.indicators_) check_children(indicator, Layer::factor);
  return m;
}

bool QualityModel::contains(std::string_view id) const {
  return index_.contains(std::string(id));
}

std::optional<Layer> QualityModel::layer_of(std::string_view id) const {
  auto it = index_.find(std::string(id));
  if (it == index_.end()) return std::nullopt;
  return it->second.layer;
}

const MetricDef* QualityModel::find_metric(std::string_view id) const {
  auto it = index_.find(std::string(id));
  if (it == index_.end() || it->second.layer != Layer::metric) return nullptr;
  return &metrics_[it->second.index];
}

const CompositeDef* QualityModel::find_composite(std::string_view id) const {
  auto it = index_.find(std::string(id));
  if (it == index_.end()) return nullptr;
  switch (it->second.layer) {
    case Layer::factor:
      return &factors_[it->second.index];
    case Layer::indicator:
      return &indicators_[it->second.index];
    default:
      return nullptr;
  }
}

std::string_view QualityModel::name_of(std::string_view id) const {
  if (const auto* metric = find_metric(id)) return metric->name;
  if (const auto* composite = find_composite(id)) return composite->name;
  return {};
}

std::vector<std::string> QualityModel::descendant_metrics(std::string_view id) const {
  std::set<std::string> out;
  if (find_metric(id)) {
    out.emplace(id);
  } else if (const auto* composite = find_composite(id)) {
    for (const auto& child : composite->children) {
      auto below = descendant_metrics(child.id);
      out.insert(below.begin(), below.end());
    }
  }
  return {out.begin(), out.end()};
}

std::vector<std::string> QualityModel::element_ids() const {
  std::vector<std::string> ids;
  ids.reserve(index_.size());
  for (const auto& m : metrics_) ids.push_back(m.id);
  for (const auto& f : factors_) ids.push_back(f.id);
  for (const auto& i : indicators_) ids.push_back(i.id);
  return ids;
}

QualityModel merge_models(const QualityModel& primary, const QualityModel& extra) {
  auto sources = primary.sources();
  for (const auto& source : extra.sources()) {
    auto it = std::find_if(sources.begin(), sources.end(),
                           [&](const SourceDef& s) { return s.id == source.id; });
    if (it == sources.end()) {
      sources.push_back(source);
    } else if (it->kind != source.kind) {
      invalid(source.id, "source declared with conflicting kinds");
    }
  }
  auto cat = [](auto a, const auto& b) {
    a.insert(a.end(), b.begin(), b.end());
    return a;
  };
  return QualityModel::build(primary.model_id(), primary.version(), std::move(sources),
                             cat(primary.metrics(), extra.metrics()),
                             cat(primary.factors(), extra.factors()),
                             cat(primary.indicators(), extra.indicators()));
}

// ---------------------------------------------------------------------------
// Documents

EvaluatorSpec evaluator_from_json(const json& doc) {
  const std::string where = "evaluator";
  EvaluatorSpec spec;
  const std::string kind = detail::require_string(doc, "kind", where);
  if (kind == "ratio_within_range") {
    spec.kind = RatioWithinRange{detail::require_string(doc, "field", where),
                                 detail::require_number(doc, "low", where),
                                 detail::require_number(doc, "high", where)};
  } else if (kind == "ratio_at_most") {
    spec.kind = RatioAtMost{detail::require_string(doc, "field", where),
                            detail::require_number(doc, "max", where)};
  } else if (kind == "ratio_at_least") {
    spec.kind = RatioAtLeast{detail::require_string(doc, "field", where),
                             detail::require_number(doc, "min", where)};
  } else if (kind == "completion_ratio") {
    spec.kind = CompletionRatio{detail::require_string(doc, "status_field", where),
                                detail::string_list(doc, "done_values", where)};
  } else if (kind == "direct") {
    Direct direct;
    direct.field = detail::require_string(doc, "field", where);
    if (auto denom = detail::optional_string(doc, "denominator_field", where); !denom.empty()) {
      direct.denominator_field = denom;
    }
    direct.scale = detail::optional_number(doc, "scale", where).value_or(1.0);
    direct.offset = detail::optional_number(doc, "offset", where).value_or(0.0);
    spec.kind = direct;
  } else {
    detail::schema_error(where, "kind", "has unknown value '" + kind + "'");
  }
  if (auto it = doc.find("where"); it != doc.end() && !it->is_null()) {
    if (!it->is_array()) detail::schema_error(where, "where", "must be an array");
    for (const auto& f : *it) {
      spec.where.push_back({detail::require_string(f, "field", where + ".where"),
                            detail::string_list(f, "values", where + ".where")});
    }
  }
  spec.empty_value = detail::optional_number(doc, "empty_value", where).value_or(1.0);
  return spec;
}

json evaluator_to_json(const EvaluatorSpec& spec) {
  json out = std::visit(
      [](const auto& kind) -> json {
        using T = std::decay_t<decltype(kind)>;
        if constexpr (std::is_same_v<T, RatioWithinRange>) {
          return {{"kind", "ratio_within_range"}, {"field", kind.field},
                  {"low", kind.low}, {"high", kind.high}};
        } else if constexpr (std::is_same_v<T, RatioAtMost>) {
          return {{"kind", "ratio_at_most"}, {"field", kind.field}, {"max", kind.max}};
        } else if constexpr (std::is_same_v<T, RatioAtLeast>) {
          return {{"kind", "ratio_at_least"}, {"field", kind.field}, {"min", kind.min}};
        } else if constexpr (std::is_same_v<T, CompletionRatio>) {
          return {{"kind", "completion_ratio"}, {"status_field", kind.status_field},
                  {"done_values", kind.done_values}};
        } else {
          json d = {{"kind", "direct"}, {"field", kind.field},
                    {"scale", kind.scale}, {"offset", kind.offset}};
          if (kind.denominator_field) d["denominator_field"] = *kind.denominator_field;
          return d;
        }
      },
      spec.kind);
  if (!spec.where.empty()) {
    json filters = json::array();
    for (const auto& f : spec.where) filters.push_back({{"field", f.field}, {"values", f.values}});
    out["where"] = std::move(filters);
  }
  out["empty_value"] = spec.empty_value;
  return out;
}

QualityModel model_from_json(const json& doc) {
  if (!doc.is_object()) {
    throw Error(Errc::SchemaError, "quality model must be a JSON object");
  }
  const std::string where = "model";
  std::vector<SourceDef> sources;
  for (const auto& s : detail::require_array(doc, "sources", where)) {
    sources.push_back({detail::require_string(s, "id", "sources"),
                       parse_source_kind(detail::require_string(s, "kind", "sources")),
                       detail::optional_string(s, "name", "sources")});
  }
  std::vector<MetricDef> metrics;
  for (const auto& m : detail::require_array(doc, "metrics", where)) {
    const std::string id = detail::require_string(m, "id", "metrics");
    const std::string ctx = "metrics[" + id + "]";
    metrics.push_back({id, detail::optional_string(m, "name", ctx, id),
                       detail::optional_string(m, "description", ctx),
                       detail::require_string(m, "data_source_id", ctx),
                       evaluator_from_json(detail::require(m, "evaluator", ctx))});
  }
  auto composites = [&](std::string_view key) {
    std::vector<CompositeDef> out;
    for (const auto& c : detail::require_array(doc, key, where)) {
      const std::string id = detail::require_string(c, "id", std::string(key));
      const std::string ctx = std::string(key) + "[" + id + "]";
      CompositeDef def{id, detail::optional_string(c, "name", ctx, id),
                       detail::optional_string(c, "description", ctx),
                       {}};
      for (const auto& child : detail::require_array(c, "children", ctx)) {
        def.children.push_back({detail::require_string(child, "id", ctx + ".children"),
                                detail::optional_number(child, "weight", ctx + ".children")
                                    .value_or(1.0)});
      }
      out.push_back(std::move(def));
    }
    return out;
  };
  auto factors = composites("factors");
  auto indicators = composites("indicators");
  return QualityModel::build(detail::require_string(doc, "model_id", where),
                             detail::optional_string(doc, "version", where),
                             std::move(sources), std::move(metrics), std::move(factors),
                             std::move(indicators));
}

QualityModel load_model(std::string_view document) {
  return model_from_json(detail::parse_document(document, "quality model"));
}

json model_to_json(const QualityModel& model) {
  json sources = json::array();
  for (const auto& s : model.sources()) {
    sources.push_back({{"id", s.id}, {"kind", std::string(to_string(s.kind))}, {"name", s.name}});
  }
  json metrics = json::array();
  for (const auto& m : model.metrics()) {
    metrics.push_back({{"id", m.id},
                       {"name", m.name},
                       {"description", m.description},
                       {"data_source_id", m.data_source_id},
                       {"evaluator", evaluator_to_json(m.evaluator)}});
  }
  auto composites = [](const std::vector<CompositeDef>& layer) {
    json out = json::array();
    for (const auto& c : layer) {
      json children = json::array();
      for (const auto& child : c.children) {
        children.push_back({{"id", child.id}, {"weight", child.weight}});
      }
      out.push_back({{"id", c.id},
                     {"name", c.name},
                     {"description", c.description},
                     {"children", std::move(children)}});
    }
    return out;
  };
  return {{"model_id", model.model_id()},
          {"version", model.version()},
          {"sources", std::move(sources)},
          {"metrics", std::move(metrics)},
          {"factors", composites(model.factors())},
          {"indicators", composites(model.indicators())}};
}

// ---------------------------------------------------------------------------
// Evaluation

double evaluate_metric(const EvaluatorSpec& spec, std::span<const Record> items) {
  std::vector<const Record*> selected;
  selected.reserve(items.size());
  for (const auto& record : items) {
    if (passes_filters(spec, record)) selected.push_back(&record);
  }
  if (selected.empty()) return spec.empty_value;

  const double n = static_cast<double>(selected.size());
  auto share = [&](auto&& predicate) {
    std::size_t hits = 0;
    for (const Record* r : selected) hits += predicate(*r) ? 1 : 0;
    return static_cast<double>(hits) / n;
  };

  return std::visit(
      [&](const auto& kind) -> double {
        using T = std::decay_t<decltype(kind)>;
        if constexpr (std::is_same_v<T, RatioWithinRange>) {
          return share([&](const Record& r) {
            const double x = r.number(kind.field);
            return x >= kind.low && x <= kind.high;
          });
        } else if constexpr (std::is_same_v<T, RatioAtMost>) {
          return share([&](const Record& r) { return r.number(kind.field) <= kind.max; });
        } else if constexpr (std::is_same_v<T, RatioAtLeast>) {
          return share([&](const Record& r) { return r.number(kind.field) >= kind.min; });
        } else if constexpr (std::is_same_v<T, CompletionRatio>) {
          return share([&](const Record& r) {
            const std::string status = r.text(kind.status_field);
            return std::find(kind.done_values.begin(), kind.done_values.end(), status) !=
                   kind.done_values.end();
          });
        } else {
          std::vector<double> values;
          values.reserve(selected.size());
          for (const Record* r : selected) {
            double x = r->number(kind.field);
            if (kind.denominator_field) {
              const double denom = r->number(*kind.denominator_field);
              if (denom == 0.0) continue;
              x /= denom;
            }
            values.push_back(std::clamp(kind.scale * x + kind.offset, 0.0, 1.0));
          }
          if (values.empty()) return spec.empty_value;
          // Summing in sorted order keeps the mean independent of record order.
          std::sort(values.begin(), values.end());
          double sum = 0.0;
          for (double v : values) sum += v;
          return std::clamp(sum / static_cast<double>(values.size()), 0.0, 1.0);
        }
      },
      spec.kind);
}

double aggregate(std::span<const WeightedValue> children) {
  if (children.empty()) throw Error(Errc::EmptyChildren, "aggregate over no children");
  double weighted = 0.0;
  double total = 0.0;
  for (const auto& child : children) {
    if (!(child.weight > 0.0) || !std::isfinite(child.weight)) {
      throw Error(Errc::ValidationError, "aggregate weight must be positive");
    }
    check_fraction(child.value, "aggregate");
    weighted += child.weight * child.value;
    total += child.weight;
  }
  return std::clamp(weighted / total, 0.0, 1.0);
}

Assessment evaluate_snapshot(const QualityModel& model, const ValueMap& metric_values,
                             Timestamp at) {
  return evaluate(model, metric_values, {}, at, Provenance::observed);
}

Assessment what_if(const QualityModel& model, const ValueMap& baseline,
                   const ValueMap& overrides, Timestamp at) {
  for (const auto& [id, value] : overrides) {
    if (!model.contains(id)) {
      throw Error(Errc::UnknownElement, "what-if override targets unknown element '" + id + "'",
                  {{"element", id}});
    }
    check_fraction(value, id);
  }
  return evaluate(model, baseline, overrides, at, Provenance::whatif);
}

void to_json(json& j, const AssessmentPoint& point) {
  j = {{"element_id", point.element_id},
       {"layer", std::string(to_string(point.layer))},
       {"timestamp", format_rfc3339(point.timestamp)},
       {"value", point.value},
       {"provenance", std::string(to_string(point.provenance))}};
}

void from_json(const json& j, AssessmentPoint& point) {
  const std::string where = "assessment point";
  point.element_id = detail::require_string(j, "element_id", where);
  point.layer = parse_layer(detail::require_string(j, "layer", where));
  point.timestamp = parse_rfc3339(detail::require_string(j, "timestamp", where));
  point.value = detail::require_number(j, "value", where);
  point.provenance = parse_provenance(detail::optional_string(j, "provenance", where, "observed"));
}

json assessment_to_json(const Assessment& assessment) {
  json out = json::object();
  for (const auto& [id, point] : assessment) out[id] = point;
  return out;
}

}  // namespace qfl::model
