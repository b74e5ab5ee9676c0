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

#include "qfl/catalogue.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <set>

#include "json_util.hpp"
#include "qfl/error.hpp"

namespace qfl::catalogue {

using nlohmann::json;

namespace {

bool is_name_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.';
}

/// Walks pattern text, calling on_literal for plain text and on_param for
/// each placeholder name.
template <typename Literal, typename Param>
void scan(std::string_view text, Literal&& on_literal, Param&& on_param) {
  std::size_t i = 0;
  while (i < text.size()) {
    const std::size_t pct = text.find('%', i);
    if (pct == std::string_view::npos) {
      on_literal(text.substr(i));
      return;
    }
    on_literal(text.substr(i, pct - i));
    if (pct + 1 < text.size() && text[pct + 1] == '%') {
      on_literal("%");
      i = pct + 2;
      continue;
    }
    const std::size_t close = text.find('%', pct + 1);
    const std::string_view name =
        close == std::string_view::npos ? std::string_view{} : text.substr(pct + 1, close - pct - 1);
    if (close == std::string_view::npos || name.empty() ||
        !std::all_of(name.begin(), name.end(), is_name_char)) {
      throw Error(Errc::SchemaError,
                  "malformed placeholder in pattern text at offset " + std::to_string(pct),
                  {{"field", "pattern_text"}, {"offset", pct}});
    }
    on_param(name);
    i = close + 1;
  }
}

}  // namespace

bool ParamSpec::accepts(const ParamValue& value) const {
  if (const auto* interval = std::get_if<Interval>(&correctness)) {
    const auto* x = std::get_if<double>(&value);
    if (x == nullptr || !std::isfinite(*x)) return false;
    const bool lo = interval->min_inclusive ? *x >= interval->min : *x > interval->min;
    const bool hi = interval->max_inclusive ? *x <= interval->max : *x < interval->max;
    return lo && hi;
  }
  const auto& values = std::get<Enumeration>(correctness).values;
  const std::string text = render_value(value);
  return std::find(values.begin(), values.end(), text) != values.end();
}

std::string ParamSpec::constraint_text() const {
  if (const auto* interval = std::get_if<Interval>(&correctness)) {
    return render_value(interval->min) + (interval->min_inclusive ? " <= " : " < ") + name +
           (interval->max_inclusive ? " <= " : " < ") + render_value(interval->max);
  }
  std::string out = name + " in {";
  const auto& values = std::get<Enumeration>(correctness).values;
  for (std::size_t i = 0; i < values.size(); ++i) out += (i ? ", " : "") + values[i];
  return out + "}";
}

const ParamSpec* QRPattern::find_param(std::string_view param) const {
  for (const auto& p : parameters) {
    if (p.name == param) return &p;
  }
  return nullptr;
}

Catalogue::Catalogue(std::vector<QRPattern> patterns) : patterns_(std::move(patterns)) {}

const QRPattern* Catalogue::find(std::string_view name) const {
  for (const auto& p : patterns_) {
    if (p.name == name) return &p;
  }
  return nullptr;
}

std::vector<std::string> Catalogue::categories() const {
  std::set<std::string> all;
  for (const auto& p : patterns_) all.insert(p.categories.begin(), p.categories.end());
  return {all.begin(), all.end()};
}

std::vector<std::string> extract_placeholders(std::string_view pattern_text) {
  std::vector<std::string> names;
  scan(pattern_text, [](std::string_view) {},
       [&](std::string_view name) { names.emplace_back(name); });
  return names;
}

Catalogue catalogue_from_json(const json& doc, const model::QualityModel* model) {
  const json* list = &doc;
  if (doc.is_object()) list = &detail::require_array(doc, "patterns", "catalogue");
  if (!list->is_array()) throw Error(Errc::SchemaError, "catalogue must list patterns");

  std::vector<QRPattern> patterns;
  std::set<std::string> names;
  for (const auto& item : *list) {
    QRPattern p;
    p.name = detail::require_string(item, "name", "patterns");
    const std::string where = "patterns[" + p.name + "]";
    if (!names.insert(p.name).second) {
      throw Error(Errc::SchemaError, "duplicate pattern name '" + p.name + "'",
                  {{"pattern", p.name}});
    }
    p.description = detail::optional_string(item, "description", where);
    p.goal = detail::optional_string(item, "goal", where);
    p.pattern_text = detail::require_string(item, "pattern_text", where);
    if (auto it = item.find("parameters"); it != item.end() && !it->is_null()) {
      if (!it->is_array()) detail::schema_error(where, "parameters", "must be an array");
      for (const auto& param : *it) {
        ParamSpec spec;
        spec.name = detail::require_string(param, "name", where + ".parameters");
        spec.description = detail::optional_string(param, "description", where);
        if (param.contains("values")) {
          spec.correctness = Enumeration{detail::string_list(param, "values", where)};
          if (std::get<Enumeration>(spec.correctness).values.empty()) {
            detail::schema_error(where, "values", "must not be empty");
          }
        } else {
          Interval interval{detail::require_number(param, "min", where + ".parameters"),
                            detail::require_number(param, "max", where + ".parameters"),
                            detail::optional_bool(param, "min_inclusive", where, true),
                            detail::optional_bool(param, "max_inclusive", where, true)};
          const bool empty = interval.min > interval.max ||
                             (interval.min == interval.max &&
                              !(interval.min_inclusive && interval.max_inclusive));
          if (empty) {
            throw Error(Errc::SchemaError,
                        where + ": parameter '" + spec.name + "' has an empty interval",
                        {{"pattern", p.name}, {"param", spec.name}});
          }
          spec.correctness = interval;
        }
        if (p.find_param(spec.name) != nullptr) {
          throw Error(Errc::SchemaError,
                      where + ": parameter '" + spec.name + "' declared twice",
                      {{"pattern", p.name}, {"param", spec.name}});
        }
        p.parameters.push_back(std::move(spec));
      }
    }
    p.linked_metric_ids = detail::string_list(item, "linked_metric_ids", where);
    if (p.linked_metric_ids.empty()) {
      detail::schema_error(where, "linked_metric_ids", "must not be empty");
    }
    p.categories = detail::string_list(item, "categories", where, false);

    std::set<std::string> placeholders;
    for (auto& name : extract_placeholders(p.pattern_text)) placeholders.insert(name);
    for (const auto& name : placeholders) {
      if (p.find_param(name) == nullptr) {
        throw Error(Errc::SchemaError,
                    where + ": placeholder %" + name + "% has no parameter declaration",
                    {{"pattern", p.name}, {"param", name}});
      }
    }
    for (const auto& spec : p.parameters) {
      if (!placeholders.contains(spec.name)) {
        throw Error(Errc::SchemaError,
                    where + ": parameter '" + spec.name + "' does not appear in the pattern text",
                    {{"pattern", p.name}, {"param", spec.name}});
      }
    }
    if (model != nullptr) {
      for (const auto& metric : p.linked_metric_ids) {
        if (model->find_metric(metric) == nullptr) {
          throw Error(Errc::DanglingMetricLink,
                      where + ": linked metric '" + metric + "' is not in the model",
                      {{"pattern", p.name}, {"metric", metric}});
        }
      }
    }
    patterns.push_back(std::move(p));
  }
  return Catalogue(std::move(patterns));
}

Catalogue load_catalogue(std::string_view document, const model::QualityModel* model) {
  return catalogue_from_json(detail::parse_document(document, "catalogue"), model);
}

json pattern_to_json(const QRPattern& p) {
  json params = json::array();
  for (const auto& spec : p.parameters) {
    json j = {{"name", spec.name}, {"description", spec.description}};
    if (const auto* interval = std::get_if<Interval>(&spec.correctness)) {
      j["min"] = interval->min;
      j["max"] = interval->max;
      j["min_inclusive"] = interval->min_inclusive;
      j["max_inclusive"] = interval->max_inclusive;
    } else {
      j["values"] = std::get<Enumeration>(spec.correctness).values;
    }
    j["correctness"] = spec.constraint_text();
    params.push_back(std::move(j));
  }
  return {{"name", p.name},
          {"description", p.description},
          {"goal", p.goal},
          {"pattern_text", p.pattern_text},
          {"parameters", std::move(params)},
          {"linked_metric_ids", p.linked_metric_ids},
          {"categories", p.categories}};
}

json catalogue_to_json(const Catalogue& catalogue) {
  json patterns = json::array();
  for (const auto& p : catalogue.patterns()) patterns.push_back(pattern_to_json(p));
  return {{"patterns", std::move(patterns)}};
}

std::vector<QRPattern> candidates_for_alert(std::string_view element_id,
                                            const Catalogue& catalogue,
                                            const model::QualityModel& model) {
  const auto below = model.descendant_metrics(element_id);
  const std::set<std::string> targets(below.begin(), below.end());
  std::vector<std::pair<std::size_t, const QRPattern*>> ranked;
  for (const auto& p : catalogue.patterns()) {
    std::size_t hits = 0;
    for (const auto& m : p.linked_metric_ids) hits += targets.contains(m) ? 1 : 0;
    if (hits > 0) ranked.emplace_back(hits, &p);
  }
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second->name < b.second->name;
  });
  std::vector<QRPattern> out;
  out.reserve(ranked.size());
  for (const auto& [_, p] : ranked) out.push_back(*p);
  return out;
}

std::string render_value(const ParamValue& value) {
  if (const auto* text = std::get_if<std::string>(&value)) return *text;
  const double x = std::get<double>(value);
  char buf[64];
  if (std::isfinite(x) && x == std::trunc(x) && std::fabs(x) < 1e15) {
    std::snprintf(buf, sizeof buf, "%.0f", x);
    return buf;
  }
  std::snprintf(buf, sizeof buf, "%.2f", x);
  std::string out = buf;
  if (out.find('.') != std::string::npos) {
    while (out.back() == '0') out.pop_back();
    if (out.back() == '.') out.pop_back();
  }
  if (out == "-0") out = "0";
  return out;
}

std::string instantiate(const QRPattern& pattern, const ParamMap& params) {
  for (const auto& spec : pattern.parameters) {
    auto it = params.find(spec.name);
    if (it == params.end()) {
      throw Error(Errc::MissingParam,
                  "pattern '" + pattern.name + "' needs parameter '" + spec.name + "'",
                  {{"pattern", pattern.name}, {"param", spec.name}});
    }
    if (!spec.accepts(it->second)) {
      throw Error(Errc::ParamOutOfRange,
                  "parameter '" + spec.name + "' = " + render_value(it->second) +
                      " violates " + spec.constraint_text(),
                  {{"pattern", pattern.name},
                   {"param", spec.name},
                   {"constraint", spec.constraint_text()}});
    }
  }
  std::string out;
  scan(pattern.pattern_text, [&](std::string_view literal) { out += literal; },
       [&](std::string_view name) { out += render_value(params.at(std::string(name))); });
  return out;
}

ParamMap params_from_json(const json& doc) {
  ParamMap out;
  if (doc.is_null()) return out;
  if (!doc.is_object()) throw Error(Errc::BadRequest, "params must be an object");
  for (const auto& [name, value] : doc.items()) {
    if (value.is_number()) {
      out[name] = value.get<double>();
    } else if (value.is_string()) {
      out[name] = value.get<std::string>();
    } else {
      throw Error(Errc::BadRequest, "parameter '" + name + "' must be a number or string",
                  {{"param", name}});
    }
  }
  return out;
}

json params_to_json(const ParamMap& params) {
  json out = json::object();
  for (const auto& [name, value] : params) {
    std::visit([&](const auto& v) { out[name] = v; }, value);
  }
  return out;
}

}  // namespace qfl::catalogue
