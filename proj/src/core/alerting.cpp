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

#include "qfl/alerting.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <map>

#include "json_util.hpp"
#include "qfl/error.hpp"

namespace qfl::alerting {

using nlohmann::json;

namespace {

constexpr std::array<std::string_view, 2> kSeverityNames{"warning", "critical"};
constexpr std::array<std::string_view, 3> kStateNames{"open", "acknowledged", "resolved"};

std::string pair_key(std::string_view element, double trigger_below, Severity severity) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "<%.17g/", trigger_below);
  return std::string(element) + buf + std::string(to_string(severity));
}

}  // namespace

std::string_view to_string(Severity severity) noexcept {
  return kSeverityNames[static_cast<std::size_t>(severity)];
}

std::string_view to_string(AlertState state) noexcept {
  return kStateNames[static_cast<std::size_t>(state)];
}

Severity parse_severity(std::string_view name) {
  for (std::size_t i = 0; i < kSeverityNames.size(); ++i) {
    if (kSeverityNames[i] == name) return static_cast<Severity>(i);
  }
  throw Error(Errc::SchemaError, "unknown severity '" + std::string(name) + "'",
              {{"field", "severity"}});
}

AlertState parse_alert_state(std::string_view name) {
  for (std::size_t i = 0; i < kStateNames.size(); ++i) {
    if (kStateNames[i] == name) return static_cast<AlertState>(i);
  }
  throw Error(Errc::BadRequest, "unknown alert state '" + std::string(name) + "'",
              {{"field", "state"}});
}

std::string Threshold::key() const { return pair_key(element_id, trigger_below, severity); }

std::string Alert::threshold_key() const {
  return pair_key(element_id, trigger_below, severity);
}

void to_json(json& j, const Threshold& t) {
  j = {{"element_id", t.element_id},
       {"trigger_below", t.trigger_below},
       {"severity", std::string(to_string(t.severity))},
       {"enabled", t.enabled}};
}

void to_json(json& j, const Alert& a) {
  j = {{"alert_id", a.alert_id},
       {"element_id", a.element_id},
       {"observed_value", a.observed_value},
       {"trigger_below", a.trigger_below},
       {"severity", std::string(to_string(a.severity))},
       {"raised_at", format_rfc3339(a.raised_at)},
       {"state", std::string(to_string(a.state))},
       {"resolved_at", a.resolved_at ? json(format_rfc3339(*a.resolved_at)) : json()}};
}

void from_json(const json& j, Alert& a) {
  const std::string where = "alert";
  a.alert_id = detail::require_string(j, "alert_id", where);
  a.element_id = detail::require_string(j, "element_id", where);
  a.observed_value = detail::require_number(j, "observed_value", where);
  a.trigger_below = detail::require_number(j, "trigger_below", where);
  a.severity = parse_severity(detail::require_string(j, "severity", where));
  a.raised_at = parse_rfc3339(detail::require_string(j, "raised_at", where));
  a.state = parse_alert_state(detail::require_string(j, "state", where));
  const std::string resolved = detail::optional_string(j, "resolved_at", where);
  a.resolved_at = resolved.empty() ? std::nullopt : std::optional(parse_rfc3339(resolved));
}

std::vector<Threshold> thresholds_from_json(const json& doc, const model::QualityModel* model) {
  const json* list = &doc;
  if (doc.is_object()) list = &detail::require_array(doc, "thresholds", "thresholds");
  if (!list->is_array()) throw Error(Errc::SchemaError, "thresholds must be an array");
  std::vector<Threshold> out;
  for (const auto& item : *list) {
    const std::string where = "thresholds";
    Threshold t;
    t.element_id = detail::require_string(item, "element_id", where);
    t.trigger_below = detail::require_number(item, "trigger_below", where);
    t.severity = parse_severity(detail::optional_string(item, "severity", where, "warning"));
    t.enabled = detail::optional_bool(item, "enabled", where, true);
    if (t.trigger_below < 0.0 || t.trigger_below > 1.0) {
      throw Error(Errc::ValueOutOfRange,
                  t.element_id + ": trigger_below must lie in [0,1]",
                  {{"element", t.element_id}});
    }
    if (model != nullptr && !model->contains(t.element_id)) {
      throw Error(Errc::UnknownElement,
                  "threshold references unknown element '" + t.element_id + "'",
                  {{"element", t.element_id}});
    }
    out.push_back(std::move(t));
  }
  return out;
}

std::vector<Threshold> load_thresholds(std::string_view document,
                                       const model::QualityModel* model) {
  return thresholds_from_json(detail::parse_document(document, "thresholds"), model);
}

json thresholds_to_json(std::span<const Threshold> thresholds) {
  json out = json::array();
  for (const auto& t : thresholds) out.push_back(t);
  return out;
}

CheckOutcome check_thresholds(const model::Assessment& assessment,
                              std::span<const Threshold> thresholds,
                              std::span<const Alert> existing) {
  // pair key -> id of its active alert (empty for alerts raised in this pass)
  std::map<std::string, std::string> active;
  for (const auto& a : existing) {
    if (a.active()) active.emplace(a.threshold_key(), a.alert_id);
  }
  CheckOutcome outcome;
  for (const auto& t : thresholds) {
    auto point = assessment.find(t.element_id);
    if (point == assessment.end()) {
      throw Error(Errc::UnknownElement,
                  "threshold references unknown element '" + t.element_id + "'",
                  {{"element", t.element_id}});
    }
    if (!t.enabled) continue;
    const double value = point->second.value;
    const std::string key = t.key();
    auto open = active.find(key);
    if (value < t.trigger_below) {
      if (open != active.end()) continue;
      Alert alert;
      alert.element_id = t.element_id;
      alert.observed_value = value;
      alert.trigger_below = t.trigger_below;
      alert.severity = t.severity;
      alert.raised_at = point->second.timestamp;
      outcome.raised.push_back(std::move(alert));
      active.emplace(key, std::string());
    } else if (open != active.end() && !open->second.empty()) {
      outcome.resolved_ids.push_back(open->second);
      active.erase(open);
    }
  }
  return outcome;
}

// ---------------------------------------------------------------------------

AlertBook::AlertBook(std::vector<Alert> alerts) : alerts_(std::move(alerts)) {
  std::sort(alerts_.begin(), alerts_.end(),
            [](const Alert& a, const Alert& b) { return a.alert_id < b.alert_id; });
}

std::string AlertBook::next_id() const {
  char buf[32];
  std::snprintf(buf, sizeof buf, "AL-%06zu", alerts_.size() + 1);
  return buf;
}

std::vector<Alert> AlertBook::check(const model::Assessment& assessment,
                                    std::span<const Threshold> thresholds) {
  auto outcome = check_thresholds(assessment, thresholds, alerts_);
  std::vector<Alert> changed;
  Timestamp at{};
  if (!assessment.empty()) at = assessment.begin()->second.timestamp;
  for (const auto& id : outcome.resolved_ids) {
    Alert& a = find(id);
    a.state = AlertState::resolved;
    a.resolved_at = at;
    changed.push_back(a);
  }
  for (auto& alert : outcome.raised) {
    alert.alert_id = next_id();
    alerts_.push_back(alert);
    changed.push_back(alert);
  }
  return changed;
}

Alert& AlertBook::find(std::string_view alert_id) {
  for (auto& a : alerts_) {
    if (a.alert_id == alert_id) return a;
  }
  throw Error(Errc::UnknownAlert, "unknown alert '" + std::string(alert_id) + "'",
              {{"alert", std::string(alert_id)}});
}

const Alert& AlertBook::get(std::string_view alert_id) const {
  return const_cast<AlertBook*>(this)->find(alert_id);
}

Alert AlertBook::acknowledge(std::string_view alert_id, Timestamp) {
  Alert& a = find(alert_id);
  if (a.state != AlertState::open) {
    throw Error(Errc::IllegalTransition,
                "alert " + a.alert_id + " is " + std::string(to_string(a.state)) +
                    " and cannot be acknowledged",
                {{"alert", a.alert_id}, {"state", std::string(to_string(a.state))}});
  }
  a.state = AlertState::acknowledged;
  return a;
}

Alert AlertBook::resolve(std::string_view alert_id, Timestamp now) {
  Alert& a = find(alert_id);
  if (a.state == AlertState::resolved) {
    throw Error(Errc::IllegalTransition, "alert " + a.alert_id + " is already resolved",
                {{"alert", a.alert_id}, {"state", "resolved"}});
  }
  a.state = AlertState::resolved;
  a.resolved_at = now;
  return a;
}

std::vector<Alert> AlertBook::with_state(std::optional<AlertState> state) const {
  std::vector<Alert> out;
  for (const auto& a : alerts_) {
    if (!state || a.state == *state) out.push_back(a);
  }
  return out;
}

}  // namespace qfl::alerting
