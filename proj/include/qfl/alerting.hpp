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
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "qfl/model.hpp"
#include "qfl/time.hpp"

namespace qfl::alerting {

enum class Severity { warning, critical };
enum class AlertState { open, acknowledged, resolved };

std::string_view to_string(Severity severity) noexcept;
std::string_view to_string(AlertState state) noexcept;
Severity parse_severity(std::string_view name);
AlertState parse_alert_state(std::string_view name);

struct Threshold {
  std::string element_id;
  double trigger_below = 0.0;
  Severity severity = Severity::warning;
  bool enabled = true;

  /// Identity of the (element, threshold) pair used for deduplication.
  std::string key() const;
  friend bool operator==(const Threshold&, const Threshold&) = default;
};

struct Alert {
  std::string alert_id;
  std::string element_id;
  double observed_value = 0.0;
  double trigger_below = 0.0;
  Severity severity = Severity::warning;
  Timestamp raised_at{};
  AlertState state = AlertState::open;
  std::optional<Timestamp> resolved_at;

  std::string threshold_key() const;
  /// Open and acknowledged alerts both block re-raising.
  bool active() const noexcept { return state != AlertState::resolved; }
  friend bool operator==(const Alert&, const Alert&) = default;
};

void to_json(nlohmann::json& j, const Threshold& threshold);
void to_json(nlohmann::json& j, const Alert& alert);
void from_json(const nlohmann::json& j, Alert& alert);

/// Parses a thresholds document (array of {element_id, trigger_below,
/// severity, enabled}). When `model` is given every element must exist.
std::vector<Threshold> load_thresholds(std::string_view document,
                                       const model::QualityModel* model = nullptr);
std::vector<Threshold> thresholds_from_json(const nlohmann::json& doc,
                                            const model::QualityModel* model = nullptr);
nlohmann::json thresholds_to_json(std::span<const Threshold> thresholds);

struct CheckOutcome {
  /// New alerts, without ids; the caller assigns them.
  std::vector<Alert> raised;
  /// Ids of active alerts whose element recovered.
  std::vector<std::string> resolved_ids;
};

/// Pure threshold check. A breach is value < trigger_below. An enabled
/// threshold raises only when no active alert exists for its pair; an
/// active alert whose element is at or above its threshold is resolved.
/// Throws Error{UnknownElement} when a threshold names an element missing
/// from `assessment`.
CheckOutcome check_thresholds(const model::Assessment& assessment,
                              std::span<const Threshold> thresholds,
                              std::span<const Alert> existing);

/// Alert lifecycle owner: assigns ids, applies check outcomes and manual
/// transitions (open -> acknowledged -> resolved, open -> resolved).
class AlertBook {
 public:
  AlertBook() = default;
  explicit AlertBook(std::vector<Alert> alerts);

  /// Runs check_thresholds against the current alerts and applies it.
  /// Returns the alerts that changed (raised or auto-resolved).
  std::vector<Alert> check(const model::Assessment& assessment,
                           std::span<const Threshold> thresholds);

  Alert acknowledge(std::string_view alert_id, Timestamp now);
  Alert resolve(std::string_view alert_id, Timestamp now);

  const Alert& get(std::string_view alert_id) const;
  const std::vector<Alert>& alerts() const noexcept { return alerts_; }
  std::vector<Alert> with_state(std::optional<AlertState> state) const;

 private:
  Alert& find(std::string_view alert_id);
  std::string next_id() const;

  std::vector<Alert> alerts_;
};

}  // namespace qfl::alerting
