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

#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "qfl/alerting.hpp"
#include "qfl/backlog.hpp"
#include "qfl/catalogue.hpp"
#include "qfl/ingestion.hpp"
#include "qfl/model.hpp"
#include "qfl/store.hpp"
#include "qfl/time.hpp"

/// Quality requirement life cycle: suggestion from an alert, quality
/// engineer review, export to the backlog, project manager decision,
/// derivation into tasks and completion tracking.
namespace qfl::workflow {

enum class QRState {
  Suggested,
  AcceptedByQE,
  RejectedByQE,
  Exported,
  Postponed,
  AcceptedByPM,
  RejectedByPM,
  Derived,
  Completed,
};

std::string_view to_string(QRState state) noexcept;
QRState parse_qr_state(std::string_view name);
bool transition_allowed(QRState from, QRState to) noexcept;
bool is_terminal(QRState state) noexcept;
/// True once the QR has a work package in the backlog.
bool is_exported(QRState state) noexcept;

enum class QeDecision { accept, reject };
enum class PmDecision { accept, reject, postpone };

QeDecision parse_qe_decision(std::string_view name);
PmDecision parse_pm_decision(std::string_view name);

struct DerivedTask {
  std::string wp_id;
  std::string subject;
  std::string status;
  friend bool operator==(const DerivedTask&, const DerivedTask&) = default;
};

struct QualityRequirement {
  std::string qr_id;
  std::string text;
  std::optional<std::string> pattern_name;
  catalogue::ParamMap params;
  std::optional<std::string> source_alert_id;
  std::vector<std::string> linked_metric_ids;
  QRState state = QRState::Suggested;
  /// Ids of the decision events recorded for this QR, oldest first.
  std::vector<std::string> decisions;
  std::optional<std::string> backlog_ref;
  std::vector<DerivedTask> derived_tasks;
  Timestamp created_at{};
  friend bool operator==(const QualityRequirement&, const QualityRequirement&) = default;
};

void to_json(nlohmann::json& j, const QualityRequirement& qr);
void from_json(const nlohmann::json& j, QualityRequirement& qr);

struct QflOptions {
  /// Reported for a ratio with an empty denominator.
  double neutral_value = 1.0;
  /// Task statuses that count as done.
  std::vector<std::string> closed_statuses{"Closed"};
};

struct QflMetrics {
  double qe_acceptance = 1.0;
  double pm_acceptance = 1.0;
  double mitigation_task_completion = 1.0;
  double qr_derivation = 1.0;
  /// Share of all suggested QRs that the project manager accepted.
  double end_to_end = 1.0;
  friend bool operator==(const QflMetrics&, const QflMetrics&) = default;
};

void to_json(nlohmann::json& j, const QflMetrics& metrics);

/// Pure function of the QR records.
///
///   qe_acceptance   QE-decided and not RejectedByQE / QE-decided
///   pm_acceptance   PM-decided and not RejectedByPM / PM-decided
///                   (Postponed is not a decision)
///   mitigation      closed derived tasks / derived tasks
///   qr_derivation   PM-accepted with a task / PM-accepted
///   end_to_end      PM-accepted / all QRs
QflMetrics compute_qfl_metrics(std::span<const QualityRequirement> qrs,
                               const QflOptions& options = {});

/// Ids of the feedback-loop elements merged into every engine model.
namespace ids {
inline constexpr std::string_view kQeAcceptance = "qfl.qe_acceptance";
inline constexpr std::string_view kPmAcceptance = "qfl.qr_acceptance";
inline constexpr std::string_view kMitigation = "qfl.mitigation_task_completion";
inline constexpr std::string_view kDerivation = "qfl.qr_derivation";
inline constexpr std::string_view kRelevance = "qfl.qr_relevance";
inline constexpr std::string_view kCompletion = "qfl.qr_completion";
inline constexpr std::string_view kIndicator = "qfl.quality_feedback_loop";
inline constexpr std::string_view kBacklogSource = "openproject";
}  // namespace ids

/// Metric values keyed by the ids above.
model::ValueMap qfl_metric_values(const QflMetrics& metrics);

/// Two factors (relevance, completion) under one indicator. The metric
/// evaluators are nominal; real values come from compute_qfl_metrics.
const model::QualityModel& feedback_loop_model();

/// Persistence hook for decisions and QR records.
class Journal {
 public:
  virtual ~Journal() = default;
  virtual store::DecisionEvent record_event(store::DecisionEvent event) = 0;
  virtual void save(const QualityRequirement& qr) = 0;
};

class MemoryJournal final : public Journal {
 public:
  store::DecisionEvent record_event(store::DecisionEvent event) override;
  void save(const QualityRequirement& qr) override;

  const std::vector<store::DecisionEvent>& events() const noexcept { return events_; }
  const std::map<std::string, QualityRequirement>& saved() const noexcept { return saved_; }

 private:
  std::vector<store::DecisionEvent> events_;
  std::map<std::string, QualityRequirement> saved_;
};

using Clock = std::function<Timestamp()>;

/// Owns the QR set. Every operation either completes (backlog call, event,
/// saved record) or throws and leaves the QR untouched.
class Workflow {
 public:
  Workflow(const model::QualityModel& model, const catalogue::Catalogue& catalogue,
           backlog::BacklogClient& backlog, Journal& journal, QflOptions options = {},
           Clock clock = now_utc);

  /// Replaces the in-memory QR set with previously saved records.
  void load(std::vector<QualityRequirement> qrs);

  /// Throws PatternNotApplicable when the pattern is unknown or not linked
  /// to the alerted element. A second suggestion for the same alert and
  /// pattern returns the existing QR.
  QualityRequirement suggest_qr(const alerting::Alert& alert, std::string_view pattern_name,
                                const catalogue::ParamMap& params);
  QualityRequirement qe_decide(std::string_view qr_id, QeDecision decision,
                               const std::string& rationale = {});
  /// Idempotent: exporting an Exported QR returns it unchanged.
  QualityRequirement export_qr(std::string_view qr_id);
  QualityRequirement pm_decide(std::string_view qr_id, PmDecision decision,
                               const std::string& rationale = {});
  /// Returns the work package id of the new (or identical existing) task.
  std::string derive_task(std::string_view qr_id, const std::string& subject);
  /// Refreshes task statuses from a backlog snapshot. Returns changed QRs.
  std::vector<QualityRequirement> sync_completion(const ingest::SourceSnapshot& snapshot);

  QualityRequirement get(std::string_view qr_id) const;
  std::vector<QualityRequirement> list(std::optional<QRState> state = std::nullopt) const;
  QflMetrics metrics() const;
  const QflOptions& options() const noexcept { return options_; }

 private:
  QualityRequirement& find(std::string_view qr_id);
  void require_transition(const QualityRequirement& qr, QRState to) const;
  void commit(QualityRequirement& slot, QualityRequirement updated, store::EventKind kind,
              std::string rationale);

  const model::QualityModel& model_;
  const catalogue::Catalogue& catalogue_;
  backlog::BacklogClient& backlog_;
  Journal& journal_;
  QflOptions options_;
  Clock clock_;
  mutable std::mutex mutex_;
  std::vector<QualityRequirement> qrs_;
};

}  // namespace qfl::workflow
