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

#include "qfl/workflow.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <set>

#include "json_util.hpp"
#include "qfl/error.hpp"
#include "qfl/log.hpp"

namespace qfl::workflow {

using nlohmann::json;
using store::EventKind;

namespace {

constexpr std::array<std::string_view, 9> kStateNames{
    "Suggested",    "AcceptedByQE", "RejectedByQE", "Exported",  "Postponed",
    "AcceptedByPM", "RejectedByPM", "Derived",      "Completed"};

bool is_pm_decided(QRState s) {
  return s == QRState::RejectedByPM || s == QRState::AcceptedByPM || s == QRState::Derived ||
         s == QRState::Completed;
}

bool is_pm_accepted(QRState s) {
  return s == QRState::AcceptedByPM || s == QRState::Derived || s == QRState::Completed;
}

double ratio(std::size_t num, std::size_t den, double neutral) {
  return den == 0 ? neutral : static_cast<double>(num) / static_cast<double>(den);
}

std::string trimmed(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  return s.substr(first, s.find_last_not_of(" \t\r\n") - first + 1);
}

std::optional<std::string> nullable_string(const json& j, std::string_view field,
                                           const std::string& where) {
  auto it = j.find(field);
  if (it == j.end() || it->is_null()) return std::nullopt;
  return detail::require_string(j, field, where);
}

std::string format_qr_id(std::size_t n) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "QR-%06zu", n);
  return buf;
}

template <typename F>
auto call_backlog(F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const Error& e) {
    if (e.code() != Errc::RemoteError) throw;
    throw Error(Errc::BacklogUnavailable, "backlog unavailable: " + std::string(e.what()),
                e.details());
  }
}

}  // namespace

std::string_view to_string(QRState state) noexcept {
  return kStateNames[static_cast<std::size_t>(state)];
}

QRState parse_qr_state(std::string_view name) {
  for (std::size_t i = 0; i < kStateNames.size(); ++i) {
    if (kStateNames[i] == name) return static_cast<QRState>(i);
  }
  throw Error(Errc::SchemaError, "unknown QR state '" + std::string(name) + "'",
              {{"field", "state"}});
}

bool transition_allowed(QRState from, QRState to) noexcept {
  switch (from) {
    case QRState::Suggested:
      return to == QRState::AcceptedByQE || to == QRState::RejectedByQE;
    case QRState::AcceptedByQE:
      return to == QRState::Exported;
    case QRState::Exported:
      return to == QRState::RejectedByPM || to == QRState::Postponed ||
             to == QRState::AcceptedByPM;
    case QRState::Postponed:
      return to == QRState::AcceptedByPM || to == QRState::RejectedByPM;
    case QRState::AcceptedByPM:
      return to == QRState::Derived;
    case QRState::Derived:
      return to == QRState::Completed;
    case QRState::RejectedByQE:
    case QRState::RejectedByPM:
    case QRState::Completed:
      return false;
  }
  return false;
}

bool is_terminal(QRState state) noexcept {
  return state == QRState::RejectedByQE || state == QRState::RejectedByPM ||
         state == QRState::Completed;
}

bool is_exported(QRState state) noexcept {
  return state == QRState::Exported || state == QRState::Postponed ||
         state == QRState::RejectedByPM || is_pm_accepted(state);
}

QeDecision parse_qe_decision(std::string_view name) {
  if (name == "accept") return QeDecision::accept;
  if (name == "reject") return QeDecision::reject;
  throw Error(Errc::SchemaError, "unknown QE decision '" + std::string(name) + "'",
              {{"field", "decision"}});
}

PmDecision parse_pm_decision(std::string_view name) {
  if (name == "accept") return PmDecision::accept;
  if (name == "reject") return PmDecision::reject;
  if (name == "postpone") return PmDecision::postpone;
  throw Error(Errc::SchemaError, "unknown PM decision '" + std::string(name) + "'",
              {{"field", "decision"}});
}

// ---------------------------------------------------------------------------
// Records

void to_json(json& j, const QualityRequirement& qr) {
  json tasks = json::array();
  for (const auto& t : qr.derived_tasks) {
    tasks.push_back({{"wp_id", t.wp_id}, {"subject", t.subject}, {"status", t.status}});
  }
  j = json{{"qr_id", qr.qr_id},
           {"text", qr.text},
           {"pattern_name", qr.pattern_name ? json(*qr.pattern_name) : json()},
           {"params", catalogue::params_to_json(qr.params)},
           {"source_alert_id", qr.source_alert_id ? json(*qr.source_alert_id) : json()},
           {"linked_metric_ids", qr.linked_metric_ids},
           {"state", to_string(qr.state)},
           {"decisions", qr.decisions},
           {"backlog_ref", qr.backlog_ref ? json(*qr.backlog_ref) : json()},
           {"derived_tasks", tasks},
           {"created_at", format_rfc3339(qr.created_at)}};
}

void from_json(const json& j, QualityRequirement& qr) {
  const std::string where = "quality requirement";
  qr.qr_id = detail::require_string(j, "qr_id", where);
  qr.text = detail::require_string(j, "text", where);
  qr.pattern_name = nullable_string(j, "pattern_name", where);
  qr.params = j.contains("params") ? catalogue::params_from_json(j["params"])
                                   : catalogue::ParamMap{};
  qr.source_alert_id = nullable_string(j, "source_alert_id", where);
  qr.linked_metric_ids = detail::string_list(j, "linked_metric_ids", where);
  qr.state = parse_qr_state(detail::require_string(j, "state", where));
  qr.decisions = detail::string_list(j, "decisions", where, false);
  qr.backlog_ref = nullable_string(j, "backlog_ref", where);
  qr.derived_tasks.clear();
  for (const auto& t : detail::require_array(j, "derived_tasks", where)) {
    qr.derived_tasks.push_back({detail::require_string(t, "wp_id", "derived task"),
                                detail::require_string(t, "subject", "derived task"),
                                detail::require_string(t, "status", "derived task")});
  }
  qr.created_at = parse_rfc3339(detail::require_string(j, "created_at", where));
}

// ---------------------------------------------------------------------------
// Metrics

QflMetrics compute_qfl_metrics(std::span<const QualityRequirement> qrs,
                               const QflOptions& options) {
  std::size_t qe_decided = 0, qe_kept = 0;
  std::size_t pm_decided = 0, pm_kept = 0;
  std::size_t tasks = 0, closed = 0;
  std::size_t accepted = 0, accepted_derived = 0;
  const std::set<std::string> done(options.closed_statuses.begin(),
                                   options.closed_statuses.end());
  for (const auto& qr : qrs) {
    if (qr.state != QRState::Suggested) {
      ++qe_decided;
      if (qr.state != QRState::RejectedByQE) ++qe_kept;
    }
    if (is_pm_decided(qr.state)) {
      ++pm_decided;
      if (qr.state != QRState::RejectedByPM) ++pm_kept;
    }
    if (is_pm_accepted(qr.state)) {
      ++accepted;
      if (!qr.derived_tasks.empty()) ++accepted_derived;
    }
    for (const auto& t : qr.derived_tasks) {
      ++tasks;
      if (done.contains(t.status)) ++closed;
    }
  }
  const double n = options.neutral_value;
  return {ratio(qe_kept, qe_decided, n), ratio(pm_kept, pm_decided, n), ratio(closed, tasks, n),
          ratio(accepted_derived, accepted, n), ratio(accepted, qrs.size(), n)};
}

void to_json(json& j, const QflMetrics& m) {
  j = json{{"qe_acceptance", m.qe_acceptance},
           {"pm_acceptance", m.pm_acceptance},
           {"mitigation_task_completion", m.mitigation_task_completion},
           {"qr_derivation", m.qr_derivation},
           {"end_to_end", m.end_to_end}};
}

model::ValueMap qfl_metric_values(const QflMetrics& m) {
  return {{std::string(ids::kQeAcceptance), m.qe_acceptance},
          {std::string(ids::kPmAcceptance), m.pm_acceptance},
          {std::string(ids::kMitigation), m.mitigation_task_completion},
          {std::string(ids::kDerivation), m.qr_derivation}};
}

const model::QualityModel& feedback_loop_model() {
  static const model::QualityModel instance = [] {
    using namespace model;
    const std::string source(ids::kBacklogSource);
    const RecordFilter qr_only{"type", {std::string(backlog::kQualityRequirementType)}};
    const RecordFilter task_only{"type", {std::string(backlog::kTaskType)}};
    auto completion = [](std::vector<std::string> done, RecordFilter where) {
      return EvaluatorSpec{CompletionRatio{"status", std::move(done)}, {std::move(where)}, 1.0};
    };
    std::vector<MetricDef> metrics{
        {std::string(ids::kQeAcceptance), "QRs kept by the quality engineer",
         "Share of reviewed quality requirements not rejected by the quality engineer", source,
         completion(backlog::default_statuses(), qr_only)},
        {std::string(ids::kPmAcceptance), "QRs not rejected by the project manager",
         "Share of decided quality requirements not rejected by the project manager", source,
         completion({"New", "In progress", "Closed", "On hold"}, qr_only)},
        {std::string(ids::kMitigation), "Completed mitigation tasks",
         "Share of tasks derived from quality requirements that are closed", source,
         completion({"Closed"}, task_only)},
        {std::string(ids::kDerivation), "QRs derived into tasks",
         "Share of accepted quality requirements with at least one derived task", source,
         completion({"In progress", "Closed"}, qr_only)}};
    std::vector<FactorDef> factors{
        {std::string(ids::kRelevance), "Quality Requirements Relevance",
         "Whether suggested quality requirements are accepted",
         {{std::string(ids::kPmAcceptance), 1.0}}},
        {std::string(ids::kCompletion), "Quality Requirements Completion",
         "Whether accepted quality requirements turn into completed work",
         {{std::string(ids::kMitigation), 1.0}, {std::string(ids::kDerivation), 1.0}}}};
    std::vector<IndicatorDef> indicators{
        {std::string(ids::kIndicator), "Quality Feedback Loop",
         "Health of the loop from quality alerts to completed mitigation work",
         {{std::string(ids::kRelevance), 1.0}, {std::string(ids::kCompletion), 1.0}}}};
    return QualityModel::build("qfl", "1", {{source, SourceKind::backlog, "OpenProject"}},
                               std::move(metrics), std::move(factors), std::move(indicators));
  }();
  return instance;
}

// ---------------------------------------------------------------------------
// Journal

store::DecisionEvent MemoryJournal::record_event(store::DecisionEvent event) {
  if (store::requires_rationale(event.kind) && trimmed(event.rationale).empty()) {
    throw Error(Errc::MissingRationale, "a rejection requires a rationale",
                {{"subject", event.subject_id}});
  }
  if (event.event_id.empty()) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "EV-%06zu", events_.size() + 1);
    event.event_id = buf;
  }
  events_.push_back(event);
  return event;
}

void MemoryJournal::save(const QualityRequirement& qr) { saved_[qr.qr_id] = qr; }

// ---------------------------------------------------------------------------
// Workflow

Workflow::Workflow(const model::QualityModel& model, const catalogue::Catalogue& catalogue,
                   backlog::BacklogClient& backlog, Journal& journal, QflOptions options,
                   Clock clock)
    : model_(model),
      catalogue_(catalogue),
      backlog_(backlog),
      journal_(journal),
      options_(std::move(options)),
      clock_(std::move(clock)) {}

void Workflow::load(std::vector<QualityRequirement> qrs) {
  std::lock_guard lock(mutex_);
  std::sort(qrs.begin(), qrs.end(),
            [](const auto& a, const auto& b) { return a.qr_id < b.qr_id; });
  qrs_ = std::move(qrs);
}

QualityRequirement& Workflow::find(std::string_view qr_id) {
  for (auto& qr : qrs_) {
    if (qr.qr_id == qr_id) return qr;
  }
  throw Error(Errc::UnknownQR, "unknown quality requirement '" + std::string(qr_id) + "'",
              {{"qr_id", std::string(qr_id)}});
}

void Workflow::require_transition(const QualityRequirement& qr, QRState to) const {
  if (!transition_allowed(qr.state, to)) {
    throw Error(Errc::IllegalTransition,
                "cannot move " + qr.qr_id + " from " + std::string(to_string(qr.state)) +
                    " to " + std::string(to_string(to)),
                {{"qr_id", qr.qr_id},
                 {"from", std::string(to_string(qr.state))},
                 {"to", std::string(to_string(to))}});
  }
}

void Workflow::commit(QualityRequirement& slot, QualityRequirement updated, EventKind kind,
                      std::string rationale) {
  store::DecisionEvent event;
  event.kind = kind;
  event.subject_id = updated.qr_id;
  event.timestamp = clock_();
  event.rationale = std::move(rationale);
  event = journal_.record_event(std::move(event));
  updated.decisions.push_back(event.event_id);
  journal_.save(updated);
  slot = std::move(updated);
}

QualityRequirement Workflow::suggest_qr(const alerting::Alert& alert,
                                        std::string_view pattern_name,
                                        const catalogue::ParamMap& params) {
  std::lock_guard lock(mutex_);
  const auto* pattern = catalogue_.find(pattern_name);
  const auto candidates = catalogue::candidates_for_alert(alert.element_id, catalogue_, model_);
  const bool applicable =
      pattern && std::any_of(candidates.begin(), candidates.end(),
                             [&](const auto& p) { return p.name == pattern_name; });
  if (!applicable) {
    throw Error(Errc::PatternNotApplicable,
                "pattern '" + std::string(pattern_name) + "' does not address element '" +
                    alert.element_id + "'",
                {{"pattern", std::string(pattern_name)}, {"element", alert.element_id}});
  }
  for (const auto& qr : qrs_) {
    if (qr.source_alert_id == alert.alert_id && qr.pattern_name == pattern_name) return qr;
  }

  QualityRequirement qr;
  qr.text = catalogue::instantiate(*pattern, params);
  std::size_t last = 0;
  for (const auto& existing : qrs_) {
    std::size_t n = 0;
    if (std::sscanf(existing.qr_id.c_str(), "QR-%zu", &n) == 1) last = std::max(last, n);
  }
  qr.qr_id = format_qr_id(last + 1);
  qr.pattern_name = pattern->name;
  qr.params = params;
  qr.source_alert_id = alert.alert_id;
  qr.linked_metric_ids = pattern->linked_metric_ids;
  qr.state = QRState::Suggested;
  qr.created_at = clock_();

  qrs_.emplace_back();
  try {
    commit(qrs_.back(), qr, EventKind::qr_added, "suggested for alert " + alert.alert_id);
  } catch (...) {
    qrs_.pop_back();
    throw;
  }
  return qrs_.back();
}

QualityRequirement Workflow::qe_decide(std::string_view qr_id, QeDecision decision,
                                       const std::string& rationale) {
  std::lock_guard lock(mutex_);
  auto& slot = find(qr_id);
  const QRState to =
      decision == QeDecision::accept ? QRState::AcceptedByQE : QRState::RejectedByQE;
  require_transition(slot, to);
  auto updated = slot;
  updated.state = to;
  commit(slot, std::move(updated),
         decision == QeDecision::accept ? EventKind::qr_accepted_qe : EventKind::qr_rejected_qe,
         trimmed(rationale));
  return slot;
}

QualityRequirement Workflow::export_qr(std::string_view qr_id) {
  std::lock_guard lock(mutex_);
  auto& slot = find(qr_id);
  if (slot.state == QRState::Exported) return slot;
  require_transition(slot, QRState::Exported);

  backlog::CreateRequest request;
  request.subject = slot.text;
  request.type_name = std::string(backlog::kQualityRequirementType);
  request.description = "Quality requirement " + slot.qr_id;
  if (slot.source_alert_id) request.description += " suggested for alert " + *slot.source_alert_id;
  if (!slot.linked_metric_ids.empty()) {
    request.description += "; linked metrics:";
    for (const auto& m : slot.linked_metric_ids) request.description += " " + m;
  }
  request.external_key = slot.qr_id;
  const auto wp = call_backlog([&] { return backlog_.create_work_package(request); });

  auto updated = slot;
  updated.state = QRState::Exported;
  updated.backlog_ref = wp.wp_id;
  commit(slot, std::move(updated), EventKind::qr_exported, "work package " + wp.wp_id);
  return slot;
}

QualityRequirement Workflow::pm_decide(std::string_view qr_id, PmDecision decision,
                                       const std::string& rationale) {
  std::lock_guard lock(mutex_);
  auto& slot = find(qr_id);
  QRState to = QRState::AcceptedByPM;
  EventKind kind = EventKind::qr_accepted_pm;
  if (decision == PmDecision::reject) {
    to = QRState::RejectedByPM;
    kind = EventKind::qr_rejected_pm;
  } else if (decision == PmDecision::postpone) {
    to = QRState::Postponed;
    kind = EventKind::qr_postponed;
  }
  require_transition(slot, to);
  const std::string why = trimmed(rationale);
  if (store::requires_rationale(kind) && why.empty()) {
    throw Error(Errc::MissingRationale, "a rejection requires a rationale",
                {{"qr_id", slot.qr_id}});
  }
  if (decision == PmDecision::reject) {
    call_backlog([&] { return backlog_.set_status(*slot.backlog_ref, "Rejected"); });
  }
  auto updated = slot;
  updated.state = to;
  commit(slot, std::move(updated), kind, why);
  return slot;
}

std::string Workflow::derive_task(std::string_view qr_id, const std::string& subject) {
  std::lock_guard lock(mutex_);
  auto& slot = find(qr_id);
  if (slot.state != QRState::Derived) require_transition(slot, QRState::Derived);
  if (trimmed(subject).empty()) {
    throw Error(Errc::ValidationError, "task subject must not be empty",
                {{"field", "subject"}});
  }

  backlog::CreateRequest request;
  request.subject = subject;
  request.type_name = std::string(backlog::kTaskType);
  request.description = "Derived from " + slot.qr_id + ": " + slot.text;
  request.parent_id = slot.backlog_ref;
  request.external_key = slot.qr_id + ":" + subject;
  const auto wp = call_backlog([&] { return backlog_.create_work_package(request); });

  const bool known = std::any_of(slot.derived_tasks.begin(), slot.derived_tasks.end(),
                                 [&](const DerivedTask& t) { return t.wp_id == wp.wp_id; });
  if (known) return wp.wp_id;
  auto updated = slot;
  updated.state = QRState::Derived;
  updated.derived_tasks.push_back({wp.wp_id, wp.subject, wp.status});
  commit(slot, std::move(updated), EventKind::qr_derived,
         "task " + wp.wp_id + ": " + wp.subject);
  return wp.wp_id;
}

std::vector<QualityRequirement> Workflow::sync_completion(
    const ingest::SourceSnapshot& snapshot) {
  if (snapshot.kind != SourceKind::backlog) {
    throw Error(Errc::ValidationError, "completion sync needs a backlog snapshot",
                {{"source_id", snapshot.source_id}});
  }
  struct Item {
    std::string status;
    std::optional<std::string> parent;
  };
  std::map<std::string, Item> items;
  for (const auto& r : snapshot.records) {
    items[r.text("id")] = {r.text("status"), r.optional_text("parent_id")};
  }

  std::lock_guard lock(mutex_);
  const std::set<std::string> done(options_.closed_statuses.begin(),
                                   options_.closed_statuses.end());
  std::map<std::string, const QualityRequirement*> by_ref;
  std::set<std::string> known_tasks;
  for (const auto& qr : qrs_) {
    if (qr.backlog_ref) by_ref[*qr.backlog_ref] = &qr;
    for (const auto& t : qr.derived_tasks) known_tasks.insert(t.wp_id);
  }
  for (const auto& [id, item] : items) {
    if (item.parent && by_ref.contains(*item.parent) && !known_tasks.contains(id)) {
      log(LogLevel::warning, "sync: work package " + id + " under " + *item.parent +
                                 " is not a known derived task; ignored");
    }
  }

  std::vector<QualityRequirement> changed;
  for (auto& slot : qrs_) {
    if (slot.derived_tasks.empty()) continue;
    auto updated = slot;
    for (auto& t : updated.derived_tasks) {
      auto it = items.find(t.wp_id);
      if (it == items.end()) {
        log(LogLevel::warning, "sync: task " + t.wp_id + " of " + slot.qr_id +
                                   " is missing from the snapshot; ignored");
        continue;
      }
      t.status = it->second.status;
    }
    const bool all_done =
        std::all_of(updated.derived_tasks.begin(), updated.derived_tasks.end(),
                    [&](const DerivedTask& t) { return done.contains(t.status); });
    if (updated.state == QRState::Derived && all_done) {
      updated.state = QRState::Completed;
      commit(slot, std::move(updated), EventKind::qr_completed, "all derived tasks closed");
      changed.push_back(slot);
    } else if (updated.derived_tasks != slot.derived_tasks) {
      journal_.save(updated);
      slot = std::move(updated);
      changed.push_back(slot);
    }
  }
  return changed;
}

QualityRequirement Workflow::get(std::string_view qr_id) const {
  std::lock_guard lock(mutex_);
  return const_cast<Workflow*>(this)->find(qr_id);
}

std::vector<QualityRequirement> Workflow::list(std::optional<QRState> state) const {
  std::lock_guard lock(mutex_);
  std::vector<QualityRequirement> out;
  for (const auto& qr : qrs_) {
    if (!state || qr.state == *state) out.push_back(qr);
  }
  return out;
}

QflMetrics Workflow::metrics() const {
  std::lock_guard lock(mutex_);
  return compute_qfl_metrics(qrs_, options_);
}

}  // namespace qfl::workflow
