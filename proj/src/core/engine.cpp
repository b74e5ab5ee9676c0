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

#include "qfl/engine.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <sstream>

#include "json_util.hpp"
#include "qfl/embedded.hpp"
#include "qfl/error.hpp"

namespace qfl::engine {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string env_or_empty(const char* name) {
  const char* v = std::getenv(name);
  return v ? std::string(v) : std::string();
}

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

template <typename T>
json page_of(const std::vector<T>& items, Page page) {
  json out = json::array();
  const std::size_t end = std::min(items.size(), page.offset + page.limit);
  for (std::size_t i = page.offset; i < end; ++i) out.push_back(items[i]);
  return {{"items", out}, {"total", items.size()}, {"limit", page.limit}, {"offset", page.offset}};
}

model::QualityModel load_product_model(const Config& c) {
  return model::load_model(ingest::read_file(c.model_path));
}

}  // namespace

// ---------------------------------------------------------------------------
// Configuration

Config config_from_json(const json& doc, const fs::path& base_dir) {
  try {
    const std::string where = "config";
    if (!doc.is_object()) throw Error(Errc::SchemaError, "config must be a JSON object");
    Config c;
    c.base_dir = base_dir;
    c.model_path = resolve(base_dir, detail::optional_string(doc, "model", where, "model.json"));
    c.catalogue_path =
        resolve(base_dir, detail::optional_string(doc, "catalogue", where, "catalogue.json"));
    c.thresholds_path =
        resolve(base_dir, detail::optional_string(doc, "thresholds", where, "thresholds.json"));
    c.store_path = resolve(base_dir, detail::optional_string(doc, "store", where, "store"));
    c.backlog_url = detail::optional_string(doc, "backlog_url", where, c.backlog_url);
    c.durable = detail::optional_bool(doc, "durable", where, true);
    if (auto it = doc.find("qfl"); it != doc.end()) {
      c.qfl.neutral_value =
          detail::optional_number(*it, "neutral_value", "config.qfl").value_or(1.0);
      if (it->contains("closed_statuses")) {
        c.qfl.closed_statuses = detail::string_list(*it, "closed_statuses", "config.qfl");
      }
      if (c.qfl.neutral_value < 0.0 || c.qfl.neutral_value > 1.0) {
        throw Error(Errc::SchemaError, "qfl.neutral_value must lie in [0,1]");
      }
    }
    if (auto it = doc.find("service"); it != doc.end()) {
      c.host = detail::optional_string(*it, "host", "config.service", c.host);
      c.port = static_cast<int>(
          detail::optional_number(*it, "port", "config.service").value_or(c.port));
    }
    if (auto it = doc.find("forecast"); it != doc.end()) {
      c.forecast_alpha =
          detail::optional_number(*it, "alpha", "config.forecast").value_or(c.forecast_alpha);
      c.forecast_horizon = static_cast<int>(
          detail::optional_number(*it, "horizon", "config.forecast").value_or(c.forecast_horizon));
    }
    c.backlog_token = env_or_empty("QFL_BACKLOG_TOKEN");
    c.api_secret = env_or_empty("QFL_API_SECRET");
    return c;
  } catch (const Error& e) {
    if (e.code() != Errc::SchemaError) throw;
    throw Error(Errc::ConfigError, std::string("invalid config: ") + e.what(), e.details());
  }
}

Config load_config(const fs::path& path) {
  const std::string text = ingest::read_file(path);
  json doc = json::parse(text, nullptr, false);
  if (doc.is_discarded()) {
    throw Error(Errc::ConfigError, "config " + path.string() + " is not valid JSON",
                {{"path", path.string()}});
  }
  return config_from_json(doc, fs::absolute(path).parent_path());
}

fs::path discover_config(const std::optional<std::string>& flag) {
  if (flag && !flag->empty()) return *flag;
  if (auto env = env_or_empty("QFL_CONFIG"); !env.empty()) return env;
  return fs::path(kConfigFileName);
}

json init_workspace(const fs::path& dir) {
  json written = json::array();
  json skipped = json::array();
  std::error_code ec;
  for (const auto& file : embedded_files()) {
    const fs::path target = dir / fs::path(std::string(file.path));
    if (fs::exists(target)) {
      skipped.push_back(target.string());
      continue;
    }
    fs::create_directories(target.parent_path(), ec);
    std::ofstream out(target, std::ios::binary);
    out.write(file.contents.data(), static_cast<std::streamsize>(file.contents.size()));
    if (!out) {
      throw Error(Errc::StorageFailure, "cannot write " + target.string(),
                  {{"path", target.string()}});
    }
    written.push_back(target.string());
  }
  return {{"directory", fs::absolute(dir).string()}, {"written", written}, {"skipped", skipped}};
}

// ---------------------------------------------------------------------------
// Engine

class Engine::StoreJournal final : public workflow::Journal {
 public:
  explicit StoreJournal(store::Store& store) : store_(store) {}
  store::DecisionEvent record_event(store::DecisionEvent event) override {
    return store_.record_event(std::move(event));
  }
  void save(const workflow::QualityRequirement& qr) override {
    store_.put_document(store::DocumentKind::qr, qr.qr_id, qr);
  }

 private:
  store::Store& store_;
};

Engine::Engine(Config config)
    : config_(std::move(config)),
      product_model_(load_product_model(config_)),
      model_(model::merge_models(product_model_, workflow::feedback_loop_model())),
      catalogue_(catalogue::load_catalogue(ingest::read_file(config_.catalogue_path), &model_)),
      thresholds_(alerting::load_thresholds(ingest::read_file(config_.thresholds_path), &model_)) {
  store_ = std::make_unique<store::Store>(config_.store_path,
                                          store::StoreOptions{8u << 20, config_.durable});
  const auto ids = model_.element_ids();
  store_->declare_elements(ids);
  backlog_ = backlog::make_client(config_.backlog_url, config_.backlog_token, config_.base_dir);
  journal_ = std::make_unique<StoreJournal>(*store_);
  workflow_ = std::make_unique<workflow::Workflow>(model_, catalogue_, *backlog_, *journal_,
                                                   config_.qfl);

  std::vector<workflow::QualityRequirement> qrs;
  for (const auto& [key, body] : store_->documents(store::DocumentKind::qr)) {
    qrs.push_back(body.get<workflow::QualityRequirement>());
  }
  workflow_->load(std::move(qrs));

  std::vector<alerting::Alert> alerts;
  for (const auto& [key, body] : store_->documents(store::DocumentKind::alert)) {
    alerts.push_back(body.get<alerting::Alert>());
  }
  std::sort(alerts.begin(), alerts.end(),
            [](const auto& a, const auto& b) { return a.alert_id < b.alert_id; });
  alerts_ = alerting::AlertBook(std::move(alerts));
  sync_thresholds(now_utc());
}

Engine::~Engine() = default;

// Records one threshold_changed event per added, removed or modified
// threshold relative to the last persisted set.
void Engine::sync_thresholds(Timestamp now) {
  std::vector<alerting::Threshold> previous;
  if (auto doc = store_->get_document(store::DocumentKind::thresholds, "active")) {
    previous = alerting::thresholds_from_json(*doc);
  }
  if (previous == thresholds_) return;
  auto describe = [](const alerting::Threshold& t) { return json(t).dump(); };
  auto find = [](const std::vector<alerting::Threshold>& list, const std::string& element) {
    return std::find_if(list.begin(), list.end(),
                        [&](const auto& t) { return t.element_id == element; });
  };
  for (const auto& t : thresholds_) {
    auto old = find(previous, t.element_id);
    if (old != previous.end() && *old == t) continue;
    store_->record_event({"", store::EventKind::threshold_changed, t.element_id, now,
                          old == previous.end() ? "set " + describe(t)
                                                : "changed " + describe(*old) + " to " +
                                                      describe(t)});
  }
  for (const auto& t : previous) {
    if (find(thresholds_, t.element_id) == thresholds_.end()) {
      store_->record_event(
          {"", store::EventKind::threshold_changed, t.element_id, now, "removed " + describe(t)});
    }
  }
  store_->put_document(store::DocumentKind::thresholds, "active",
                       alerting::thresholds_to_json(thresholds_));
}

json Engine::model_json() const { return model::model_to_json(model_); }

json Engine::catalogue_json() const { return catalogue::catalogue_to_json(catalogue_); }

json Engine::thresholds_json() const { return alerting::thresholds_to_json(thresholds_); }

std::vector<ingest::SourceSnapshot> Engine::snapshots() const {
  std::vector<ingest::SourceSnapshot> out;
  for (const auto& [key, body] : store_->documents(store::DocumentKind::snapshot)) {
    out.push_back(ingest::snapshot_from_json(body, std::nullopt, kMaxTimestamp));
  }
  return out;
}

json Engine::ingest(std::string_view document, std::optional<SourceKind> expected) {
  auto snapshot = ingest::parse_snapshot(document, expected);
  const auto& sources = model_.sources();
  auto source = std::find_if(sources.begin(), sources.end(),
                             [&](const auto& s) { return s.id == snapshot.source_id; });
  if (source == sources.end()) {
    throw Error(Errc::ValidationError,
                "source '" + snapshot.source_id + "' is not declared by the model",
                {{"source_id", snapshot.source_id}});
  }
  if (source->kind != snapshot.kind) {
    throw Error(Errc::ValidationError,
                "source '" + snapshot.source_id + "' is declared as " +
                    std::string(to_string(source->kind)),
                {{"source_id", snapshot.source_id}, {"field", "source_kind"}});
  }
  std::unique_lock lock(mutex_);
  bool latest = true;
  if (auto existing = store_->get_document(store::DocumentKind::snapshot, snapshot.source_id)) {
    latest = parse_rfc3339(existing->at("captured_at").get<std::string>()) <= snapshot.captured_at;
  }
  if (latest) {
    store_->put_document(store::DocumentKind::snapshot, snapshot.source_id,
                         ingest::snapshot_to_json(snapshot));
  }
  return {{"source_id", snapshot.source_id},
          {"source_kind", std::string(to_string(snapshot.kind))},
          {"captured_at", format_rfc3339(snapshot.captured_at)},
          {"records", snapshot.records.size()},
          {"latest", latest}};
}

json Engine::assess(std::optional<Timestamp> at) {
  std::unique_lock lock(mutex_);
  const Timestamp when = at.value_or(now_utc());
  auto values = ingest::compute_metric_values(product_model_, snapshots());
  for (auto& [id, v] : workflow::qfl_metric_values(workflow_->metrics())) values[id] = v;
  const auto assessment = model::evaluate_snapshot(model_, values, when);

  std::vector<model::AssessmentPoint> points;
  points.reserve(assessment.size());
  for (const auto& [id, point] : assessment) points.push_back(point);
  store_->append_assessment(points);

  json raised = json::array();
  json resolved = json::array();
  for (const auto& alert : alerts_.check(assessment, thresholds_)) {
    store_->put_document(store::DocumentKind::alert, alert.alert_id, alert);
    (alert.active() ? raised : resolved).push_back(alert);
  }
  return {{"timestamp", format_rfc3339(when)},
          {"assessment", model::assessment_to_json(assessment)},
          {"alerts_raised", raised},
          {"alerts_resolved", resolved}};
}

json Engine::latest_assessment() const {
  json elements = json::object();
  std::optional<Timestamp> newest;
  for (const auto& id : model_.element_ids()) {
    if (auto p = store_->latest(id)) {
      elements[id] = *p;
      if (!newest || p->timestamp > *newest) newest = p->timestamp;
    }
  }
  return {{"timestamp", newest ? json(format_rfc3339(*newest)) : json()},
          {"assessment", elements}};
}

json Engine::indicators() const {
  json out = json::array();
  for (const auto& ind : model_.indicators()) {
    auto p = store_->latest(ind.id);
    out.push_back({{"element_id", ind.id},
                   {"name", ind.name},
                   {"timestamp", p ? json(format_rfc3339(p->timestamp)) : json()},
                   {"value", p ? json(p->value) : json()}});
  }
  return {{"items", out}, {"total", out.size()}};
}

json Engine::history(std::string_view element_id, Timestamp from, Timestamp to) const {
  const auto series = store_->query_range(element_id, from, to);
  return {{"element_id", series.element_id}, {"points", series.points}};
}

json Engine::events(const store::EventQuery& query) const {
  const auto list = store_->list_events(query);
  return {{"items", list}, {"total", list.size()}};
}

json Engine::alerts(std::optional<alerting::AlertState> state, Page page) const {
  std::shared_lock lock(mutex_);
  return page_of(alerts_.with_state(state), page);
}

json Engine::acknowledge(std::string_view alert_id) {
  std::unique_lock lock(mutex_);
  const auto alert = alerts_.acknowledge(alert_id, now_utc());
  store_->put_document(store::DocumentKind::alert, alert.alert_id, alert);
  return alert;
}

json Engine::candidates(std::string_view alert_id) const {
  std::shared_lock lock(mutex_);
  const auto& alert = alerts_.get(alert_id);
  json items = json::array();
  for (const auto& p : catalogue::candidates_for_alert(alert.element_id, catalogue_, model_)) {
    items.push_back(catalogue::pattern_to_json(p));
  }
  return {{"alert_id", alert.alert_id}, {"element_id", alert.element_id}, {"items", items}};
}

json Engine::suggest(std::string_view alert_id, std::string_view pattern,
                     const catalogue::ParamMap& params) {
  alerting::Alert alert;
  {
    std::shared_lock lock(mutex_);
    alert = alerts_.get(alert_id);
  }
  return workflow_->suggest_qr(alert, pattern, params);
}

json Engine::qrs(std::optional<workflow::QRState> state, Page page) const {
  return page_of(workflow_->list(state), page);
}

json Engine::qr(std::string_view qr_id) const { return workflow_->get(qr_id); }

json Engine::decide(std::string_view qr_id, std::string_view stage, std::string_view decision,
                    const std::string& rationale) {
  std::string_view effective = stage;
  if (effective.empty()) {
    effective = workflow_->get(qr_id).state == workflow::QRState::Suggested ? "qe" : "pm";
  }
  if (effective == "qe") {
    return workflow_->qe_decide(qr_id, workflow::parse_qe_decision(decision), rationale);
  }
  if (effective == "pm") {
    return workflow_->pm_decide(qr_id, workflow::parse_pm_decision(decision), rationale);
  }
  throw Error(Errc::BadRequest, "stage must be 'qe' or 'pm'", {{"field", "stage"}});
}

json Engine::export_qr(std::string_view qr_id) { return workflow_->export_qr(qr_id); }

json Engine::derive(std::string_view qr_id, const std::string& subject) {
  const std::string wp_id = workflow_->derive_task(qr_id, subject);
  return {{"wp_id", wp_id}, {"qr", workflow_->get(qr_id)}};
}

json Engine::sync(const std::optional<json>& snapshot) {
  ingest::SourceSnapshot snap;
  if (snapshot) {
    snap = ingest::snapshot_from_json(*snapshot, SourceKind::backlog);
  } else {
    std::vector<backlog::WorkPackage> items;
    try {
      items = backlog_->fetch_all();
    } catch (const Error& e) {
      if (e.code() != Errc::RemoteError) throw;
      throw Error(Errc::BacklogUnavailable, "backlog unavailable: " + std::string(e.what()),
                  e.details());
    }
    snap = backlog::to_snapshot(items, std::string(workflow::ids::kBacklogSource), now_utc());
  }
  const auto updated = workflow_->sync_completion(snap);
  return {{"updated", updated}, {"metrics", workflow_->metrics()}};
}

json Engine::qfl() const {
  const auto metrics = workflow_->metrics();
  const auto& loop = workflow::feedback_loop_model();
  const auto a = model::evaluate_snapshot(loop, workflow::qfl_metric_values(metrics), now_utc());
  json factors = json::object();
  for (const auto& f : loop.factors()) factors[f.id] = a.at(f.id).value;
  const std::string indicator(workflow::ids::kIndicator);
  return {{"metrics", metrics},
          {"factors", factors},
          {"indicator", {{"element_id", indicator}, {"value", a.at(indicator).value}}}};
}

json Engine::whatif(const json& overrides) const {
  if (!overrides.is_object()) {
    throw Error(Errc::BadRequest, "overrides must be an object of element values",
                {{"field", "overrides"}});
  }
  model::ValueMap pins;
  for (const auto& [id, v] : overrides.items()) {
    if (!v.is_number()) {
      throw Error(Errc::BadRequest, "override for '" + id + "' must be a number",
                  {{"field", id}});
    }
    pins[id] = v.get<double>();
  }
  model::ValueMap baseline;
  Timestamp at{};
  for (const auto& m : model_.metrics()) {
    if (auto p = store_->latest(m.id)) {
      baseline[m.id] = p->value;
      at = std::max(at, p->timestamp);
    }
  }
  return model::assessment_to_json(model::what_if(model_, baseline, pins, at));
}

json Engine::forecast(std::string_view element_id, analytics::Method method,
                      std::optional<int> horizon, std::optional<double> alpha) const {
  const auto series = store_->query_range(element_id, kMinTimestamp, kMaxTimestamp);
  const int h = horizon.value_or(config_.forecast_horizon);
  if (method == analytics::Method::ses) {
    return analytics::ses_forecast(series, alpha.value_or(config_.forecast_alpha), h);
  }
  return analytics::linear_trend_forecast(series, h);
}

std::string Engine::export_csv() const {
  std::ostringstream out;
  store_->export_csv(out);
  return out.str();
}

}  // namespace qfl::engine
