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

#include "qfl/qfl.h"

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <string>

#include "qfl/engine.hpp"
#include "qfl/error.hpp"
#include "qfl/service.hpp"

using nlohmann::json;
using qfl::Errc;
using qfl::Error;

struct qfl_engine {
  explicit qfl_engine(qfl::engine::Config config) : impl(std::move(config)) {}
  qfl::engine::Engine impl;
};

static_assert(static_cast<int>(QFL_BAD_REQUEST) == qfl::kErrcCount,
              "qfl_status must mirror qfl::Errc");

namespace {

thread_local std::string last_error;

qfl_status to_status(Errc code) { return static_cast<qfl_status>(static_cast<int>(code) + 1); }

char* dup(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out) std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

std::optional<std::string> opt(const char* s) {
  if (!s || !*s) return std::nullopt;
  return std::string(s);
}

json parse_arg(const char* text, const char* what) {
  json doc = json::parse(text ? text : "", nullptr, false);
  if (doc.is_discarded()) {
    throw Error(Errc::BadRequest, std::string(what) + " is not valid JSON", {{"field", what}});
  }
  return doc;
}

qfl::Timestamp time_or(const char* text, qfl::Timestamp fallback) {
  return opt(text) ? qfl::parse_rfc3339(text) : fallback;
}

qfl::engine::Page page(unsigned limit, unsigned offset) {
  return {limit == 0 ? 100u : limit, offset};
}

template <typename F>
qfl_status guarded(char** out, F&& f) {
  if (out) *out = nullptr;
  try {
    std::string result = f();
    if (out) *out = dup(result);
    last_error.clear();
    return QFL_OK;
  } catch (const Error& e) {
    last_error = e.to_json().dump();
    return to_status(e.code());
  } catch (const json::exception& e) {
    last_error = Error(Errc::BadRequest, e.what()).to_json().dump();
    return QFL_BAD_REQUEST;
  } catch (const std::exception& e) {
    last_error = json{{"status", 500}, {"code", "InternalError"}, {"message", e.what()},
                      {"details", json::object()}}
                     .dump();
    return QFL_INTERNAL_ERROR;
  }
}

template <typename F>
qfl_status with_engine(qfl_engine* engine, char** out, F&& f) {
  return guarded(out, [&]() -> std::string {
    if (!engine) throw Error(Errc::BadRequest, "engine handle is NULL");
    return f(engine->impl).dump();
  });
}

}  // namespace

extern "C" {

const char* qfl_status_name(qfl_status status) {
  if (status == QFL_OK) return "Ok";
  const int i = static_cast<int>(status) - 1;
  if (i < 0 || i >= qfl::kErrcCount) return "InternalError";
  return qfl::errc_name(static_cast<Errc>(i)).data();
}

int qfl_status_exit_code(qfl_status status) {
  if (status == QFL_OK) return 0;
  const int i = static_cast<int>(status) - 1;
  if (i < 0 || i >= qfl::kErrcCount) return 3;
  return static_cast<int>(qfl::errc_class(static_cast<Errc>(i)));
}

const char* qfl_last_error(void) { return last_error.c_str(); }

void qfl_string_free(char* s) { std::free(s); }

const char* qfl_version(void) { return "0.1.0"; }

qfl_status qfl_init_workspace(const char* dir, char** out_json) {
  return guarded(out_json, [&] {
    return qfl::engine::init_workspace(opt(dir).value_or(".")).dump();
  });
}

qfl_status qfl_engine_open(const char* config_path, qfl_engine** out) {
  if (!out) return QFL_BAD_REQUEST;
  *out = nullptr;
  return guarded(nullptr, [&] {
    const auto path = qfl::engine::discover_config(opt(config_path));
    *out = new qfl_engine(qfl::engine::load_config(path));
    return std::string();
  });
}

void qfl_engine_close(qfl_engine* engine) { delete engine; }

qfl_status qfl_config(qfl_engine* engine, char** out_json) {
  return with_engine(engine, out_json, [](auto& e) {
    const auto& c = e.config();
    return json{{"base_dir", c.base_dir.string()},
                {"model", c.model_path.string()},
                {"catalogue", c.catalogue_path.string()},
                {"thresholds", c.thresholds_path.string()},
                {"store", c.store_path.string()},
                {"backlog_url", c.backlog_url},
                {"host", c.host},
                {"port", c.port},
                {"forecast", {{"alpha", c.forecast_alpha}, {"horizon", c.forecast_horizon}}}};
  });
}

qfl_status qfl_model(qfl_engine* engine, char** out_json) {
  return with_engine(engine, out_json, [](auto& e) { return e.model_json(); });
}

qfl_status qfl_catalogue(qfl_engine* engine, char** out_json) {
  return with_engine(engine, out_json, [](auto& e) { return e.catalogue_json(); });
}

qfl_status qfl_thresholds(qfl_engine* engine, char** out_json) {
  return with_engine(engine, out_json, [](auto& e) { return e.thresholds_json(); });
}

qfl_status qfl_ingest(qfl_engine* engine, const char* kind, const char* document,
                      char** out_json) {
  return with_engine(engine, out_json, [&](auto& e) {
    auto k = opt(kind);
    return e.ingest(document ? document : "",
                    k ? std::optional(qfl::parse_source_kind(*k)) : std::nullopt);
  });
}

qfl_status qfl_assess(qfl_engine* engine, const char* at, char** out_json) {
  return with_engine(engine, out_json, [&](auto& e) {
    return e.assess(opt(at) ? std::optional(qfl::parse_rfc3339(at)) : std::nullopt);
  });
}

qfl_status qfl_latest_assessment(qfl_engine* engine, char** out_json) {
  return with_engine(engine, out_json, [](auto& e) { return e.latest_assessment(); });
}

qfl_status qfl_indicators(qfl_engine* engine, char** out_json) {
  return with_engine(engine, out_json, [](auto& e) { return e.indicators(); });
}

qfl_status qfl_history(qfl_engine* engine, const char* element_id, const char* from,
                       const char* to, char** out_json) {
  return with_engine(engine, out_json, [&](auto& e) {
    return e.history(element_id ? element_id : "", time_or(from, qfl::kMinTimestamp),
                     time_or(to, qfl::kMaxTimestamp));
  });
}

qfl_status qfl_events(qfl_engine* engine, const char* subject, const char* from, const char* to,
                      char** out_json) {
  return with_engine(engine, out_json, [&](auto& e) {
    qfl::store::EventQuery query;
    query.subject = opt(subject);
    query.from = time_or(from, qfl::kMinTimestamp);
    query.to = time_or(to, qfl::kMaxTimestamp);
    return e.events(query);
  });
}

qfl_status qfl_alerts(qfl_engine* engine, const char* state, unsigned limit, unsigned offset,
                      char** out_json) {
  return with_engine(engine, out_json, [&](auto& e) {
    auto s = opt(state);
    return e.alerts(s ? std::optional(qfl::alerting::parse_alert_state(*s)) : std::nullopt,
                    page(limit, offset));
  });
}

qfl_status qfl_alert_ack(qfl_engine* engine, const char* alert_id, char** out_json) {
  return with_engine(engine, out_json,
                     [&](auto& e) { return e.acknowledge(alert_id ? alert_id : ""); });
}

qfl_status qfl_alert_candidates(qfl_engine* engine, const char* alert_id, char** out_json) {
  return with_engine(engine, out_json,
                     [&](auto& e) { return e.candidates(alert_id ? alert_id : ""); });
}

qfl_status qfl_qr_suggest(qfl_engine* engine, const char* alert_id, const char* pattern,
                          const char* params_json, char** out_json) {
  return with_engine(engine, out_json, [&](auto& e) {
    qfl::catalogue::ParamMap params;
    if (opt(params_json)) params = qfl::catalogue::params_from_json(parse_arg(params_json, "params"));
    return e.suggest(alert_id ? alert_id : "", pattern ? pattern : "", params);
  });
}

qfl_status qfl_qrs(qfl_engine* engine, const char* state, unsigned limit, unsigned offset,
                   char** out_json) {
  return with_engine(engine, out_json, [&](auto& e) {
    auto s = opt(state);
    return e.qrs(s ? std::optional(qfl::workflow::parse_qr_state(*s)) : std::nullopt,
                 page(limit, offset));
  });
}

qfl_status qfl_qr_get(qfl_engine* engine, const char* qr_id, char** out_json) {
  return with_engine(engine, out_json, [&](auto& e) { return e.qr(qr_id ? qr_id : ""); });
}

qfl_status qfl_qr_decide(qfl_engine* engine, const char* qr_id, const char* stage,
                         const char* decision, const char* rationale, char** out_json) {
  return with_engine(engine, out_json, [&](auto& e) {
    return e.decide(qr_id ? qr_id : "", stage ? stage : "", decision ? decision : "",
                    rationale ? rationale : "");
  });
}

qfl_status qfl_qr_export(qfl_engine* engine, const char* qr_id, char** out_json) {
  return with_engine(engine, out_json,
                     [&](auto& e) { return e.export_qr(qr_id ? qr_id : ""); });
}

qfl_status qfl_qr_derive(qfl_engine* engine, const char* qr_id, const char* subject,
                         char** out_json) {
  return with_engine(engine, out_json, [&](auto& e) {
    return e.derive(qr_id ? qr_id : "", subject ? subject : "");
  });
}

qfl_status qfl_sync(qfl_engine* engine, const char* snapshot_json, char** out_json) {
  return with_engine(engine, out_json, [&](auto& e) {
    if (opt(snapshot_json)) return e.sync(parse_arg(snapshot_json, "snapshot"));
    return e.sync();
  });
}

qfl_status qfl_qfl(qfl_engine* engine, char** out_json) {
  return with_engine(engine, out_json, [](auto& e) { return e.qfl(); });
}

qfl_status qfl_whatif(qfl_engine* engine, const char* overrides_json, char** out_json) {
  return with_engine(engine, out_json,
                     [&](auto& e) { return e.whatif(parse_arg(overrides_json, "overrides")); });
}

qfl_status qfl_forecast(qfl_engine* engine, const char* element_id, const char* method,
                        int horizon, double alpha, char** out_json) {
  return with_engine(engine, out_json, [&](auto& e) {
    return e.forecast(element_id ? element_id : "",
                      qfl::analytics::parse_method(opt(method).value_or("ses")),
                      horizon > 0 ? std::optional(horizon) : std::nullopt,
                      std::isnan(alpha) ? std::nullopt : std::optional(alpha));
  });
}

qfl_status qfl_export_csv(qfl_engine* engine, char** out_text) {
  return guarded(out_text, [&] {
    if (!engine) throw Error(Errc::BadRequest, "engine handle is NULL");
    return engine->impl.export_csv();
  });
}

qfl_status qfl_serve(qfl_engine* engine, const char* host, int port, qfl_ready_fn on_ready,
                     void* user) {
  return guarded(nullptr, [&] {
    if (!engine) throw Error(Errc::BadRequest, "engine handle is NULL");
    const auto& c = engine->impl.config();
    qfl::service::serve(engine->impl, opt(host).value_or(c.host), port < 0 ? c.port : port,
                        c.api_secret, [&](int bound) {
                          if (on_ready) on_ready(bound, user);
                        });
    return std::string();
  });
}

}  // extern "C"
