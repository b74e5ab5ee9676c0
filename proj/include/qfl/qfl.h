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

#ifndef QFL_QFL_H_
#define QFL_QFL_H_

/* C interface to the quality feedback loop engine.
 *
 * Conventions: every operation returns a qfl_status. On success a JSON
 * document is written to *out_json (release it with qfl_string_free). On
 * failure *out_json is left NULL and qfl_last_error() returns the error as
 * JSON {status, code, message, details} for the calling thread. Optional
 * string arguments may be NULL. */

#ifdef __cplusplus
extern "C" {
#endif

#if defined(QFL_BUILDING_LIBRARY)
#define QFL_API __attribute__((visibility("default")))
#else
#define QFL_API
#endif

typedef struct qfl_engine qfl_engine;

typedef enum qfl_status {
  QFL_OK = 0,
  QFL_SCHEMA_ERROR,
  QFL_VALIDATION_ERROR,
  QFL_FIELD_MISSING,
  QFL_EMPTY_CHILDREN,
  QFL_MISSING_METRIC_VALUE,
  QFL_UNKNOWN_ELEMENT,
  QFL_VALUE_OUT_OF_RANGE,
  QFL_SOURCE_MISSING,
  QFL_OUT_OF_ORDER_TIMESTAMP,
  QFL_STORAGE_FAILURE,
  QFL_MISSING_RATIONALE,
  QFL_UNKNOWN_ALERT,
  QFL_ILLEGAL_TRANSITION,
  QFL_DANGLING_METRIC_LINK,
  QFL_MISSING_PARAM,
  QFL_PARAM_OUT_OF_RANGE,
  QFL_PATTERN_NOT_APPLICABLE,
  QFL_UNKNOWN_QR,
  QFL_BACKLOG_UNAVAILABLE,
  QFL_REMOTE_ERROR,
  QFL_CONFLICT_ERROR,
  QFL_UNKNOWN_PARENT,
  QFL_UNKNOWN_WORK_PACKAGE,
  QFL_UNKNOWN_STATUS,
  QFL_EMPTY_SERIES,
  QFL_BAD_ALPHA,
  QFL_INSUFFICIENT_HISTORY,
  QFL_BIND_ERROR,
  QFL_CONFIG_ERROR,
  QFL_MISSING_IDEMPOTENCY_KEY,
  QFL_UNAUTHORIZED,
  QFL_NOT_FOUND,
  QFL_BAD_REQUEST,
  QFL_INTERNAL_ERROR = 1000
} qfl_status;

/* Machine-readable name, e.g. "MissingRationale"; "Ok" for QFL_OK. */
QFL_API const char* qfl_status_name(qfl_status status);
/* 0 ok, 1 domain error, 2 usage error, 3 I/O or remote error. */
QFL_API int qfl_status_exit_code(qfl_status status);
/* Last error of this thread as JSON; "" when the last call succeeded. */
QFL_API const char* qfl_last_error(void);
QFL_API void qfl_string_free(char* s);
QFL_API const char* qfl_version(void);

/* Writes the bundled example workspace into dir (existing files kept). */
QFL_API qfl_status qfl_init_workspace(const char* dir, char** out_json);

/* config_path NULL: $QFL_CONFIG, then ./qfl.config. */
QFL_API qfl_status qfl_engine_open(const char* config_path, qfl_engine** out);
QFL_API void qfl_engine_close(qfl_engine* engine);
/* Resolved settings: paths, backlog url, host, port, forecast defaults. */
QFL_API qfl_status qfl_config(qfl_engine* engine, char** out_json);

QFL_API qfl_status qfl_model(qfl_engine* engine, char** out_json);
QFL_API qfl_status qfl_catalogue(qfl_engine* engine, char** out_json);
QFL_API qfl_status qfl_thresholds(qfl_engine* engine, char** out_json);
/* kind may be NULL; otherwise the snapshot must declare that kind. */
QFL_API qfl_status qfl_ingest(qfl_engine* engine, const char* kind, const char* document,
                              char** out_json);
/* at: RFC 3339 instant or NULL for now. */
QFL_API qfl_status qfl_assess(qfl_engine* engine, const char* at, char** out_json);
QFL_API qfl_status qfl_latest_assessment(qfl_engine* engine, char** out_json);
QFL_API qfl_status qfl_indicators(qfl_engine* engine, char** out_json);
QFL_API qfl_status qfl_history(qfl_engine* engine, const char* element_id, const char* from,
                               const char* to, char** out_json);
QFL_API qfl_status qfl_events(qfl_engine* engine, const char* subject, const char* from,
                              const char* to, char** out_json);

/* limit 0 selects the default page size. */
QFL_API qfl_status qfl_alerts(qfl_engine* engine, const char* state, unsigned limit,
                              unsigned offset, char** out_json);
QFL_API qfl_status qfl_alert_ack(qfl_engine* engine, const char* alert_id, char** out_json);
QFL_API qfl_status qfl_alert_candidates(qfl_engine* engine, const char* alert_id,
                                        char** out_json);

/* params_json: object of name -> number or string; may be NULL. */
QFL_API qfl_status qfl_qr_suggest(qfl_engine* engine, const char* alert_id, const char* pattern,
                                  const char* params_json, char** out_json);
QFL_API qfl_status qfl_qrs(qfl_engine* engine, const char* state, unsigned limit,
                           unsigned offset, char** out_json);
QFL_API qfl_status qfl_qr_get(qfl_engine* engine, const char* qr_id, char** out_json);
/* stage "qe", "pm" or NULL (inferred from the QR state). */
QFL_API qfl_status qfl_qr_decide(qfl_engine* engine, const char* qr_id, const char* stage,
                                 const char* decision, const char* rationale, char** out_json);
QFL_API qfl_status qfl_qr_export(qfl_engine* engine, const char* qr_id, char** out_json);
QFL_API qfl_status qfl_qr_derive(qfl_engine* engine, const char* qr_id, const char* subject,
                                 char** out_json);
/* snapshot_json: backlog snapshot document, or NULL to read the backlog. */
QFL_API qfl_status qfl_sync(qfl_engine* engine, const char* snapshot_json, char** out_json);
QFL_API qfl_status qfl_qfl(qfl_engine* engine, char** out_json);

QFL_API qfl_status qfl_whatif(qfl_engine* engine, const char* overrides_json, char** out_json);
/* method "ses" or "trend"; horizon <= 0 and alpha NaN select defaults. */
QFL_API qfl_status qfl_forecast(qfl_engine* engine, const char* element_id, const char* method,
                                int horizon, double alpha, char** out_json);
/* CSV text, not JSON. */
QFL_API qfl_status qfl_export_csv(qfl_engine* engine, char** out_text);

typedef void (*qfl_ready_fn)(int port, void* user);
/* Serves HTTP until SIGINT/SIGTERM. host NULL and port < 0 use the config. */
QFL_API qfl_status qfl_serve(qfl_engine* engine, const char* host, int port,
                             qfl_ready_fn on_ready, void* user);

#ifdef __cplusplus
}
#endif

#endif /* QFL_QFL_H_ */
