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

#include "qfl/service.hpp"

#include <csignal>
#include <functional>
#include <regex>
#include <thread>

#include "httplib.h"
#include "qfl/error.hpp"
#include "qfl/log.hpp"

namespace qfl::service {

using nlohmann::json;

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

Response json_response(int status, const json& body) {
  return {status, body.dump(), "application/json"};
}

Response error_response(const Error& e) {
  return json_response(errc_http_status(e.code()), e.to_json());
}

json parse_body(const Request& request, bool allow_empty) {
  if (request.body.empty()) {
    if (allow_empty) return json::object();
    throw Error(Errc::BadRequest, "request body is required");
  }
  json doc = json::parse(request.body, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) {
    throw Error(Errc::BadRequest, "request body must be a JSON object");
  }
  return doc;
}

std::string body_string(const json& body, const char* field, bool required) {
  auto it = body.find(field);
  if (it == body.end() || it->is_null()) {
    if (required) {
      throw Error(Errc::BadRequest, std::string("field '") + field + "' is required",
                  {{"field", field}});
    }
    return {};
  }
  if (!it->is_string()) {
    throw Error(Errc::BadRequest, std::string("field '") + field + "' must be a string",
                {{"field", field}});
  }
  return it->get<std::string>();
}

std::size_t size_param(const Request& r, std::string_view name, std::size_t fallback) {
  auto v = r.param(name);
  if (!v) return fallback;
  try {
    std::size_t used = 0;
    const long long n = std::stoll(*v, &used);
    if (used == v->size() && n >= 0) return static_cast<std::size_t>(n);
  } catch (const std::exception&) {
  }
  throw Error(Errc::BadRequest, "query parameter '" + std::string(name) + "' must be a count",
              {{"field", std::string(name)}});
}

engine::Page page_params(const Request& r) {
  return {size_param(r, "limit", 100), size_param(r, "offset", 0)};
}

Timestamp time_param(const Request& r, std::string_view name, Timestamp fallback) {
  auto v = r.param(name);
  return v ? parse_rfc3339(*v) : fallback;
}

}  // namespace

std::string Request::header(std::string_view name) const {
  auto it = headers.find(lower(name));
  return it == headers.end() ? std::string() : it->second;
}

std::optional<std::string> Request::param(std::string_view name) const {
  auto it = query.find(std::string(name));
  if (it == query.end()) return std::nullopt;
  return it->second;
}

// ---------------------------------------------------------------------------
// Routing

struct Api::Routes {
  using Handler = std::function<json(const Request&, const std::smatch&)>;
  struct Route {
    std::string method;
    std::regex pattern;
    bool idempotent_key;
    Handler handler;
  };
  std::vector<Route> list;

  void add(std::string method, const std::string& pattern, Handler h, bool key = false) {
    list.push_back({std::move(method), std::regex(pattern), key, std::move(h)});
  }
};

Api::Api(engine::Engine& engine, std::string secret)
    : engine_(engine), secret_(std::move(secret)), routes_(std::make_unique<Routes>()) {
  auto& e = engine_;
  auto& r = *routes_;
  using M = const std::smatch&;

  r.add("GET", "/health", [](const Request&, M) { return json{{"status", "ok"}}; });
  r.add("GET", "/model", [&e](const Request&, M) { return e.model_json(); });
  r.add("GET", "/catalogue", [&e](const Request&, M) { return e.catalogue_json(); });
  r.add("GET", "/thresholds", [&e](const Request&, M) { return e.thresholds_json(); });
  r.add("GET", "/assessment/latest", [&e](const Request&, M) { return e.latest_assessment(); });
  r.add("GET", "/indicators", [&e](const Request&, M) { return e.indicators(); });
  r.add("GET", "/history/([^/]+)", [&e](const Request& q, M m) {
    return e.history(m[1].str(), time_param(q, "from", kMinTimestamp),
                     time_param(q, "to", kMaxTimestamp));
  });
  r.add("GET", "/events", [&e](const Request& q, M) {
    store::EventQuery query;
    query.from = time_param(q, "from", kMinTimestamp);
    query.to = time_param(q, "to", kMaxTimestamp);
    query.subject = q.param("subject");
    return e.events(query);
  });
  r.add("GET", "/alerts", [&e](const Request& q, M) {
    auto state = q.param("state");
    return e.alerts(state ? std::optional(alerting::parse_alert_state(*state)) : std::nullopt,
                    page_params(q));
  });
  r.add("GET", "/alerts/([^/]+)/candidates",
        [&e](const Request&, M m) { return e.candidates(m[1].str()); });
  r.add(
      "POST", "/alerts/([^/]+)/ack",
      [&e](const Request&, M m) { return e.acknowledge(m[1].str()); }, true);
  r.add(
      "POST", "/alerts/([^/]+)/suggest",
      [&e](const Request& q, M m) {
        const json body = parse_body(q, false);
        catalogue::ParamMap params;
        if (auto it = body.find("params"); it != body.end() && !it->is_null()) {
          params = catalogue::params_from_json(*it);
        }
        return e.suggest(m[1].str(), body_string(body, "pattern", true), params);
      },
      true);
  r.add("GET", "/qrs", [&e](const Request& q, M) {
    auto state = q.param("state");
    return e.qrs(state ? std::optional(workflow::parse_qr_state(*state)) : std::nullopt,
                 page_params(q));
  });
  r.add("GET", "/qrs/([^/]+)", [&e](const Request&, M m) { return e.qr(m[1].str()); });
  r.add(
      "POST", "/qrs/([^/]+)/decision",
      [&e](const Request& q, M m) {
        const json body = parse_body(q, false);
        return e.decide(m[1].str(), body_string(body, "stage", false),
                        body_string(body, "decision", true), body_string(body, "rationale", false));
      },
      true);
  r.add(
      "POST", "/qrs/([^/]+)/export", [&e](const Request&, M m) { return e.export_qr(m[1].str()); },
      true);
  r.add(
      "POST", "/qrs/([^/]+)/derive",
      [&e](const Request& q, M m) {
        return e.derive(m[1].str(), body_string(parse_body(q, false), "subject", true));
      },
      true);
  r.add("POST", "/sync", [&e](const Request& q, M) {
    const json body = parse_body(q, true);
    if (auto it = body.find("snapshot"); it != body.end() && !it->is_null()) return e.sync(*it);
    return e.sync();
  });
  r.add("POST", "/whatif", [&e](const Request& q, M) {
    const json body = parse_body(q, false);
    auto it = body.find("overrides");
    if (it == body.end()) {
      throw Error(Errc::BadRequest, "field 'overrides' is required", {{"field", "overrides"}});
    }
    return e.whatif(*it);
  });
  r.add("GET", "/forecast", [&e](const Request& q, M) {
    auto element = q.param("element");
    if (!element) {
      throw Error(Errc::BadRequest, "query parameter 'element' is required",
                  {{"field", "element"}});
    }
    std::optional<int> horizon;
    if (q.param("horizon")) horizon = static_cast<int>(size_param(q, "horizon", 0));
    std::optional<double> alpha;
    if (auto a = q.param("alpha")) {
      try {
        alpha = std::stod(*a);
      } catch (const std::exception&) {
        throw Error(Errc::BadRequest, "query parameter 'alpha' must be a number",
                    {{"field", "alpha"}});
      }
    }
    return e.forecast(*element, analytics::parse_method(q.param("method").value_or("ses")),
                      horizon, alpha);
  });
  r.add("GET", "/qfl", [&e](const Request&, M) { return e.qfl(); });
  r.add("POST", "/assess", [&e](const Request& q, M) {
    const json body = parse_body(q, true);
    const std::string at = body_string(body, "at", false);
    return e.assess(at.empty() ? std::nullopt : std::optional(parse_rfc3339(at)));
  });
  r.add("POST", "/ingest", [&e](const Request& q, M) {
    auto kind = q.param("kind");
    return e.ingest(q.body, kind ? std::optional(parse_source_kind(*kind)) : std::nullopt);
  });
}

Api::~Api() = default;

Response Api::handle(const Request& request) {
  try {
    if (!secret_.empty() && request.path != "/health" &&
        request.header(kSecretHeader) != secret_) {
      throw Error(Errc::Unauthorized, "missing or wrong shared secret");
    }
    if (request.method == "GET" && request.path == "/export.csv") {
      return {200, engine_.export_csv(), "text/csv"};
    }
    bool path_known = false;
    for (const auto& route : routes_->list) {
      std::smatch match;
      if (!std::regex_match(request.path, match, route.pattern)) continue;
      path_known = true;
      if (route.method != request.method) continue;
      if (!route.idempotent_key) return json_response(200, route.handler(request, match));

      const std::string key = request.header(kIdempotencyHeader);
      if (key.empty()) {
        throw Error(Errc::MissingIdempotencyKey,
                    "this endpoint requires an Idempotency-Key header");
      }
      std::lock_guard lock(replay_mutex_);
      const std::string slot = request.method + " " + request.path + "\n" + key;
      if (auto it = replays_.find(slot); it != replays_.end()) {
        if (it->second.first != request.body) {
          throw Error(Errc::ConflictError, "Idempotency-Key reused with a different body",
                      {{"key", key}});
        }
        return it->second.second;
      }
      Response response;
      try {
        response = json_response(200, route.handler(request, match));
      } catch (const Error& err) {
        response = error_response(err);
      }
      if (response.status < 500) replays_[slot] = {request.body, response};
      return response;
    }
    if (path_known) throw Error(Errc::NotFound, "method not allowed on " + request.path);
    throw Error(Errc::NotFound, "no such endpoint " + request.path, {{"path", request.path}});
  } catch (const Error& e) {
    return error_response(e);
  } catch (const json::exception& e) {
    return error_response(Error(Errc::BadRequest, e.what()));
  } catch (const std::exception& e) {
    log(LogLevel::error, std::string("request failed: ") + e.what());
    return error_response(Error(Errc::StorageFailure, e.what()));
  }
}

// ---------------------------------------------------------------------------
// HTTP transport

struct Server::Impl {
  Api api;
  httplib::Server http;

  Impl(engine::Engine& engine, std::string secret) : api(engine, std::move(secret)) {
    auto handler = [this](const httplib::Request& in, httplib::Response& out) {
      Request req;
      req.method = in.method;
      req.path = in.path;
      for (const auto& [k, v] : in.params) req.query.emplace(k, v);
      for (const auto& [k, v] : in.headers) req.headers[lower(k)] = v;
      req.body = in.body;
      const Response res = api.handle(req);
      out.status = res.status;
      out.set_content(res.body, res.content_type);
    };
    http.Get(".*", handler);
    http.Post(".*", handler);
    http.Put(".*", handler);
    http.Patch(".*", handler);
    http.Delete(".*", handler);
  }
};

Server::Server(engine::Engine& engine, std::string secret)
    : impl_(std::make_unique<Impl>(engine, std::move(secret))) {}

Server::~Server() { stop(); }

int Server::bind(const std::string& host, int port) {
  int bound = port;
  if (port == 0) {
    bound = impl_->http.bind_to_any_port(host);
  } else if (!impl_->http.bind_to_port(host, port)) {
    bound = -1;
  }
  if (bound < 0) {
    throw Error(Errc::BindError, "cannot bind " + host + ":" + std::to_string(port),
                {{"host", host}, {"port", port}});
  }
  return bound;
}

void Server::listen() { impl_->http.listen_after_bind(); }

void Server::stop() {
  if (impl_) impl_->http.stop();
}

void serve(engine::Engine& engine, const std::string& host, int port, std::string secret,
           const std::function<void(int)>& on_ready) {
  // Signals are taken synchronously by this thread; worker threads inherit
  // the blocked mask.
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);

  Server server(engine, std::move(secret));
  const int bound = server.bind(host, port);
  std::thread listener([&] { server.listen(); });
  if (on_ready) on_ready(bound);
  int sig = 0;
  sigwait(&set, &sig);
  log(LogLevel::info, "shutting down on signal " + std::to_string(sig));
  server.stop();
  listener.join();
  pthread_sigmask(SIG_UNBLOCK, &set, nullptr);
}

}  // namespace qfl::service
