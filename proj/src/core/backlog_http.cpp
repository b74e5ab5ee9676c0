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

#include <thread>

#include "httplib.h"
#include "qfl/backlog.hpp"
#include "qfl/error.hpp"

namespace qfl::backlog {

using nlohmann::json;

struct HttpBacklog::Impl {
  HttpOptions options;
  std::string origin;  // scheme://host:port
  std::string prefix;  // path part of base_url, without trailing slash
  httplib::Headers headers;

  std::unique_ptr<httplib::Client> client() const {
    auto c = std::make_unique<httplib::Client>(origin);
    c->set_connection_timeout(options.timeout);
    c->set_read_timeout(options.timeout);
    c->set_write_timeout(options.timeout);
    return c;
  }
};

namespace {

struct Outcome {
  int status = 0;  // 0: transport failure
  std::string body;
};

json parse_response(const Outcome& o, const std::string& what) {
  json body = json::parse(o.body, nullptr, false);
  if (body.is_discarded()) {
    throw Error(Errc::RemoteError, what + ": response is not JSON",
                {{"http_status", o.status}, {"retryable", false}});
  }
  return body;
}

bool retryable(const Outcome& o) { return o.status == 0 || o.status == 429 || o.status >= 500; }

[[noreturn]] void raise_for(const Outcome& o, const std::string& what) {
  json body = json::parse(o.body, nullptr, false);
  const std::string message =
      body.is_object() ? body.value("message", o.body) : std::string(o.body);
  std::string attribute;
  if (body.is_object() && body.contains("_embedded")) {
    attribute = body["_embedded"].value("details", json::object()).value("attribute", "");
  }
  const json details = {{"http_status", o.status}, {"operation", what}};
  switch (o.status) {
    case 409:
      throw Error(Errc::ConflictError, what + ": " + message, details);
    case 404:
      throw Error(Errc::UnknownWorkPackage, what + ": " + message, details);
    case 422:
      if (attribute == "parent") throw Error(Errc::UnknownParent, what + ": " + message, details);
      if (attribute == "status") throw Error(Errc::UnknownStatus, what + ": " + message, details);
      throw Error(Errc::ValidationError, what + ": " + message, details);
    default: {
      json d = details;
      d["retryable"] = retryable(o);
      throw Error(Errc::RemoteError,
                  what + (o.status == 0 ? ": transport failure" : ": HTTP " +
                                                                      std::to_string(o.status)),
                  d);
    }
  }
}

}  // namespace

HttpBacklog::HttpBacklog(HttpOptions options) : impl_(std::make_unique<Impl>()) {
  impl_->options = std::move(options);
  std::string_view url = impl_->options.base_url;
  if (!url.starts_with("http://")) {
    throw Error(Errc::ConfigError, "backlog URL must start with http://",
                {{"backlog_url", impl_->options.base_url}});
  }
  const auto path_start = url.find('/', 7);
  impl_->origin = std::string(url.substr(0, path_start));
  impl_->prefix = path_start == std::string_view::npos ? "" : std::string(url.substr(path_start));
  while (!impl_->prefix.empty() && impl_->prefix.back() == '/') impl_->prefix.pop_back();
  if (!impl_->options.token.empty()) {
    impl_->headers.emplace("Authorization", "Bearer " + impl_->options.token);
  }
  if (impl_->options.max_attempts < 1) impl_->options.max_attempts = 1;
}

HttpBacklog::~HttpBacklog() = default;

namespace {

template <typename Send>
Outcome with_retries(const HttpOptions& options, int& attempts, Send&& send) {
  auto backoff = options.initial_backoff;
  Outcome last;
  for (int attempt = 1; attempt <= options.max_attempts; ++attempt) {
    ++attempts;
    httplib::Result res = send();
    last = res ? Outcome{res->status, res->body} : Outcome{0, {}};
    if (!retryable(last)) return last;
    if (attempt < options.max_attempts) {
      std::this_thread::sleep_for(backoff);
      backoff *= 2;
    }
  }
  return last;
}

}  // namespace

WorkPackage HttpBacklog::create_work_package(const CreateRequest& request) {
  auto client = impl_->client();
  auto headers = impl_->headers;
  if (!request.external_key.empty()) {
    headers.emplace(std::string(wire::kIdempotencyHeader), request.external_key);
  }
  const std::string body = wire::create_body(request).dump();
  const std::string path = impl_->prefix + "/work_packages";
  auto out = with_retries(impl_->options, attempts_, [&] {
    return client->Post(path, headers, body, "application/json");
  });
  if (out.status != 200 && out.status != 201) raise_for(out, "create work package");
  return wire::parse_work_package(parse_response(out, "create work package"));
}

WorkPackage HttpBacklog::set_status(const std::string& wp_id, const std::string& status) {
  auto client = impl_->client();
  const std::string body = wire::status_body(status).dump();
  const std::string path = impl_->prefix + "/work_packages/" + wp_id;
  auto out = with_retries(impl_->options, attempts_, [&] {
    return client->Patch(path, impl_->headers, body, "application/json");
  });
  if (out.status != 200) raise_for(out, "update work package " + wp_id);
  return wire::parse_work_package(parse_response(out, "update work package " + wp_id));
}

std::vector<WorkPackage> HttpBacklog::fetch_all() {
  auto client = impl_->client();
  constexpr std::size_t kPageSize = 100;
  std::vector<WorkPackage> items;
  for (std::size_t page = 1;; ++page) {
    const std::string path = impl_->prefix + "/work_packages?offset=" + std::to_string(page) +
                             "&pageSize=" + std::to_string(kPageSize);
    auto out = with_retries(impl_->options, attempts_,
                            [&] { return client->Get(path, impl_->headers); });
    if (out.status != 200) raise_for(out, "list work packages");
    const json body = parse_response(out, "list work packages");
    if (!body.contains("_embedded") || !body["_embedded"].contains("elements")) {
      throw Error(Errc::RemoteError, "list work packages: malformed collection");
    }
    const auto& elements = body["_embedded"]["elements"];
    for (const auto& e : elements) items.push_back(wire::parse_work_package(e));
    const std::size_t total = body.value("total", items.size());
    if (elements.empty() || items.size() >= total) break;
  }
  return items;
}

}  // namespace qfl::backlog
