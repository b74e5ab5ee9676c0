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

#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <utility>

#include "qfl/engine.hpp"

namespace qfl::service {

inline constexpr std::string_view kSecretHeader = "X-QFL-Secret";
inline constexpr std::string_view kIdempotencyHeader = "Idempotency-Key";

struct Request {
  std::string method;
  std::string path;
  std::multimap<std::string, std::string> query;
  /// Header names are matched case-insensitively.
  std::map<std::string, std::string> headers;
  std::string body;

  std::string header(std::string_view name) const;
  std::optional<std::string> param(std::string_view name) const;
};

struct Response {
  int status = 200;
  std::string body;
  std::string content_type = "application/json";
};

/// Transport-independent request dispatcher. Bodies are the engine's JSON
/// results serialized compactly; failures are {status, code, message,
/// details}.
///
/// Mutating workflow endpoints require an Idempotency-Key header; a replay
/// returns the stored response. Server-side failures (5xx) are not stored,
/// so a retry with the same key is attempted again.
class Api {
 public:
  explicit Api(engine::Engine& engine, std::string secret = {});
  ~Api();

  Response handle(const Request& request);

 private:
  struct Routes;
  engine::Engine& engine_;
  std::string secret_;
  std::unique_ptr<Routes> routes_;
  std::mutex replay_mutex_;
  std::map<std::string, std::pair<std::string, Response>> replays_;
};

/// HTTP front end over Api.
class Server {
 public:
  explicit Server(engine::Engine& engine, std::string secret = {});
  ~Server();

  /// Port 0 picks a free port. Returns the bound port. Throws BindError.
  int bind(const std::string& host, int port);
  /// Blocks until stop().
  void listen();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Binds, serves until SIGINT or SIGTERM, then shuts down cleanly.
/// `on_ready` receives the bound port.
void serve(engine::Engine& engine, const std::string& host, int port, std::string secret,
           const std::function<void(int)>& on_ready = {});

}  // namespace qfl::service
