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

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "qfl/ingestion.hpp"

namespace qfl::backlog {

inline constexpr std::string_view kQualityRequirementType = "QualityRequirement";
inline constexpr std::string_view kTaskType = "Task";

struct WorkPackage {
  std::string wp_id;
  std::string subject;
  std::string type_name;
  std::string status;
  std::string description;
  std::optional<std::string> parent_id;
  std::string external_key;
  friend bool operator==(const WorkPackage&, const WorkPackage&) = default;
};

struct CreateRequest {
  std::string subject;
  std::string type_name;
  std::string description;
  std::optional<std::string> parent_id;
  /// Idempotency key: a repeated create with the same key returns the original.
  std::string external_key;
  friend bool operator==(const CreateRequest&, const CreateRequest&) = default;
};

void to_json(nlohmann::json& j, const WorkPackage& wp);
void from_json(const nlohmann::json& j, WorkPackage& wp);

const std::vector<std::string>& default_statuses();

/// Contract shared by the HTTP client and the file mock.
///
/// Errors: RemoteError (transport or server failure), ConflictError (same
/// external_key with a different payload), UnknownParent,
/// UnknownWorkPackage, UnknownStatus.
class BacklogClient {
 public:
  virtual ~BacklogClient() = default;
  virtual WorkPackage create_work_package(const CreateRequest& request) = 0;
  virtual WorkPackage set_status(const std::string& wp_id, const std::string& status) = 0;
  virtual std::vector<WorkPackage> fetch_all() = 0;
};

/// File-backed mock: append-only JSON lines, replayed on open.
/// Work packages kept as an append-only JSON-lines file. Several handles (or
/// processes) may share one file.
class FileBacklog final : public BacklogClient {
 public:
  explicit FileBacklog(std::filesystem::path path,
                       std::vector<std::string> statuses = default_statuses(),
                       std::uint64_t first_id = 1);

  WorkPackage create_work_package(const CreateRequest& request) override;
  WorkPackage set_status(const std::string& wp_id, const std::string& status) override;
  std::vector<WorkPackage> fetch_all() override;

  /// Simulates an outage: every call fails with RemoteError while false.
  void set_available(bool available);

 private:
  void refresh();
  void apply_line(const std::string& line);
  void append_line(const nlohmann::json& line);
  void check_available() const;
  WorkPackage* find(const std::string& wp_id);

  std::filesystem::path path_;
  std::vector<std::string> statuses_;
  std::uint64_t first_id_;
  std::uint64_t next_id_;
  /// Bytes of the file already applied; lines appended by other writers are
  /// picked up on the next call.
  std::uint64_t consumed_ = 0;
  std::size_t lines_ = 0;
  bool available_ = true;
  std::mutex mutex_;
  std::vector<WorkPackage> items_;
  std::map<std::string, std::size_t> by_key_;
};

struct HttpOptions {
  /// e.g. http://host:8080/api/v3
  std::string base_url;
  /// Sent as "Authorization: Bearer <token>" when non-empty.
  std::string token;
  int max_attempts = 5;
  std::chrono::milliseconds initial_backoff{200};
  std::chrono::seconds timeout{10};
};

/// Client for an OpenProject-flavoured REST service:
/// POST /work_packages, PATCH /work_packages/{id}, GET /work_packages.
/// Retryable failures are retried with exponential backoff.
class HttpBacklog final : public BacklogClient {
 public:
  explicit HttpBacklog(HttpOptions options);
  ~HttpBacklog() override;

  WorkPackage create_work_package(const CreateRequest& request) override;
  WorkPackage set_status(const std::string& wp_id, const std::string& status) override;
  std::vector<WorkPackage> fetch_all() override;

  int attempts_made() const noexcept { return attempts_; }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  int attempts_ = 0;
};

/// "file:<path>" selects the mock, "http://..." the REST client. A relative
/// mock path is resolved against `base_dir`.
std::unique_ptr<BacklogClient> make_client(std::string_view url, const std::string& token,
                                           const std::filesystem::path& base_dir = {});

/// Mirror of the backlog as a `backlog` source snapshot.
ingest::SourceSnapshot to_snapshot(const std::vector<WorkPackage>& items,
                                   const std::string& source_id, Timestamp captured_at);

/// The single place where domain fields meet the wire format.
namespace wire {
inline constexpr std::string_view kIdempotencyHeader = "Idempotency-Key";
inline constexpr std::string_view kApiPrefix = "/api/v3";

nlohmann::json create_body(const CreateRequest& request);
CreateRequest parse_create_body(const nlohmann::json& body);
nlohmann::json status_body(std::string_view status);
std::string parse_status_body(const nlohmann::json& body);
nlohmann::json work_package_body(const WorkPackage& wp);
WorkPackage parse_work_package(const nlohmann::json& body);
nlohmann::json collection_body(const std::vector<WorkPackage>& items, std::size_t total,
                               std::size_t page, std::size_t page_size);
/// Validation failures: `attribute` is "parent", "status" or "subject".
nlohmann::json error_body(std::string_view identifier, std::string_view message,
                          std::string_view attribute = {});
std::string href_tail(std::string_view href);
}  // namespace wire

}  // namespace qfl::backlog
