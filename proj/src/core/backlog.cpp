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

#include "qfl/backlog.hpp"

#include <algorithm>
#include <fstream>

#include "json_util.hpp"
#include "qfl/error.hpp"

namespace qfl::backlog {

using nlohmann::json;

void to_json(json& j, const WorkPackage& wp) {
  j = {{"wp_id", wp.wp_id},
       {"subject", wp.subject},
       {"type_name", wp.type_name},
       {"status", wp.status},
       {"description", wp.description},
       {"parent_id", wp.parent_id ? json(*wp.parent_id) : json()},
       {"external_key", wp.external_key}};
}

void from_json(const json& j, WorkPackage& wp) {
  const std::string where = "work package";
  wp.wp_id = detail::require_string(j, "wp_id", where);
  wp.subject = detail::require_string(j, "subject", where);
  wp.type_name = detail::require_string(j, "type_name", where);
  wp.status = detail::require_string(j, "status", where);
  wp.description = detail::optional_string(j, "description", where);
  const std::string parent = detail::optional_string(j, "parent_id", where);
  wp.parent_id = parent.empty() ? std::nullopt : std::optional(parent);
  wp.external_key = detail::optional_string(j, "external_key", where);
}

const std::vector<std::string>& default_statuses() {
  static const std::vector<std::string> statuses{"New", "In progress", "Closed", "Rejected",
                                                 "On hold"};
  return statuses;
}

namespace {

bool same_payload(const WorkPackage& wp, const CreateRequest& r) {
  return wp.subject == r.subject && wp.type_name == r.type_name &&
         wp.description == r.description && wp.parent_id == r.parent_id;
}

}  // namespace

// ---------------------------------------------------------------------------
// FileBacklog

FileBacklog::FileBacklog(std::filesystem::path path, std::vector<std::string> statuses,
                         std::uint64_t first_id)
    : path_(std::move(path)), statuses_(std::move(statuses)), first_id_(first_id),
      next_id_(first_id) {
  refresh();
}

void FileBacklog::refresh() {
  std::ifstream in(path_, std::ios::binary);
  if (!in) return;
  in.seekg(0, std::ios::end);
  const auto size = static_cast<std::uint64_t>(in.tellg());
  if (size < consumed_) {
    // Replaced or truncated underneath us: start over.
    items_.clear();
    by_key_.clear();
    next_id_ = first_id_;
    consumed_ = 0;
    lines_ = 0;
  }
  if (size == consumed_) return;
  std::string chunk(size - consumed_, '\0');
  in.seekg(static_cast<std::streamoff>(consumed_));
  in.read(chunk.data(), static_cast<std::streamsize>(chunk.size()));
  // An unterminated last line is a write in progress or a crash mid-append;
  // it is left for a later pass.
  std::size_t begin = 0;
  for (auto nl = chunk.find('\n'); nl != std::string::npos; nl = chunk.find('\n', begin)) {
    ++lines_;
    apply_line(chunk.substr(begin, nl - begin));
    begin = nl + 1;
  }
  consumed_ += begin;
}

void FileBacklog::apply_line(const std::string& line) {
  if (line.empty()) return;
  const json entry = json::parse(line, nullptr, false);
  if (entry.is_discarded() || !entry.is_object()) {
    throw Error(Errc::StorageFailure,
                path_.string() + ":" + std::to_string(lines_) + ": corrupt backlog line");
  }
  const std::string op = entry.value("op", "");
  if (op == "create") {
    auto wp = entry.at("wp").get<WorkPackage>();
    next_id_ = std::max<std::uint64_t>(next_id_, std::stoull(wp.wp_id) + 1);
    if (!wp.external_key.empty()) by_key_[wp.external_key] = items_.size();
    items_.push_back(std::move(wp));
  } else if (op == "status") {
    if (auto* wp = find(entry.at("wp_id").get<std::string>())) {
      wp->status = entry.at("status").get<std::string>();
    }
  }
}

void FileBacklog::check_available() const {
  if (!available_) {
    throw Error(Errc::RemoteError, "backlog service unavailable", {{"retryable", true}});
  }
}

void FileBacklog::set_available(bool available) {
  std::lock_guard lock(mutex_);
  available_ = available;
}

WorkPackage* FileBacklog::find(const std::string& wp_id) {
  for (auto& wp : items_) {
    if (wp.wp_id == wp_id) return &wp;
  }
  return nullptr;
}

void FileBacklog::append_line(const json& line) {
  if (!path_.parent_path().empty()) std::filesystem::create_directories(path_.parent_path());
  // Drop a torn tail so the new line starts on a line boundary.
  std::error_code ec;
  if (std::filesystem::file_size(path_, ec) > consumed_ && !ec) {
    std::filesystem::resize_file(path_, consumed_);
  }
  std::ofstream out(path_, std::ios::app);
  out << line.dump() << '\n';
  out.flush();
  if (!out) {
    throw Error(Errc::RemoteError, "cannot append to backlog file '" + path_.string() + "'");
  }
}

WorkPackage FileBacklog::create_work_package(const CreateRequest& request) {
  std::lock_guard lock(mutex_);
  check_available();
  refresh();
  if (request.subject.empty()) {
    throw Error(Errc::ValidationError, "work package subject is empty");
  }
  if (!request.external_key.empty()) {
    if (auto it = by_key_.find(request.external_key); it != by_key_.end()) {
      const WorkPackage& existing = items_[it->second];
      if (!same_payload(existing, request)) {
        throw Error(Errc::ConflictError,
                    "external key '" + request.external_key + "' already used for work package " +
                        existing.wp_id + " with a different payload",
                    {{"external_key", request.external_key}, {"wp_id", existing.wp_id}});
      }
      return existing;
    }
  }
  if (request.parent_id && find(*request.parent_id) == nullptr) {
    throw Error(Errc::UnknownParent, "parent work package '" + *request.parent_id + "' not found",
                {{"parent_id", *request.parent_id}});
  }
  WorkPackage wp{std::to_string(next_id_), request.subject, request.type_name, "New",
                 request.description, request.parent_id, request.external_key};
  append_line({{"op", "create"}, {"wp", wp}});
  refresh();
  return wp;
}

WorkPackage FileBacklog::set_status(const std::string& wp_id, const std::string& status) {
  std::lock_guard lock(mutex_);
  check_available();
  refresh();
  WorkPackage* wp = find(wp_id);
  if (wp == nullptr) {
    throw Error(Errc::UnknownWorkPackage, "work package '" + wp_id + "' not found",
                {{"wp_id", wp_id}});
  }
  if (std::find(statuses_.begin(), statuses_.end(), status) == statuses_.end()) {
    throw Error(Errc::UnknownStatus, "unknown status '" + status + "'", {{"status", status}});
  }
  append_line({{"op", "status"}, {"wp_id", wp_id}, {"status", status}});
  refresh();
  return *find(wp_id);
}

std::vector<WorkPackage> FileBacklog::fetch_all() {
  std::lock_guard lock(mutex_);
  check_available();
  refresh();
  return items_;
}

// ---------------------------------------------------------------------------

std::unique_ptr<BacklogClient> make_client(std::string_view url, const std::string& token,
                                           const std::filesystem::path& base_dir) {
  if (url.starts_with("file:")) {
    std::filesystem::path path(std::string(url.substr(5)));
    if (path.is_relative() && !base_dir.empty()) path = base_dir / path;
    return std::make_unique<FileBacklog>(path);
  }
  if (url.starts_with("http://")) {
    HttpOptions options;
    options.base_url = std::string(url);
    options.token = token;
    return std::make_unique<HttpBacklog>(std::move(options));
  }
  throw Error(Errc::ConfigError,
              "unsupported backlog URL '" + std::string(url) + "' (use file: or http://)",
              {{"backlog_url", std::string(url)}});
}

ingest::SourceSnapshot to_snapshot(const std::vector<WorkPackage>& items,
                                   const std::string& source_id, Timestamp captured_at) {
  ingest::SourceSnapshot snapshot;
  snapshot.source_id = source_id;
  snapshot.kind = SourceKind::backlog;
  snapshot.captured_at = captured_at;
  for (const auto& wp : items) {
    snapshot.records.emplace_back(json{{"id", wp.wp_id},
                                       {"subject", wp.subject},
                                       {"type", wp.type_name},
                                       {"status", wp.status},
                                       {"parent_id", wp.parent_id ? json(*wp.parent_id) : json()}});
  }
  return snapshot;
}

// ---------------------------------------------------------------------------
// Wire mapping

namespace wire {

namespace {

std::string api(std::string_view path) { return std::string(kApiPrefix) + std::string(path); }

std::string id_of(const json& v) {
  return v.is_string() ? v.get<std::string>() : std::to_string(v.get<long long>());
}

}  // namespace

std::string href_tail(std::string_view href) {
  const auto slash = href.find_last_of('/');
  return std::string(slash == std::string_view::npos ? href : href.substr(slash + 1));
}

json create_body(const CreateRequest& r) {
  json links = {{"type", {{"href", api("/types/" + r.type_name)}, {"title", r.type_name}}}};
  if (r.parent_id) links["parent"] = {{"href", api("/work_packages/" + *r.parent_id)}};
  return {{"subject", r.subject},
          {"description", {{"format", "markdown"}, {"raw", r.description}}},
          {"externalKey", r.external_key},
          {"_links", std::move(links)}};
}

CreateRequest parse_create_body(const json& body) {
  CreateRequest r;
  r.subject = body.value("subject", "");
  if (auto d = body.find("description"); d != body.end() && d->is_object()) {
    r.description = d->value("raw", "");
  }
  r.external_key = body.value("externalKey", "");
  const json links = body.value("_links", json::object());
  if (links.contains("type")) r.type_name = links["type"].value("title", "");
  if (links.contains("parent") && links["parent"].is_object() &&
      links["parent"].contains("href") && links["parent"]["href"].is_string()) {
    r.parent_id = href_tail(links["parent"]["href"].get<std::string>());
  }
  return r;
}

json status_body(std::string_view status) {
  return {{"_links",
           {{"status",
             {{"href", api("/statuses/" + std::string(status))}, {"title", std::string(status)}}}}}};
}

std::string parse_status_body(const json& body) {
  const json links = body.value("_links", json::object());
  if (!links.contains("status")) return {};
  return links["status"].value("title", "");
}

json work_package_body(const WorkPackage& wp) {
  json links = {
      {"self", {{"href", api("/work_packages/" + wp.wp_id)}, {"title", wp.subject}}},
      {"type", {{"href", api("/types/" + wp.type_name)}, {"title", wp.type_name}}},
      {"status", {{"href", api("/statuses/" + wp.status)}, {"title", wp.status}}},
      {"parent", wp.parent_id ? json{{"href", api("/work_packages/" + *wp.parent_id)}}
                              : json{{"href", nullptr}}}};
  json body = {{"_type", "WorkPackage"},
               {"subject", wp.subject},
               {"description", {{"format", "markdown"}, {"raw", wp.description}}},
               {"externalKey", wp.external_key},
               {"_links", std::move(links)}};
  // OpenProject ids are integers; keep others as strings.
  if (!wp.wp_id.empty() &&
      std::all_of(wp.wp_id.begin(), wp.wp_id.end(), [](char c) { return c >= '0' && c <= '9'; })) {
    body["id"] = std::stoll(wp.wp_id);
  } else {
    body["id"] = wp.wp_id;
  }
  return body;
}

WorkPackage parse_work_package(const json& body) {
  if (!body.is_object() || !body.contains("id")) {
    throw Error(Errc::RemoteError, "malformed work package in response");
  }
  WorkPackage wp;
  wp.wp_id = id_of(body["id"]);
  wp.subject = body.value("subject", "");
  if (auto d = body.find("description"); d != body.end() && d->is_object()) {
    wp.description = d->value("raw", "");
  }
  wp.external_key = body.value("externalKey", "");
  const json links = body.value("_links", json::object());
  if (links.contains("type")) wp.type_name = links["type"].value("title", "");
  if (links.contains("status")) wp.status = links["status"].value("title", "");
  if (links.contains("parent") && links["parent"].is_object()) {
    const json& href = links["parent"]["href"];
    if (href.is_string()) wp.parent_id = href_tail(href.get<std::string>());
  }
  return wp;
}

json collection_body(const std::vector<WorkPackage>& items, std::size_t total, std::size_t page,
                     std::size_t page_size) {
  json elements = json::array();
  for (const auto& wp : items) elements.push_back(work_package_body(wp));
  return {{"_type", "Collection"},
          {"total", total},
          {"count", items.size()},
          {"pageSize", page_size},
          {"offset", page},
          {"_embedded", {{"elements", std::move(elements)}}}};
}

json error_body(std::string_view identifier, std::string_view message,
                std::string_view attribute) {
  json body = {{"_type", "Error"},
               {"errorIdentifier", "urn:openproject-org:api:v3:errors:" + std::string(identifier)},
               {"message", std::string(message)}};
  if (!attribute.empty()) {
    body["_embedded"] = {{"details", {{"attribute", std::string(attribute)}}}};
  }
  return body;
}

}  // namespace wire

}  // namespace qfl::backlog
