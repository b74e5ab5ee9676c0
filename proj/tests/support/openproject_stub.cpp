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

#include "openproject_stub.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "httplib.h"

namespace qfl::testing {

using nlohmann::json;

namespace {

json read_json(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return json::parse(ss.str());
}

std::string tail(const std::string& href) { return href.substr(href.find_last_of('/') + 1); }

const std::vector<std::string> kStatuses{"New", "In progress", "Closed", "Rejected", "On hold"};

}  // namespace

struct OpenProjectStub::Impl {
  std::string recordings;
  std::string token;
  httplib::Server server;
  std::thread thread;
  int port = 0;

  mutable std::mutex mutex;
  std::vector<Item> items;
  std::map<std::string, std::pair<std::string, long long>> by_key;  // key -> payload, id
  long long next_id = 133;
  int fail_count = 0;
  int fail_status = 503;

  json render(const Item& item) const {
    json doc = read_json(recordings + "/work_package.json");
    doc["id"] = item.id;
    doc["subject"] = item.subject;
    doc["description"]["raw"] = item.description;
    doc["externalKey"] = item.external_key;
    auto& links = doc["_links"];
    links["self"]["href"] = "/api/v3/work_packages/" + std::to_string(item.id);
    links["self"]["title"] = item.subject;
    links["update"]["href"] = "/api/v3/work_packages/" + std::to_string(item.id) + "/form";
    links["type"]["title"] = item.type;
    links["status"]["title"] = item.status;
    for (std::size_t i = 0; i < kStatuses.size(); ++i) {
      if (kStatuses[i] == item.status) {
        links["status"]["href"] = "/api/v3/statuses/" + std::to_string(i + 1);
      }
    }
    if (item.parent) {
      links["parent"] = {{"href", "/api/v3/work_packages/" + std::to_string(*item.parent)},
                         {"title", "parent"}};
    }
    return doc;
  }

  void error(httplib::Response& res, int status, const std::string& recording,
             const std::string& message = {}, const std::string& attribute = {}) const {
    json doc = read_json(recordings + "/" + recording);
    if (!message.empty()) doc["message"] = message;
    if (!attribute.empty()) doc["_embedded"]["details"]["attribute"] = attribute;
    res.status = status;
    res.set_content(doc.dump(), "application/hal+json");
  }

  Item* find(long long id) {
    for (auto& item : items) {
      if (item.id == id) return &item;
    }
    return nullptr;
  }

  // Returns true when the request was consumed by an injected failure.
  bool inject(httplib::Response& res) {
    if (fail_count <= 0) return false;
    --fail_count;
    error(res, fail_status, "error_unavailable.json");
    return true;
  }

  bool authorized(const httplib::Request& req, httplib::Response& res) const {
    if (token.empty() || req.get_header_value("Authorization") == "Bearer " + token) return true;
    res.status = 401;
    res.set_content(R"({"_type":"Error","message":"Unauthenticated"})", "application/hal+json");
    return false;
  }
};

OpenProjectStub::OpenProjectStub(std::string recordings, std::string token)
    : impl_(std::make_unique<Impl>()) {
  impl_->recordings = std::move(recordings);
  impl_->token = std::move(token);
  auto& s = impl_->server;
  Impl* d = impl_.get();

  s.Post("/api/v3/work_packages", [this, d](const httplib::Request& req, httplib::Response& res) {
    ++requests_;
    std::lock_guard lock(d->mutex);
    if (!d->authorized(req, res) || d->inject(res)) return;
    const json body = json::parse(req.body, nullptr, false);
    if (!body.is_object() || !body.contains("subject") || body["subject"] == "") {
      d->error(res, 422, "error_constraint.json", "Subject can't be blank.", "subject");
      return;
    }
    Item item;
    item.subject = body["subject"].get<std::string>();
    item.description = body.value("description", json::object()).value("raw", "");
    item.external_key = body.value("externalKey", "");
    const json links = body.value("_links", json::object());
    item.type = links.value("type", json::object()).value("title", "Task");
    if (links.contains("parent") && links["parent"]["href"].is_string()) {
      const long long parent = std::stoll(tail(links["parent"]["href"].get<std::string>()));
      if (!d->find(parent)) {
        d->error(res, 422, "error_constraint.json");
        return;
      }
      item.parent = parent;
    }
    const std::string key = req.get_header_value("Idempotency-Key");
    const std::string payload = body.dump();
    if (!key.empty()) {
      if (auto it = d->by_key.find(key); it != d->by_key.end()) {
        if (it->second.first != payload) {
          d->error(res, 409, "error_conflict.json");
          return;
        }
        res.status = 200;
        res.set_content(d->render(*d->find(it->second.second)).dump(), "application/hal+json");
        return;
      }
    }
    item.id = d->next_id++;
    d->items.push_back(item);
    if (!key.empty()) d->by_key[key] = {payload, item.id};
    res.status = 201;
    res.set_content(d->render(item).dump(), "application/hal+json");
  });

  s.Patch(R"(/api/v3/work_packages/(\d+))",
          [this, d](const httplib::Request& req, httplib::Response& res) {
            ++requests_;
            std::lock_guard lock(d->mutex);
            if (!d->authorized(req, res) || d->inject(res)) return;
            Item* item = d->find(std::stoll(req.matches[1].str()));
            if (!item) {
              d->error(res, 404, "error_not_found.json");
              return;
            }
            const json body = json::parse(req.body, nullptr, false);
            const json status = body.value("_links", json::object()).value("status", json());
            const std::string title = status.is_object() ? status.value("title", "") : "";
            if (std::find(kStatuses.begin(), kStatuses.end(), title) == kStatuses.end()) {
              d->error(res, 422, "error_constraint.json",
                       "Status is not set to one of the allowed values.", "status");
              return;
            }
            item->status = title;
            res.status = 200;
            res.set_content(d->render(*item).dump(), "application/hal+json");
          });

  s.Get("/api/v3/work_packages", [this, d](const httplib::Request& req, httplib::Response& res) {
    ++requests_;
    std::lock_guard lock(d->mutex);
    if (!d->authorized(req, res) || d->inject(res)) return;
    const std::size_t page =
        req.has_param("offset") ? std::stoul(req.get_param_value("offset")) : 1;
    std::size_t size =
        req.has_param("pageSize") ? std::stoul(req.get_param_value("pageSize")) : 20;
    size = std::min(size, page_cap_);
    json doc = read_json(d->recordings + "/collection.json");
    json elements = json::array();
    for (std::size_t i = (page - 1) * size; i < d->items.size() && i < page * size; ++i) {
      elements.push_back(d->render(d->items[i]));
    }
    doc["total"] = d->items.size();
    doc["count"] = elements.size();
    doc["pageSize"] = size;
    doc["offset"] = page;
    doc["_embedded"]["elements"] = elements;
    res.set_content(doc.dump(), "application/hal+json");
  });

  impl_->port = s.bind_to_any_port("127.0.0.1");
  impl_->thread = std::thread([d] { d->server.listen_after_bind(); });
  s.wait_until_ready();
}

OpenProjectStub::~OpenProjectStub() {
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

std::string OpenProjectStub::base_url() const {
  return "http://127.0.0.1:" + std::to_string(impl_->port) + "/api/v3";
}

void OpenProjectStub::fail_next(int count, int status) {
  std::lock_guard lock(impl_->mutex);
  impl_->fail_count = count;
  impl_->fail_status = status;
}

std::vector<OpenProjectStub::Item> OpenProjectStub::items() const {
  std::lock_guard lock(impl_->mutex);
  return impl_->items;
}

}  // namespace qfl::testing
