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

// In-process HTTP stand-in for an OpenProject v3 work-package endpoint.
// Response bodies are filled into recorded documents from recordings/, so
// the client is exercised against the upstream shape rather than against
// our own serializer.

#include <atomic>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

namespace qfl::testing {

class OpenProjectStub {
 public:
  struct Item {
    long long id = 0;
    std::string subject;
    std::string type;
    std::string status = "New";
    std::string description;
    std::optional<long long> parent;
    std::string external_key;
  };

  /// `recordings` is the directory holding the recorded documents.
  explicit OpenProjectStub(std::string recordings, std::string token = {});
  ~OpenProjectStub();

  /// http://127.0.0.1:<port>/api/v3
  std::string base_url() const;

  /// The next `count` requests fail with `status` before reaching the state.
  void fail_next(int count, int status = 503);
  int requests() const { return requests_.load(); }
  std::vector<Item> items() const;
  void set_page_size_cap(std::size_t cap) { page_cap_ = cap; }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  std::atomic<int> requests_{0};
  std::size_t page_cap_ = 1000;
};

}  // namespace qfl::testing
