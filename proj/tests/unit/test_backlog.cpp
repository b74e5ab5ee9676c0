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


#include <functional>

#include "doctest.h"
#include "openproject_stub.hpp"
#include "qfl/backlog.hpp"
#include "test_support.hpp"

using namespace qfl;
using namespace qfl::backlog;
using qfl::testing::catch_error;
using qfl::testing::OpenProjectStub;
using qfl::testing::recordings_dir;
using qfl::testing::TempDir;
using nlohmann::json;

namespace {

HttpOptions quick(const std::string& url, const std::string& token = {}) {
  HttpOptions o;
  o.base_url = url;
  o.token = token;
  o.max_attempts = 4;
  o.initial_backoff = std::chrono::milliseconds(1);
  o.timeout = std::chrono::seconds(5);
  return o;
}

CreateRequest qr_request(const std::string& key = "QR-000001") {
  return {"Ratio of non-complex files should be at least 95", std::string(kQualityRequirementType),
          "Raised from alert AL-000001", std::nullopt, key};
}

/// Behaviour every backlog client must share.
void check_contract(BacklogClient& client) {
  const auto qr = client.create_work_package(qr_request());
  CHECK_FALSE(qr.wp_id.empty());
  CHECK(qr.subject == "Ratio of non-complex files should be at least 95");
  CHECK(qr.type_name == kQualityRequirementType);
  CHECK(qr.status == "New");
  CHECK_FALSE(qr.parent_id.has_value());

  // Same key and payload: the original comes back, nothing new is created.
  CHECK(client.create_work_package(qr_request()).wp_id == qr.wp_id);
  CHECK(client.fetch_all().size() == 1);

  auto different = qr_request();
  different.subject = "something else";
  CHECK(catch_error([&] { client.create_work_package(different); }).code() ==
        Errc::ConflictError);

  CreateRequest task{"Split the parser", std::string(kTaskType), "", qr.wp_id,
                     "QR-000001:Split the parser"};
  const auto child = client.create_work_package(task);
  CHECK(child.parent_id == qr.wp_id);
  CHECK(child.wp_id != qr.wp_id);

  task.parent_id = "999999";
  task.external_key = "QR-000001:orphan";
  CHECK(catch_error([&] { client.create_work_package(task); }).code() == Errc::UnknownParent);

  CreateRequest blank{"", std::string(kTaskType), "", std::nullopt, "blank"};
  CHECK(catch_error([&] { client.create_work_package(blank); }).code() == Errc::ValidationError);

  CHECK(client.set_status(child.wp_id, "Closed").status == "Closed");
  CHECK(catch_error([&] { client.set_status(child.wp_id, "Exploded"); }).code() ==
        Errc::UnknownStatus);
  CHECK(catch_error([&] { client.set_status("999999", "Closed"); }).code() ==
        Errc::UnknownWorkPackage);

  const auto all = client.fetch_all();
  REQUIRE(all.size() == 2);
  CHECK(all[0].wp_id == qr.wp_id);
  CHECK(all[1].status == "Closed");
  CHECK(all[1].parent_id == qr.wp_id);
}

}  // namespace

TEST_SUITE("backlog") {
  TEST_CASE("file backlog honours the contract") {
    TempDir dir;
    FileBacklog client(dir / "backlog.jsonl");
    check_contract(client);
  }

  TEST_CASE("http backlog honours the contract") {
    OpenProjectStub stub(recordings_dir().string(), "s3cret");
    HttpBacklog client(quick(stub.base_url(), "s3cret"));
    check_contract(client);
  }

  TEST_CASE("file backlog replays on open") {
    TempDir dir;
    std::string parent;
    {
      FileBacklog client(dir / "backlog.jsonl");
      parent = client.create_work_package(qr_request()).wp_id;
      client.create_work_package({"t", std::string(kTaskType), "", parent, "k"});
      client.set_status(parent, "Closed");
    }
    FileBacklog again(dir / "backlog.jsonl");
    const auto all = again.fetch_all();
    REQUIRE(all.size() == 2);
    CHECK(all[0].status == "Closed");
    CHECK(again.create_work_package(qr_request()).wp_id == parent);
    CHECK(again.create_work_package({"u", std::string(kTaskType), "", parent, "k2"}).wp_id ==
          "3");
  }

  TEST_CASE("file backlog handles share one file") {
    TempDir dir;
    FileBacklog a(dir / "backlog.jsonl");
    FileBacklog b(dir / "backlog.jsonl");
    const auto qr = a.create_work_package(qr_request());
    REQUIRE(b.fetch_all().size() == 1);
    b.set_status(qr.wp_id, "Closed");
    CHECK(a.fetch_all()[0].status == "Closed");
    CHECK(b.create_work_package({"t", std::string(kTaskType), "", qr.wp_id, "k"}).wp_id == "2");
    CHECK(a.create_work_package({"u", std::string(kTaskType), "", qr.wp_id, "k2"}).wp_id == "3");
    CHECK(a.fetch_all() == b.fetch_all());
  }

  TEST_CASE("file backlog torn tail") {
    TempDir dir;
    {
      FileBacklog client(dir / "backlog.jsonl");
      client.create_work_package(qr_request());
    }
    qfl::testing::spit(dir / "backlog.jsonl",
                       qfl::testing::slurp(dir / "backlog.jsonl") + R"({"op":"crea)");
    FileBacklog again(dir / "backlog.jsonl");
    CHECK(again.fetch_all().size() == 1);
    again.create_work_package({"t", std::string(kTaskType), "", "1", "k"});
    CHECK(FileBacklog(dir / "backlog.jsonl").fetch_all().size() == 2);

    qfl::testing::spit(dir / "backlog.jsonl", "not json\n");
    CHECK(catch_error([&] { FileBacklog(dir / "backlog.jsonl"); }).code() ==
          Errc::StorageFailure);
  }

  TEST_CASE("file backlog outage") {
    TempDir dir;
    FileBacklog client(dir / "backlog.jsonl");
    client.set_available(false);
    CHECK(catch_error([&] { client.create_work_package(qr_request()); }).code() ==
          Errc::RemoteError);
    CHECK(catch_error([&] { client.fetch_all(); }).code() == Errc::RemoteError);
    client.set_available(true);
    CHECK(client.fetch_all().empty());
  }

  TEST_CASE("transient failures are retried") {
    OpenProjectStub stub(recordings_dir().string());
    HttpBacklog client(quick(stub.base_url()));
    stub.fail_next(2, 503);
    const auto wp = client.create_work_package(qr_request());
    CHECK(wp.wp_id == "133");
    CHECK(client.attempts_made() == 3);
    CHECK(stub.items().size() == 1);

    stub.fail_next(1, 429);
    CHECK(client.fetch_all().size() == 1);
    CHECK(client.attempts_made() == 5);
  }

  TEST_CASE("retries give up after the attempt budget") {
    OpenProjectStub stub(recordings_dir().string());
    HttpBacklog client(quick(stub.base_url()));
    stub.fail_next(10, 502);
    const auto e = catch_error([&] { client.create_work_package(qr_request()); });
    CHECK(e.code() == Errc::RemoteError);
    CHECK(e.details()["http_status"] == 502);
    CHECK(e.details()["retryable"] == true);
    CHECK(client.attempts_made() == 4);
    CHECK(stub.items().empty());
  }

  TEST_CASE("client errors are not retried") {
    OpenProjectStub stub(recordings_dir().string(), "right");
    HttpBacklog client(quick(stub.base_url(), "wrong"));
    const auto e = catch_error([&] { client.fetch_all(); });
    CHECK(e.code() == Errc::RemoteError);
    CHECK(e.details()["http_status"] == 401);
    CHECK(client.attempts_made() == 1);
  }

  TEST_CASE("unreachable service") {
    HttpOptions o = quick("http://127.0.0.1:1/api/v3");
    o.max_attempts = 2;
    HttpBacklog client(o);
    const auto e = catch_error([&] { client.fetch_all(); });
    CHECK(e.code() == Errc::RemoteError);
    CHECK(client.attempts_made() == 2);
  }

  TEST_CASE("paging collects every work package") {
    OpenProjectStub stub(recordings_dir().string());
    stub.set_page_size_cap(7);
    HttpBacklog client(quick(stub.base_url()));
    for (int i = 0; i < 23; ++i) {
      client.create_work_package({"item " + std::to_string(i), std::string(kTaskType), "",
                                  std::nullopt, "key-" + std::to_string(i)});
    }
    const auto all = client.fetch_all();
    REQUIRE(all.size() == 23);
    for (int i = 0; i < 23; ++i) CHECK(all[i].subject == "item " + std::to_string(i));
  }

  TEST_CASE("recorded work package parses") {
    const auto wp = wire::parse_work_package(
        json::parse(qfl::testing::slurp(recordings_dir() / "work_package.json")));
    CHECK(wp.wp_id == "133");
    CHECK_FALSE(wp.subject.empty());
    CHECK_FALSE(wp.type_name.empty());
    CHECK_FALSE(wp.status.empty());
  }

  TEST_CASE("wire mapping round trips") {
    CreateRequest r{"s", "Task", "d", std::string("12"), "k"};
    CHECK(wire::parse_create_body(wire::create_body(r)) == r);
    CHECK(wire::parse_status_body(wire::status_body("Closed")) == "Closed");
    WorkPackage wp{"5", "s", "Task", "In progress", "d", std::string("4"), "k"};
    CHECK(wire::parse_work_package(wire::work_package_body(wp)) == wp);
    CHECK(wire::href_tail("/api/v3/work_packages/17") == "17");
  }

  TEST_CASE("client factory") {
    TempDir dir;
    CHECK(dynamic_cast<FileBacklog*>(make_client("file:b.jsonl", "", dir.path()).get()));
    CHECK(dynamic_cast<HttpBacklog*>(make_client("http://localhost:1/api/v3", "", {}).get()));
    CHECK(catch_error([] { make_client("ftp://x", "", {}); }).code() == Errc::ConfigError);
  }

  TEST_CASE("backlog mirror as a snapshot") {
    std::vector<WorkPackage> items{{"1", "qr", "QualityRequirement", "New", "", {}, "QR-1"},
                                   {"2", "t", "Task", "Closed", "", std::string("1"), "QR-1:t"}};
    const auto snap = to_snapshot(items, "openproject", qfl::testing::ts("2026-05-01T00:00:00Z"));
    CHECK(snap.kind == SourceKind::backlog);
    REQUIRE(snap.records.size() == 2);
    CHECK(snap.records[1].text("parent_id") == "1");
    // The mirror passes snapshot validation.
    CHECK(ingest::snapshot_from_json(ingest::snapshot_to_json(snap)) == snap);
  }
}
