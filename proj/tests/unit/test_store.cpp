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


#include <atomic>
#include <chrono>
#include <sstream>
#include <thread>

#include "doctest.h"
#include "qfl/store.hpp"
#include "test_support.hpp"

using namespace qfl;
using namespace qfl::store;
using model::AssessmentPoint;
using model::Layer;
using model::Provenance;
using qfl::testing::catch_error;
using qfl::testing::TempDir;
using qfl::testing::ts;
using nlohmann::json;

namespace {

StoreOptions fast() { return {8u << 20, false}; }

AssessmentPoint point(const std::string& id, const char* at, double v) {
  return {id, Layer::metric, ts(at), v, Provenance::observed};
}

std::filesystem::path only_segment(const std::filesystem::path& dir) {
  return dir / "segment-000001.qfl";
}

}  // namespace

TEST_SUITE("store") {
  TEST_CASE("append then query returns the points in order") {
    TempDir dir;
    Store s(dir.path(), fast());
    const std::vector<AssessmentPoint> pts{point("m", "2026-05-01T00:00:00Z", 0.1),
                                           point("m", "2026-05-02T00:00:00Z", 0.2),
                                           point("m", "2026-05-03T00:00:00Z", 0.3)};
    s.append_assessment(pts);
    const auto all = s.query_range("m", kMinTimestamp, kMaxTimestamp);
    CHECK(all.element_id == "m");
    CHECK(all.points == pts);

    s.append_assessment({});
    CHECK(s.query_range("m", kMinTimestamp, kMaxTimestamp).points.size() == 3);

    CHECK(s.query_range("m", ts("2027-01-01T00:00:00Z"), ts("2027-02-01T00:00:00Z"))
              .points.empty());
    const auto exact = s.query_range("m", ts("2026-05-02T00:00:00Z"), ts("2026-05-02T00:00:00Z"));
    REQUIRE(exact.points.size() == 1);
    CHECK(exact.points[0].value == 0.2);
    CHECK(s.latest("m")->value == 0.3);
  }

  TEST_CASE("ordering rules") {
    TempDir dir;
    Store s(dir.path(), fast());
    s.append_assessment(std::vector{point("m", "2026-05-02T00:00:00Z", 0.5)});
    CHECK(catch_error([&] {
            s.append_assessment(std::vector{point("m", "2026-05-01T00:00:00Z", 0.5)});
          }).code() == Errc::OutOfOrderTimestamp);
    // Equal timestamps are rejected too: series are strictly increasing.
    CHECK(catch_error([&] {
            s.append_assessment(std::vector{point("m", "2026-05-02T00:00:00Z", 0.5)});
          }).code() == Errc::OutOfOrderTimestamp);
    // A failing batch writes nothing.
    CHECK(catch_error([&] {
            s.append_assessment(std::vector{point("n", "2026-05-09T00:00:00Z", 0.5),
                                            point("m", "2026-04-01T00:00:00Z", 0.5)});
          }).code() == Errc::OutOfOrderTimestamp);
    CHECK_FALSE(s.latest("n").has_value());
    CHECK(catch_error([&] {
            s.append_assessment(std::vector{point("m", "2026-06-01T00:00:00Z", 1.5)});
          }).code() == Errc::ValueOutOfRange);
  }

  TEST_CASE("unknown and declared elements") {
    TempDir dir;
    Store s(dir.path(), fast());
    CHECK(catch_error([&] { s.query_range("ghost", kMinTimestamp, kMaxTimestamp); }).code() ==
          Errc::UnknownElement);
    const std::vector<std::string> ids{"declared"};
    s.declare_elements(ids);
    CHECK(s.query_range("declared", kMinTimestamp, kMaxTimestamp).points.empty());
  }

  TEST_CASE("restart replays everything bit for bit") {
    TempDir dir;
    const double awkward = 0.1 + 0.2;
    {
      Store s(dir.path(), fast());
      s.append_assessment(std::vector{point("m", "2026-05-01T00:00:00.000001Z", awkward)});
      s.record_event({"", EventKind::qr_added, "QR-000001", ts("2026-05-01T00:00:00Z"), ""});
      s.put_document(DocumentKind::qr, "QR-000001", {{"state", "Suggested"}});
      s.put_document(DocumentKind::qr, "QR-000001", {{"state", "AcceptedByQE"}});
    }
    Store s(dir.path(), fast());
    const auto p = s.latest("m");
    REQUIRE(p.has_value());
    CHECK(p->value == awkward);
    CHECK(p->timestamp == ts("2026-05-01T00:00:00.000001Z"));
    REQUIRE(s.list_events().size() == 1);
    CHECK(s.list_events()[0].event_id == "EV-000001");
    CHECK(s.get_document(DocumentKind::qr, "QR-000001")->at("state") == "AcceptedByQE");
    CHECK(s.documents(DocumentKind::qr).size() == 1);
    CHECK_FALSE(s.get_document(DocumentKind::alert, "QR-000001").has_value());
    // Appends continue after the replayed tail.
    s.append_assessment(std::vector{point("m", "2026-05-02T00:00:00Z", 0.4)});
    CHECK(s.query_range("m", kMinTimestamp, kMaxTimestamp).points.size() == 2);
  }

  TEST_CASE("segment header") {
    TempDir dir;
    { Store s(dir.path(), fast()); }
    const std::string bytes = qfl::testing::slurp(only_segment(dir.path()));
    REQUIRE(bytes.size() == 5);
    CHECK(bytes.substr(0, 4) == "QFL1");
    CHECK(bytes[4] == 1);
  }

  TEST_CASE("torn tail is discarded on open") {
    TempDir dir;
    {
      Store s(dir.path(), fast());
      s.append_assessment(std::vector{point("m", "2026-05-01T00:00:00Z", 0.1)});
      s.append_assessment(std::vector{point("m", "2026-05-02T00:00:00Z", 0.2)});
    }
    const auto seg = only_segment(dir.path());
    std::filesystem::resize_file(seg, std::filesystem::file_size(seg) - 3);
    {
      Store s(dir.path(), fast());
      CHECK(s.query_range("m", kMinTimestamp, kMaxTimestamp).points.size() == 1);
      s.append_assessment(std::vector{point("m", "2026-05-03T00:00:00Z", 0.3)});
    }
    Store s(dir.path(), fast());
    const auto pts = s.query_range("m", kMinTimestamp, kMaxTimestamp).points;
    REQUIRE(pts.size() == 2);
    CHECK(pts[1].value == 0.3);
  }

  TEST_CASE("corruption in a sealed segment is a storage failure") {
    TempDir dir;
    {
      Store s(dir.path(), {256, false});
      for (int day = 1; day <= 20; ++day) {
        char at[32];
        std::snprintf(at, sizeof at, "2026-05-%02dT00:00:00Z", day);
        s.append_assessment(std::vector{point("metric-with-a-long-name", at, 0.5)});
      }
      CHECK(s.segment_count() > 1);
    }
    {
      Store s(dir.path(), fast());
      CHECK(s.query_range("metric-with-a-long-name", kMinTimestamp, kMaxTimestamp)
                .points.size() == 20);
    }
    std::string bytes = qfl::testing::slurp(only_segment(dir.path()));
    bytes[bytes.size() - 2] ^= 0x5a;
    qfl::testing::spit(only_segment(dir.path()), bytes);
    CHECK(catch_error([&] { Store s(dir.path(), fast()); }).code() == Errc::StorageFailure);

    qfl::testing::spit(only_segment(dir.path()), "XXXX\x01");
    CHECK(catch_error([&] { Store s(dir.path(), fast()); }).code() == Errc::StorageFailure);
  }

  TEST_CASE("events") {
    TempDir dir;
    Store s(dir.path(), fast());
    const auto e = catch_error([&] {
      s.record_event({"", EventKind::qr_rejected_pm, "QR-1", ts("2026-05-01T00:00:00Z"), ""});
    });
    CHECK(e.code() == Errc::MissingRationale);
    CHECK(catch_error([&] {
            s.record_event({"", EventKind::qr_rejected_qe, "QR-1", ts("2026-05-01T00:00:00Z"),
                            ""});
          }).code() == Errc::MissingRationale);
    CHECK(s.list_events().empty());

    const DecisionEvent added{"", EventKind::qr_added, "QR-1", ts("2026-05-02T00:00:00Z"), ""};
    const auto stored = s.record_event(added);
    CHECK(stored.event_id == "EV-000001");
    s.record_event({"", EventKind::qr_rejected_pm, "QR-2", ts("2026-05-03T00:00:00Z"),
                    "out of budget"});
    s.record_event({"", EventKind::qr_postponed, "QR-1", ts("2026-05-04T00:00:00Z"), ""});

    const auto listed = s.list_events();
    REQUIRE(listed.size() == 3);
    CHECK(listed[0] == stored);

    const auto only_one = s.list_events({kMinTimestamp, kMaxTimestamp, "QR-1"});
    CHECK(only_one.size() == 2);
    for (const auto& ev : only_one) CHECK(ev.subject_id == "QR-1");
    CHECK(s.list_events({ts("2026-05-03T00:00:00Z"), ts("2026-05-03T00:00:00Z"), {}}).size() ==
          1);

    const json j = listed[1];
    CHECK(j["kind"] == "qr_rejected_pm");
    CHECK(j.get<DecisionEvent>() == listed[1]);
    CHECK(catch_error([] { parse_event_kind("qr_vanished"); }).code() == Errc::SchemaError);
  }

  TEST_CASE("step around a qr_added event") {
    TempDir dir;
    Store s(dir.path(), fast());
    s.append_assessment(std::vector{point("passed", "2026-06-01T00:00:00Z", 0.75)});
    s.record_event({"", EventKind::qr_added, "QR-000001", ts("2026-06-15T00:00:00Z"), ""});
    s.append_assessment(std::vector{point("passed", "2026-07-01T00:00:00Z", 0.95)});

    const auto range = std::pair{ts("2026-05-01T00:00:00Z"), ts("2026-08-01T00:00:00Z")};
    const auto series = s.query_range("passed", range.first, range.second);
    const auto events = s.list_events({range.first, range.second, {}});
    REQUIRE(series.points.size() == 2);
    REQUIRE(events.size() == 1);
    CHECK(series.points[0].timestamp < events[0].timestamp);
    CHECK(events[0].timestamp < series.points[1].timestamp);
    CHECK(series.points[1].value - series.points[0].value == doctest::Approx(0.20).epsilon(1e-12));
  }

  TEST_CASE("csv export") {
    TempDir dir;
    Store s(dir.path(), fast());
    s.append_assessment(std::vector{
        AssessmentPoint{"a,b", Layer::factor, ts("2026-05-01T00:00:00Z"), 0.5,
                        Provenance::whatif},
        point("m", "2026-05-01T00:00:00Z", 0.25)});
    std::ostringstream out;
    s.export_csv(out);
    CHECK(out.str() ==
          "element_id,timestamp,value,provenance\n"
          "\"a,b\",2026-05-01T00:00:00Z,0.5,whatif\n"
          "m,2026-05-01T00:00:00Z,0.25,observed\n");
  }

  TEST_CASE("readers never see half a batch") {
    TempDir dir;
    Store s(dir.path(), fast());
    const std::vector<std::string> ids{"a", "b"};
    s.declare_elements(ids);
    std::atomic<bool> done{false};
    std::atomic<int> torn{0};
    std::thread reader([&] {
      while (!done) {
        const auto a = s.query_range("a", kMinTimestamp, kMaxTimestamp).points.size();
        const auto b = s.query_range("b", kMinTimestamp, kMaxTimestamp).points.size();
        // b is read after a, so it can only be ahead.
        if (b < a) ++torn;
      }
    });
    auto t = ts("2026-01-01T00:00:00Z");
    for (int i = 0; i < 300; ++i) {
      t += std::chrono::minutes(1);
      s.append_assessment(std::vector{AssessmentPoint{"a", Layer::metric, t, 0.5},
                                      AssessmentPoint{"b", Layer::metric, t, 0.5}});
    }
    done = true;
    reader.join();
    CHECK(torn == 0);
  }
}
