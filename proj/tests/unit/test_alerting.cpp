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


#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "qfl/alerting.hpp"
#include "qfl/workflow.hpp"
#include "test_support.hpp"

using namespace qfl;
using namespace qfl::alerting;
using qfl::testing::catch_error;
using qfl::testing::ts;
using nlohmann::json;

namespace {

model::Assessment at_value(const std::string& id, double value,
                           Timestamp t = qfl::testing::ts("2026-05-01T00:00:00Z")) {
  return {{id, model::AssessmentPoint{id, model::Layer::metric, t, value}}};
}

const Threshold kComplexity{"complexity", 0.80, Severity::warning, true};

}  // namespace

TEST_SUITE("alerting") {
  TEST_CASE("breach raises one open alert") {
    const auto out = check_thresholds(at_value("complexity", 0.70),
                                      std::vector{kComplexity}, {});
    REQUIRE(out.raised.size() == 1);
    CHECK(out.raised[0].element_id == "complexity");
    CHECK(out.raised[0].observed_value == 0.70);
    CHECK(out.raised[0].trigger_below == 0.80);
    CHECK(out.raised[0].state == AlertState::open);
    CHECK(out.resolved_ids.empty());
  }

  TEST_CASE("exactly at the threshold does not alert") {
    CHECK(check_thresholds(at_value("complexity", 0.80), std::vector{kComplexity}, {})
              .raised.empty());
    Threshold off = kComplexity;
    off.enabled = false;
    CHECK(check_thresholds(at_value("complexity", 0.0), std::vector{off}, {}).raised.empty());
  }

  TEST_CASE("unknown element") {
    CHECK(catch_error([] {
            check_thresholds(at_value("other", 0.5), std::vector{kComplexity}, {});
          }).code() == Errc::UnknownElement);
  }

  TEST_CASE("repeated breach is deduplicated while active") {
    AlertBook book;
    CHECK(book.check(at_value("complexity", 0.70), std::vector{kComplexity}).size() == 1);
    CHECK(book.check(at_value("complexity", 0.60), std::vector{kComplexity}).empty());
    book.acknowledge("AL-000001", ts("2026-05-02T00:00:00Z"));
    CHECK(book.check(at_value("complexity", 0.60), std::vector{kComplexity}).empty());
    CHECK(book.alerts().size() == 1);

    // A second threshold on the same element is a different pair.
    const Threshold critical{"complexity", 0.65, Severity::critical, true};
    CHECK(book.check(at_value("complexity", 0.60), std::vector{kComplexity, critical}).size() ==
          1);
  }

  TEST_CASE("lifecycle") {
    AlertBook book;
    book.check(at_value("complexity", 0.70), std::vector{kComplexity});
    CHECK(book.acknowledge("AL-000001", ts("2026-05-02T00:00:00Z")).state ==
          AlertState::acknowledged);
    CHECK(catch_error([&] { book.acknowledge("AL-000001", ts("2026-05-02T00:00:00Z")); })
              .code() == Errc::IllegalTransition);
    CHECK(book.resolve("AL-000001", ts("2026-05-03T00:00:00Z")).state == AlertState::resolved);
    CHECK(catch_error([&] { book.acknowledge("AL-000001", ts("2026-05-04T00:00:00Z")); })
              .code() == Errc::IllegalTransition);
    CHECK(catch_error([&] { book.resolve("AL-000001", ts("2026-05-04T00:00:00Z")); }).code() ==
          Errc::IllegalTransition);
    CHECK(catch_error([&] { book.acknowledge("AL-000404", ts("2026-05-04T00:00:00Z")); })
              .code() == Errc::UnknownAlert);

    // Open straight to resolved is legal as well.
    book.check(at_value("complexity", 0.70), std::vector{kComplexity});
    CHECK(book.resolve("AL-000002", ts("2026-05-05T00:00:00Z")).state == AlertState::resolved);
  }

  TEST_CASE("recovery auto-resolves") {
    AlertBook book;
    book.check(at_value("complexity", 0.70, ts("2026-05-01T00:00:00Z")),
               std::vector{kComplexity});
    const auto changed = book.check(at_value("complexity", 0.85, ts("2026-05-02T00:00:00Z")),
                                    std::vector{kComplexity});
    REQUIRE(changed.size() == 1);
    CHECK(changed[0].state == AlertState::resolved);
    CHECK(changed[0].resolved_at == ts("2026-05-02T00:00:00Z"));
    CHECK(book.with_state(AlertState::open).empty());
    CHECK(book.with_state(AlertState::resolved).size() == 1);
  }

  TEST_CASE("replay matches the dedup oracle") {
    auto rng = qfl::testing::make_rng();
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int round = 0; round < 2000; ++round) {
      const double threshold = std::round(u(rng) * 10) / 10;
      std::vector<qfl::testing::ReplayStep> steps;
      for (int i = 0; i < 10; ++i) {
        // Coarse grid so values land on the threshold now and then.
        steps.push_back({std::round(u(rng) * 10) / 10, rng() % 3 == 0});
      }
      const auto expected = qfl::testing::dedup_oracle(steps, threshold);

      const Threshold t{"x", threshold, Severity::warning, true};
      AlertBook book;
      std::vector<int> raised, resolved;
      auto at = ts("2026-01-01T00:00:00Z");
      for (int i = 0; i < 10; ++i) {
        at += std::chrono::hours(1);
        for (const auto& a : book.check(at_value("x", steps[i].value, at), std::vector{t})) {
          (a.state == AlertState::resolved ? resolved : raised).push_back(i);
          if (a.state == AlertState::open) REQUIRE(a.observed_value < a.trigger_below);
        }
        if (steps[i].acknowledge) {
          for (const auto& a : book.with_state(AlertState::open)) book.acknowledge(a.alert_id, at);
        }
        int active = 0;
        for (const auto& a : book.alerts()) active += a.active() ? 1 : 0;
        REQUIRE(active <= 1);
      }
      REQUIRE(raised == expected.raised_at);
      REQUIRE(resolved == expected.resolved_at);
    }
  }

  TEST_CASE("thresholds document") {
    // The shipped thresholds also cover the feedback-loop elements.
    const auto model = model::merge_models(
        model::load_model(qfl::testing::slurp(qfl::testing::data_dir() / "model.json")),
        workflow::feedback_loop_model());
    const auto ts_list = load_thresholds(
        qfl::testing::slurp(qfl::testing::data_dir() / "thresholds.json"), &model);
    CHECK_FALSE(ts_list.empty());
    const json again = thresholds_to_json(ts_list);
    CHECK(thresholds_from_json(again, &model) == ts_list);

    CHECK(catch_error([&] {
            thresholds_from_json(json::array({{{"element_id", "ghost"}, {"trigger_below", 0.5}}}),
                                 &model);
          }).code() == Errc::UnknownElement);
    CHECK(catch_error([] {
            thresholds_from_json(
                json::array({{{"element_id", "complexity"}, {"trigger_below", 1.5}}}));
          }).code() == Errc::ValueOutOfRange);
    CHECK(catch_error([] {
            thresholds_from_json(json::array(
                {{{"element_id", "x"}, {"trigger_below", 0.5}, {"severity", "fatal"}}}));
          }).code() == Errc::SchemaError);
  }

  TEST_CASE("alert json round trip") {
    Alert a{"AL-000003", "complexity", 0.7, 0.8, Severity::critical,
            ts("2026-05-01T00:00:00Z"), AlertState::resolved, ts("2026-05-02T00:00:00Z")};
    const json j = a;
    CHECK(j["state"] == "resolved");
    CHECK(j.get<Alert>() == a);
  }
}
