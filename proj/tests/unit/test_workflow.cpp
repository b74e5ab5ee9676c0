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
#include "openproject_stub.hpp"
#include "oracles.hpp"
#include "qfl/workflow.hpp"
#include "test_support.hpp"

using namespace qfl;
using namespace qfl::workflow;
using qfl::testing::catch_error;
using qfl::testing::data_dir;
using qfl::testing::slurp;
using qfl::testing::TempDir;
using qfl::testing::ts;
using nlohmann::json;

namespace {

struct Fixture {
  model::QualityModel model = model::load_model(slurp(data_dir() / "model.json"));
  catalogue::Catalogue catalogue = catalogue::load_catalogue(slurp(data_dir() / "catalogue.json"));
};

const Fixture& shipped() {
  static const Fixture f;
  return f;
}

alerting::Alert alert_on(const std::string& element, const std::string& id = "AL-000001") {
  alerting::Alert a;
  a.alert_id = id;
  a.element_id = element;
  a.observed_value = 0.4;
  a.trigger_below = 0.5;
  a.raised_at = ts("2026-06-01T00:00:00Z");
  return a;
}

Clock ticking() {
  auto t = std::make_shared<Timestamp>(ts("2026-06-01T00:00:00Z"));
  return [t] { return *t += std::chrono::seconds(1); };
}

struct Harness {
  backlog::BacklogClient& backlog;
  MemoryJournal journal;
  Workflow flow;

  explicit Harness(backlog::BacklogClient& client, QflOptions options = {})
      : backlog(client),
        flow(shipped().model, shipped().catalogue, client, journal, options, ticking()) {}

  std::string exported_bug_qr(const std::string& alert = "AL-000001") {
    const auto qr = flow.suggest_qr(alert_on("closed_bug_ratio", alert), "Open bugs",
                                    {{"value", 5.0}});
    flow.qe_decide(qr.qr_id, QeDecision::accept);
    flow.export_qr(qr.qr_id);
    return qr.qr_id;
  }

  ingest::SourceSnapshot mirror() {
    return backlog::to_snapshot(backlog.fetch_all(), "openproject",
                                ts("2026-07-01T00:00:00Z"));
  }
};

const backlog::WorkPackage& wp(const std::vector<backlog::WorkPackage>& all,
                               const std::string& id) {
  for (const auto& w : all) {
    if (w.wp_id == id) return w;
  }
  FAIL("no work package " << id);
  throw std::logic_error("unreachable");
}

/// Workflow examples, run once per backlog implementation.
void check_examples(backlog::BacklogClient& client) {
  Harness h(client);

  const auto bug = h.flow.suggest_qr(alert_on("closed_bug_ratio"), "Open bugs", {{"value", 5.0}});
  CHECK(bug.text == "Ratio of open issues of type bug should be below 5%");
  CHECK(bug.state == QRState::Suggested);
  CHECK(bug.qr_id == "QR-000001");
  CHECK(h.journal.events().back().kind == store::EventKind::qr_added);
  CHECK(h.flow.suggest_qr(alert_on("closed_bug_ratio"), "Open bugs", {{"value", 5.0}}).qr_id ==
        bug.qr_id);

  const auto tests = h.flow.suggest_qr(alert_on("passed_tests_percentage", "AL-000002"),
                                       "Passed tests", {{"value", 0.95}});
  CHECK(tests.text == "The percentage of passed automatic tests should be at least 0.95");

  CHECK(catch_error([&] {
          h.flow.suggest_qr(alert_on("closed_bug_ratio"), "Complex files", {{"value", 90.0}});
        }).code() == Errc::PatternNotApplicable);
  CHECK(catch_error([&] {
          h.flow.suggest_qr(alert_on("complexity", "AL-000003"), "Complex files",
                            {{"value", 101.0}});
        }).code() == Errc::ParamOutOfRange);

  // Quality engineer stage.
  CHECK(catch_error([&] { h.flow.qe_decide(bug.qr_id, QeDecision::reject); }).code() ==
        Errc::MissingRationale);
  CHECK(catch_error([&] { h.flow.qe_decide(bug.qr_id, QeDecision::reject, "   "); }).code() ==
        Errc::MissingRationale);
  CHECK(h.flow.get(bug.qr_id).state == QRState::Suggested);
  CHECK(h.flow.qe_decide(bug.qr_id, QeDecision::accept).state == QRState::AcceptedByQE);
  CHECK(h.flow.qe_decide(tests.qr_id, QeDecision::accept).state == QRState::AcceptedByQE);

  // Export.
  const auto exported = h.flow.export_qr(bug.qr_id);
  CHECK(exported.state == QRState::Exported);
  REQUIRE(exported.backlog_ref.has_value());
  auto all = client.fetch_all();
  CHECK(all.size() == 1);
  CHECK(wp(all, *exported.backlog_ref).subject == bug.text);
  CHECK(wp(all, *exported.backlog_ref).type_name == "QualityRequirement");
  CHECK(wp(all, *exported.backlog_ref).status == "New");
  CHECK(h.flow.export_qr(bug.qr_id) == exported);
  CHECK(client.fetch_all().size() == 1);
  CHECK(catch_error([&] { h.flow.qe_decide(bug.qr_id, QeDecision::accept); }).code() ==
        Errc::IllegalTransition);

  // Project manager stage.
  CHECK(catch_error([&] { h.flow.derive_task(bug.qr_id, "too early"); }).code() ==
        Errc::IllegalTransition);
  CHECK(h.flow.pm_decide(bug.qr_id, PmDecision::postpone).state == QRState::Postponed);
  CHECK(h.flow.pm_decide(bug.qr_id, PmDecision::accept).state == QRState::AcceptedByPM);

  const auto tests_wp = *h.flow.export_qr(tests.qr_id).backlog_ref;
  CHECK(h.flow.pm_decide(tests.qr_id, PmDecision::accept).state == QRState::AcceptedByPM);

  // Derivation, with parent links.
  const auto t136 =
      h.flow.derive_task(bug.qr_id, "Initiate a bug fix session adressing Archimate Issues");
  const auto t138 =
      h.flow.derive_task(tests.qr_id, "Review the validation process of Modelio components");
  const auto t156 = h.flow.derive_task(tests.qr_id, "Refactor and evaluate validation process");
  CHECK(h.flow.derive_task(tests.qr_id, "Refactor and evaluate validation process") == t156);
  all = client.fetch_all();
  CHECK(wp(all, t136).parent_id == exported.backlog_ref);
  CHECK(wp(all, t138).parent_id == tests_wp);
  CHECK(wp(all, t156).parent_id == tests_wp);
  CHECK(h.flow.get(tests.qr_id).derived_tasks.size() == 2);
  CHECK(h.flow.get(tests.qr_id).state == QRState::Derived);

  // Completion tracking.
  client.set_status(t136, "Closed");
  client.set_status(t138, "Closed");
  client.set_status(t156, "In progress");
  auto changed = h.flow.sync_completion(h.mirror());
  CHECK(h.flow.get(bug.qr_id).state == QRState::Completed);
  CHECK(h.flow.get(tests.qr_id).state == QRState::Derived);
  CHECK(changed.size() == 2);
  CHECK(h.flow.metrics().mitigation_task_completion == doctest::Approx(2.0 / 3.0));

  client.set_status(t156, "Closed");
  h.flow.sync_completion(h.mirror());
  CHECK(h.flow.get(tests.qr_id).state == QRState::Completed);
  CHECK(h.flow.sync_completion(h.mirror()).empty());
  CHECK(h.flow.metrics().mitigation_task_completion == 1.0);

  // Rejection by the project manager mirrors into the backlog.
  const auto third = h.exported_bug_qr("AL-000009");
  CHECK(catch_error([&] { h.flow.pm_decide(third, PmDecision::reject); }).code() ==
        Errc::MissingRationale);
  CHECK(h.flow.pm_decide(third, PmDecision::reject, "covered by the release plan").state ==
        QRState::RejectedByPM);
  CHECK(wp(client.fetch_all(), *h.flow.get(third).backlog_ref).status == "Rejected");
  CHECK(h.journal.events().back().kind == store::EventKind::qr_rejected_pm);
  CHECK(h.journal.events().back().rationale == "covered by the release plan");

  // Every exported QR resolves in the backlog, every task hangs off its QR.
  all = client.fetch_all();
  for (const auto& qr : h.flow.list()) {
    if (!is_exported(qr.state)) continue;
    CHECK(qr.backlog_ref.has_value());
    wp(all, *qr.backlog_ref);
    for (const auto& t : qr.derived_tasks) CHECK(wp(all, t.wp_id).parent_id == qr.backlog_ref);
  }
  // Saved records mirror the live ones.
  for (const auto& qr : h.flow.list()) CHECK(h.journal.saved().at(qr.qr_id) == qr);
}

QualityRequirement qr_in(QRState state, std::vector<std::string> task_statuses = {}) {
  QualityRequirement qr;
  qr.state = state;
  for (std::size_t i = 0; i < task_statuses.size(); ++i) {
    qr.derived_tasks.push_back({std::to_string(i), "t", task_statuses[i]});
  }
  return qr;
}

}  // namespace

TEST_SUITE("workflow") {
  TEST_CASE("state machine arrows") {
    const auto& arrows = qfl::testing::qr_arrows();
    for (int a = 0; a <= static_cast<int>(QRState::Completed); ++a) {
      for (int b = 0; b <= static_cast<int>(QRState::Completed); ++b) {
        const auto from = static_cast<QRState>(a), to = static_cast<QRState>(b);
        CHECK(transition_allowed(from, to) ==
              arrows.contains({std::string(to_string(from)), std::string(to_string(to))}));
      }
      CHECK(parse_qr_state(to_string(static_cast<QRState>(a))) == static_cast<QRState>(a));
    }
    CHECK(is_terminal(QRState::RejectedByQE));
    CHECK(is_terminal(QRState::RejectedByPM));
    CHECK(is_terminal(QRState::Completed));
    CHECK_FALSE(is_terminal(QRState::Postponed));
  }

  TEST_CASE("examples against the file backlog") {
    TempDir dir;
    backlog::FileBacklog client(dir / "backlog.jsonl");
    check_examples(client);
  }

  TEST_CASE("examples against the http backlog") {
    qfl::testing::OpenProjectStub stub(qfl::testing::recordings_dir().string());
    backlog::HttpOptions o;
    o.base_url = stub.base_url();
    o.initial_backoff = std::chrono::milliseconds(1);
    backlog::HttpBacklog client(o);
    check_examples(client);
  }

  TEST_CASE("backlog outage leaves the QR untouched") {
    TempDir dir;
    backlog::FileBacklog client(dir / "backlog.jsonl");
    Harness h(client);
    const auto qr = h.flow.suggest_qr(alert_on("closed_bug_ratio"), "Open bugs", {{"value", 5.0}});
    h.flow.qe_decide(qr.qr_id, QeDecision::accept);
    const auto events = h.journal.events().size();
    client.set_available(false);
    CHECK(catch_error([&] { h.flow.export_qr(qr.qr_id); }).code() == Errc::BacklogUnavailable);
    CHECK(h.flow.get(qr.qr_id).state == QRState::AcceptedByQE);
    CHECK_FALSE(h.flow.get(qr.qr_id).backlog_ref.has_value());
    CHECK(h.journal.events().size() == events);
    client.set_available(true);
    CHECK(h.flow.export_qr(qr.qr_id).state == QRState::Exported);
    CHECK(client.fetch_all().size() == 1);
  }

  TEST_CASE("export after a failed attempt creates a single work package") {
    qfl::testing::OpenProjectStub stub(qfl::testing::recordings_dir().string());
    backlog::HttpOptions o;
    o.base_url = stub.base_url();
    o.initial_backoff = std::chrono::milliseconds(1);
    o.max_attempts = 1;
    backlog::HttpBacklog client(o);
    Harness h(client);
    const auto qr = h.flow.suggest_qr(alert_on("closed_bug_ratio"), "Open bugs", {{"value", 5.0}});
    h.flow.qe_decide(qr.qr_id, QeDecision::accept);
    stub.fail_next(1, 503);
    CHECK(catch_error([&] { h.flow.export_qr(qr.qr_id); }).code() == Errc::BacklogUnavailable);
    CHECK(h.flow.export_qr(qr.qr_id).state == QRState::Exported);
    CHECK(stub.items().size() == 1);
  }

  TEST_CASE("sync edge cases") {
    TempDir dir;
    backlog::FileBacklog client(dir / "backlog.jsonl");
    Harness h(client);
    const auto id = h.exported_bug_qr();
    // No derived tasks: nothing changes.
    CHECK(h.flow.sync_completion(h.mirror()).empty());
    h.flow.pm_decide(id, PmDecision::accept);
    const auto task = h.flow.derive_task(id, "fix");
    // Unknown children and missing tasks are ignored.
    const auto parent = *h.flow.get(id).backlog_ref;
    client.create_work_package({"stray", "Task", "", parent, "stray"});
    auto snap = h.mirror();
    std::erase_if(snap.records, [&](const Record& r) { return r.text("id") == task; });
    CHECK(h.flow.sync_completion(snap).empty());
    CHECK(h.flow.get(id).state == QRState::Derived);

    snap.kind = SourceKind::static_analysis;
    CHECK(catch_error([&] { h.flow.sync_completion(snap); }).code() == Errc::ValidationError);
  }

  TEST_CASE("unknown QR") {
    TempDir dir;
    backlog::FileBacklog client(dir / "backlog.jsonl");
    Harness h(client);
    CHECK(catch_error([&] { h.flow.get("QR-404"); }).code() == Errc::UnknownQR);
    CHECK(catch_error([&] { h.flow.export_qr("QR-404"); }).code() == Errc::UnknownQR);
  }

  TEST_CASE("random operation sequences follow the arrows") {
    auto rng = qfl::testing::make_rng();
    const auto& arrows = qfl::testing::qr_arrows();
    TempDir dir;
    backlog::FileBacklog client(dir / "backlog.jsonl");
    Harness h(client);
    const std::vector<std::string> elements{"closed_bug_ratio", "complexity",
                                            "passed_tests_percentage", "comments_ratio"};
    const std::map<std::string, std::pair<std::string, double>> pattern_for{
        {"closed_bug_ratio", {"Open bugs", 5}},
        {"complexity", {"Complex files", 95}},
        {"passed_tests_percentage", {"Passed tests", 0.95}},
        {"comments_ratio", {"Commented files", 80}}};
    int alerts = 0, transitions = 0, rejections = 0;
    for (int step = 0; step < 12000; ++step) {
      const int op = static_cast<int>(rng() % 10);
      auto qrs = h.flow.list();
      if (op == 0 || qrs.empty()) {
        const auto& element = elements[rng() % elements.size()];
        const auto& [pattern, value] = pattern_for.at(element);
        h.flow.suggest_qr(alert_on(element, "AL-" + std::to_string(++alerts)), pattern,
                          {{"value", value}});
        continue;
      }
      if (op == 9) {
        // Close a random task in the backlog and sync.
        const auto all = client.fetch_all();
        if (!all.empty()) {
          const auto& w = all[rng() % all.size()];
          if (w.type_name == "Task") {
            client.set_status(w.wp_id, rng() % 2 ? "Closed" : "In progress");
          }
        }
        const auto before = h.flow.list();
        h.flow.sync_completion(h.mirror());
        const auto after = h.flow.list();
        for (std::size_t i = 0; i < before.size(); ++i) {
          if (before[i].state != after[i].state) {
            REQUIRE(arrows.contains({std::string(to_string(before[i].state)),
                                     std::string(to_string(after[i].state))}));
          }
        }
        continue;
      }
      const auto target = qrs[rng() % qrs.size()];
      const bool outage = rng() % 8 == 0;
      client.set_available(!outage);
      const bool with_rationale = rng() % 2 == 0;
      const std::string why = with_rationale ? "not worth it" : "";
      try {
        switch (op) {
          case 1: h.flow.qe_decide(target.qr_id, QeDecision::accept); break;
          case 2: h.flow.qe_decide(target.qr_id, QeDecision::reject, why); break;
          case 3: h.flow.export_qr(target.qr_id); break;
          case 4: h.flow.pm_decide(target.qr_id, PmDecision::accept); break;
          case 5: h.flow.pm_decide(target.qr_id, PmDecision::reject, why); break;
          case 6: h.flow.pm_decide(target.qr_id, PmDecision::postpone); break;
          default: h.flow.derive_task(target.qr_id, "task " + std::to_string(rng() % 3)); break;
        }
        const auto after = h.flow.get(target.qr_id);
        if (after.state != target.state) {
          REQUIRE(arrows.contains(
              {std::string(to_string(target.state)), std::string(to_string(after.state))}));
          ++transitions;
        } else {
          // Only the idempotent operations may succeed without moving.
          REQUIRE((op == 3 || op >= 7));
        }
        if (after.state == QRState::RejectedByQE || after.state == QRState::RejectedByPM) {
          if (after.state != target.state) {
            REQUIRE(!h.journal.events().back().rationale.empty());
            ++rejections;
          }
        }
      } catch (const Error& e) {
        REQUIRE((e.code() == Errc::IllegalTransition || e.code() == Errc::MissingRationale ||
                 e.code() == Errc::BacklogUnavailable));
        REQUIRE(h.flow.get(target.qr_id) == target);
      }
      client.set_available(true);

      const auto m = h.flow.metrics();
      for (double v : {m.qe_acceptance, m.pm_acceptance, m.mitigation_task_completion,
                       m.qr_derivation, m.end_to_end}) {
        REQUIRE(v >= 0.0);
        REQUIRE(v <= 1.0);
      }
    }
    CHECK(transitions > 1000);
    CHECK(rejections > 10);
    for (const auto& qr : h.flow.list()) {
      CHECK(is_exported(qr.state) == qr.backlog_ref.has_value());
      const bool derived = qr.state == QRState::Derived || qr.state == QRState::Completed;
      CHECK(derived == !qr.derived_tasks.empty());
    }
  }

  TEST_CASE("feedback loop metrics for the reported scenario") {
    // Seven suggested, one rejected by the quality engineer, four of the six
    // exported accepted by the project manager and two rejected.
    std::vector<QualityRequirement> qrs{qr_in(QRState::RejectedByQE),
                                        qr_in(QRState::RejectedByPM),
                                        qr_in(QRState::RejectedByPM),
                                        qr_in(QRState::AcceptedByPM),
                                        qr_in(QRState::AcceptedByPM),
                                        qr_in(QRState::Derived, {"Closed", "In progress"}),
                                        qr_in(QRState::Completed, {"Closed"})};
    const auto m = compute_qfl_metrics(qrs);
    CHECK(std::abs(m.qe_acceptance - 6.0 / 7.0) <= 1e-9);
    CHECK(std::abs(m.pm_acceptance - 4.0 / 6.0) <= 1e-9);
    CHECK(std::abs(m.end_to_end - 4.0 / 7.0) <= 1e-9);
    CHECK(m.qr_derivation == 0.5);
    CHECK(m.mitigation_task_completion == doctest::Approx(2.0 / 3.0));
  }

  TEST_CASE("feedback loop metric edge cases") {
    CHECK(compute_qfl_metrics({}) == QflMetrics{1, 1, 1, 1, 1});
    QflOptions half;
    half.neutral_value = 0.5;
    CHECK(compute_qfl_metrics({}, half) == QflMetrics{0.5, 0.5, 0.5, 0.5, 0.5});

    std::vector<QualityRequirement> done;
    for (int i = 0; i < 4; ++i) {
      done.push_back(qr_in(QRState::Completed, i < 2 ? std::vector<std::string>(3, "Closed")
                                                     : std::vector<std::string>(2, "Closed")));
    }
    const auto m = compute_qfl_metrics(done);
    CHECK(m.qr_derivation == 1.0);
    CHECK(m.mitigation_task_completion == 1.0);

    // Postponed is not a decision.
    std::vector<QualityRequirement> waiting{qr_in(QRState::Postponed),
                                            qr_in(QRState::AcceptedByPM)};
    CHECK(compute_qfl_metrics(waiting).pm_acceptance == 1.0);

    QflOptions custom;
    custom.closed_statuses = {"Closed", "Done"};
    std::vector<QualityRequirement> mixed{qr_in(QRState::Derived, {"Done", "New"})};
    CHECK(compute_qfl_metrics(mixed, custom).mitigation_task_completion == 0.5);
    CHECK(compute_qfl_metrics(mixed).mitigation_task_completion == 0.0);
  }

  TEST_CASE("feedback loop metric properties") {
    auto rng = qfl::testing::make_rng(3);
    const QRState states[]{QRState::Suggested,    QRState::AcceptedByQE, QRState::RejectedByQE,
                           QRState::Exported,     QRState::Postponed,    QRState::AcceptedByPM,
                           QRState::RejectedByPM, QRState::Derived,      QRState::Completed};
    for (int round = 0; round < 2000; ++round) {
      std::vector<QualityRequirement> qrs;
      const int n = static_cast<int>(rng() % 12);
      for (int i = 0; i < n; ++i) {
        const QRState s = states[rng() % 9];
        std::vector<std::string> tasks;
        if (s == QRState::Derived || s == QRState::Completed) {
          const int k = 1 + static_cast<int>(rng() % 4);
          for (int t = 0; t < k; ++t) {
            tasks.push_back(s == QRState::Completed || rng() % 2 ? "Closed" : "In progress");
          }
        }
        qrs.push_back(qr_in(s, tasks));
      }
      const auto base = compute_qfl_metrics(qrs);

      auto more_rejected = qrs;
      more_rejected.push_back(qr_in(QRState::RejectedByPM));
      REQUIRE(compute_qfl_metrics(more_rejected).pm_acceptance <= base.pm_acceptance);

      auto closed_one = qrs;
      for (auto& qr : closed_one) {
        for (auto& t : qr.derived_tasks) {
          if (t.status != "Closed") {
            t.status = "Closed";
            goto closed;
          }
        }
      }
    closed:
      REQUIRE(compute_qfl_metrics(closed_one).mitigation_task_completion >=
              base.mitigation_task_completion);

      auto shuffled = qrs;
      std::shuffle(shuffled.begin(), shuffled.end(), rng);
      REQUIRE(compute_qfl_metrics(shuffled) == base);
    }
  }

  TEST_CASE("feedback loop model") {
    const auto& m = feedback_loop_model();
    CHECK(m.metrics().size() == 4);
    CHECK(m.factors().size() == 2);
    CHECK(m.indicators().size() == 1);
    CHECK(m.find_composite(ids::kRelevance)->children.size() == 1);
    CHECK(m.find_composite(ids::kRelevance)->children[0].id == ids::kPmAcceptance);
    const auto values = qfl_metric_values({0.5, 0.25, 1.0, 0.5, 0.1});
    const auto a = model::evaluate_snapshot(m, values, ts("2026-06-01T00:00:00Z"));
    CHECK(a.at(std::string(ids::kRelevance)).value == 0.25);
    CHECK(a.at(std::string(ids::kCompletion)).value == 0.75);
    CHECK(a.at(std::string(ids::kIndicator)).value == 0.5);
  }

  TEST_CASE("records round trip through json") {
    QualityRequirement qr = qr_in(QRState::Derived, {"Closed"});
    qr.qr_id = "QR-000004";
    qr.text = "text";
    qr.pattern_name = "Open bugs";
    qr.params = {{"value", 5.0}};
    qr.source_alert_id = "AL-000002";
    qr.linked_metric_ids = {"closed_bug_ratio"};
    qr.decisions = {"EV-000001", "EV-000002"};
    qr.backlog_ref = "133";
    qr.created_at = ts("2026-06-26T10:00:00Z");
    const json j = qr;
    CHECK(j.get<QualityRequirement>() == qr);
    QualityRequirement bare;
    bare.qr_id = "QR-1";
    bare.text = "t";
    CHECK(json(bare).get<QualityRequirement>() == bare);
  }
}
