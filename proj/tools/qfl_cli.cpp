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

// qfl: operator command line over the C library.

#include <unistd.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "qfl/qfl.h"

using nlohmann::json;

namespace {

enum ExitCode { kOk = 0, kDomain = 1, kUsage = 2, kIo = 3 };

struct Options {
  std::string config;
  std::string format = "table";
  bool color = false;
};

Options opts;

std::string paint(const std::string& text, const char* code) {
  return opts.color ? std::string("\033[") + code + "m" + text + "\033[0m" : text;
}

std::string fmt_value(const json& v) {
  if (!v.is_number()) return "-";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v.get<double>());
  const double x = v.get<double>();
  return paint(buf, x < 0.5 ? "31" : x < 0.8 ? "33" : "32");
}

std::string cell(const json& v) {
  if (v.is_null()) return "-";
  if (v.is_string()) return v.get<std::string>();
  return v.dump();
}

// Fixed-width table; the last column is left unpadded.
void print_table(const std::vector<std::string>& header,
                 const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width(header.size(), 0);
  auto visible = [](const std::string& s) {
    std::size_t n = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (s[i] == '\033') {
        while (i < s.size() && s[i] != 'm') ++i;
        continue;
      }
      if ((static_cast<unsigned char>(s[i]) & 0xC0) != 0x80) ++n;
    }
    return n;
  };
  for (std::size_t c = 0; c < header.size(); ++c) width[c] = header[c].size();
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < row.size() && c < width.size(); ++c) {
      width[c] = std::max(width[c], visible(row[c]));
    }
  }
  auto line = [&](const std::vector<std::string>& row, bool bold) {
    std::string out;
    for (std::size_t c = 0; c < row.size(); ++c) {
      std::string text = row[c];
      if (c + 1 < row.size()) text += std::string(width[c] - visible(row[c]) + 2, ' ');
      out += text;
    }
    std::cout << (bold ? paint(out, "1") : out) << '\n';
  };
  line(header, true);
  for (const auto& row : rows) line(row, false);
}

// Holds the result of one library call.
struct Result {
  qfl_status status = QFL_OK;
  std::string text;
};

template <typename F>
Result invoke(F&& f) {
  char* out = nullptr;
  Result r;
  r.status = f(&out);
  if (out) {
    r.text = out;
    qfl_string_free(out);
  }
  return r;
}

int report_error(qfl_status status) {
  const std::string raw = qfl_last_error();
  if (opts.format == "json") {
    std::cerr << raw << '\n';
  } else {
    const json err = json::parse(raw, nullptr, false);
    const std::string code = err.is_object() ? err.value("code", "") : qfl_status_name(status);
    const std::string message = err.is_object() ? err.value("message", "") : raw;
    std::cerr << paint("error", "31") << ": " << code << ": " << message << '\n';
  }
  return qfl_status_exit_code(status);
}

using Printer = std::function<void(const json&)>;

int emit(const Result& r, const Printer& human) {
  if (r.status != QFL_OK) return report_error(r.status);
  if (opts.format == "json") {
    std::cout << r.text << '\n';
  } else {
    human(json::parse(r.text));
  }
  return kOk;
}

bool read_text(const std::string& path, std::string& out) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return false;
  std::ostringstream ss;
  ss << in.rdbuf();
  out = ss.str();
  return true;
}

const char* c_or_null(const std::string& s) { return s.empty() ? nullptr : s.c_str(); }

// ---------------------------------------------------------------------------
// Human renderers

void print_alerts(const json& page) {
  std::vector<std::vector<std::string>> rows;
  for (const auto& a : page["items"]) {
    rows.push_back({a["alert_id"], a["state"], a["severity"], a["element_id"],
                    fmt_value(a["observed_value"]), fmt_value(a["trigger_below"]),
                    a["raised_at"]});
  }
  print_table({"ALERT", "STATE", "SEVERITY", "ELEMENT", "VALUE", "BELOW", "RAISED"}, rows);
}

void print_qr(const json& qr) {
  std::cout << qr["qr_id"].get<std::string>() << "  " << qr["state"].get<std::string>() << '\n'
            << "  text:     " << qr["text"].get<std::string>() << '\n'
            << "  pattern:  " << cell(qr["pattern_name"]) << '\n'
            << "  alert:    " << cell(qr["source_alert_id"]) << '\n'
            << "  backlog:  " << cell(qr["backlog_ref"]) << '\n';
  for (const auto& t : qr["derived_tasks"]) {
    std::cout << "  task " << t["wp_id"].get<std::string>() << " ["
              << t["status"].get<std::string>() << "] " << t["subject"].get<std::string>()
              << '\n';
  }
}

void print_qrs(const json& page) {
  std::vector<std::vector<std::string>> rows;
  for (const auto& q : page["items"]) {
    rows.push_back({q["qr_id"], q["state"], cell(q["backlog_ref"]),
                    std::to_string(q["derived_tasks"].size()), q["text"]});
  }
  print_table({"QR", "STATE", "BACKLOG", "TASKS", "TEXT"}, rows);
}

void print_assessment(const json& assessment, const json& model) {
  std::map<std::string, std::string> names;
  for (const char* layer : {"metrics", "factors", "indicators"}) {
    for (const auto& e : model[layer]) names[e["id"]] = e["name"];
  }
  std::vector<std::vector<std::string>> rows;
  for (const char* layer : {"indicator", "factor"}) {
    for (const auto& [id, p] : assessment.items()) {
      if (p["layer"] != layer) continue;
      rows.push_back({layer, id, names[id], fmt_value(p["value"])});
    }
  }
  print_table({"LAYER", "ELEMENT", "NAME", "VALUE"}, rows);
}

void print_qfl(const json& q) {
  std::vector<std::vector<std::string>> rows;
  for (const auto& [k, v] : q["metrics"].items()) rows.push_back({"metric", k, fmt_value(v)});
  for (const auto& [k, v] : q["factors"].items()) rows.push_back({"factor", k, fmt_value(v)});
  rows.push_back({"indicator", q["indicator"]["element_id"], fmt_value(q["indicator"]["value"])});
  print_table({"LAYER", "ELEMENT", "VALUE"}, rows);
}

void print_points(const json& points) {
  std::vector<std::vector<std::string>> rows;
  for (const auto& p : points) rows.push_back({p["timestamp"], fmt_value(p["value"])});
  print_table({"TIMESTAMP", "VALUE"}, rows);
}

bool parse_assignment(const std::string& text, std::string& key, std::string& value) {
  const auto eq = text.find('=');
  if (eq == std::string::npos || eq == 0) return false;
  key = text.substr(0, eq);
  value = text.substr(eq + 1);
  return true;
}

json scalar(const std::string& text) {
  char* end = nullptr;
  const double d = std::strtod(text.c_str(), &end);
  if (!text.empty() && end && *end == '\0' && std::isfinite(d)) return d;
  return text;
}

void on_ready(int port, void* user) {
  const auto* host = static_cast<const std::string*>(user);
  std::cout << "listening on http://" << *host << ":" << port << std::endl;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Quality feedback loop: assessment, alerts and quality requirements", "qfl"};
  app.failure_message(CLI::FailureMessage::help);
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", std::string(qfl_version()));
  app.add_option("--config", opts.config, "Config file (default: $QFL_CONFIG, ./qfl.config)");
  app.add_option("--format", opts.format, "Output format")
      ->check(CLI::IsMember({"table", "json"}))
      ->capture_default_str();

  // The action runs after parsing; commands other than init need an engine.
  std::function<int(qfl_engine*)> action;
  bool needs_engine = true;

  auto* init = app.add_subcommand("init", "Write the example workspace into a directory");
  std::string init_dir = ".";
  init->add_option("dir", init_dir, "Target directory")->capture_default_str();
  init->callback([&] {
    needs_engine = false;
    action = [&](qfl_engine*) {
      auto r = invoke([&](char** o) { return qfl_init_workspace(init_dir.c_str(), o); });
      return emit(r, [](const json& j) {
        for (const auto& f : j["written"]) std::cout << "wrote   " << f.get<std::string>() << '\n';
        for (const auto& f : j["skipped"]) std::cout << "kept    " << f.get<std::string>() << '\n';
      });
    };
  });

  auto* ingest = app.add_subcommand("ingest", "Validate and store a tool snapshot");
  std::string ingest_kind, ingest_file;
  ingest->add_option("kind", ingest_kind, "Source kind")
      ->required()
      ->check(CLI::IsMember(
          {"static_analysis", "issue_tracker", "ci_builds", "vcs_log", "backlog"}));
  ingest->add_option("file", ingest_file, "Snapshot document")->required();
  ingest->callback([&] {
    action = [&](qfl_engine* e) {
      std::string doc;
      if (!read_text(ingest_file, doc)) {
        std::cerr << "error: cannot read " << ingest_file << '\n';
        return static_cast<int>(kIo);
      }
      auto r = invoke([&](char** o) {
        return qfl_ingest(e, ingest_kind.c_str(), doc.c_str(), o);
      });
      return emit(r, [](const json& j) {
        std::cout << "ingested " << j["records"] << " records from "
                  << j["source_id"].get<std::string>() << " ("
                  << j["source_kind"].get<std::string>() << ") captured at "
                  << j["captured_at"].get<std::string>()
                  << (j["latest"].get<bool>() ? "" : "; a newer snapshot is kept") << '\n';
      });
    };
  });

  auto* assess = app.add_subcommand("assess", "Evaluate the model and check thresholds");
  std::string assess_at;
  assess->add_option("--at", assess_at, "Assessment instant (RFC 3339)");
  assess->callback([&] {
    action = [&](qfl_engine* e) {
      auto r = invoke([&](char** o) { return qfl_assess(e, c_or_null(assess_at), o); });
      auto model = invoke([&](char** o) { return qfl_model(e, o); });
      return emit(r, [&](const json& j) {
        std::cout << "assessment at " << j["timestamp"].get<std::string>() << "\n\n";
        print_assessment(j["assessment"], json::parse(model.text));
        if (!j["alerts_raised"].empty()) {
          std::cout << '\n' << paint("alerts raised", "31") << '\n';
          print_alerts({{"items", j["alerts_raised"]}});
        }
        if (!j["alerts_resolved"].empty()) {
          std::cout << '\n' << "alerts resolved\n";
          print_alerts({{"items", j["alerts_resolved"]}});
        }
      });
    };
  });

  auto* alerts = app.add_subcommand("alerts", "List and acknowledge alerts");
  alerts->require_subcommand(1);
  auto* alerts_list = alerts->add_subcommand("list", "List alerts");
  std::string alert_state;
  unsigned limit = 0, offset = 0;
  alerts_list->add_option("--state", alert_state)->check(
      CLI::IsMember({"open", "acknowledged", "resolved"}));
  alerts_list->add_option("--limit", limit);
  alerts_list->add_option("--offset", offset);
  alerts_list->callback([&] {
    action = [&](qfl_engine* e) {
      auto r = invoke(
          [&](char** o) { return qfl_alerts(e, c_or_null(alert_state), limit, offset, o); });
      return emit(r, print_alerts);
    };
  });
  auto* alerts_ack = alerts->add_subcommand("ack", "Acknowledge an open alert");
  std::string alert_id;
  alerts_ack->add_option("id", alert_id)->required();
  alerts_ack->callback([&] {
    action = [&](qfl_engine* e) {
      auto r = invoke([&](char** o) { return qfl_alert_ack(e, alert_id.c_str(), o); });
      return emit(r, [](const json& a) {
        std::cout << a["alert_id"].get<std::string>() << " " << a["state"].get<std::string>()
                  << '\n';
      });
    };
  });
  auto* alerts_cand = alerts->add_subcommand("candidates", "QR patterns addressing an alert");
  alerts_cand->add_option("id", alert_id)->required();
  alerts_cand->callback([&] {
    action = [&](qfl_engine* e) {
      auto r = invoke([&](char** o) { return qfl_alert_candidates(e, alert_id.c_str(), o); });
      return emit(r, [](const json& j) {
        std::vector<std::vector<std::string>> rows;
        for (const auto& p : j["items"]) rows.push_back({p["name"], p["pattern_text"]});
        print_table({"PATTERN", "TEXT"}, rows);
      });
    };
  });

  auto* qr = app.add_subcommand("qr", "Quality requirement workflow");
  qr->require_subcommand(1);
  std::string qr_id, qr_state, rationale, stage, subject, pattern, sync_file;
  std::vector<std::string> params;

  auto* qr_list = qr->add_subcommand("list", "List quality requirements");
  qr_list->add_option("--state", qr_state);
  qr_list->add_option("--limit", limit);
  qr_list->add_option("--offset", offset);
  qr_list->callback([&] {
    action = [&](qfl_engine* e) {
      auto r =
          invoke([&](char** o) { return qfl_qrs(e, c_or_null(qr_state), limit, offset, o); });
      return emit(r, print_qrs);
    };
  });

  auto* qr_show = qr->add_subcommand("show", "Show one quality requirement");
  qr_show->add_option("id", qr_id)->required();
  qr_show->callback([&] {
    action = [&](qfl_engine* e) {
      return emit(invoke([&](char** o) { return qfl_qr_get(e, qr_id.c_str(), o); }), print_qr);
    };
  });

  auto* qr_suggest = qr->add_subcommand("suggest", "Instantiate a pattern for an alert");
  qr_suggest->add_option("alert", alert_id)->required();
  qr_suggest->add_option("pattern", pattern)->required();
  qr_suggest->add_option("--param", params, "Parameter as name=value")->take_all();
  qr_suggest->callback([&] {
    action = [&](qfl_engine* e) {
      json p = json::object();
      for (const auto& item : params) {
        std::string k, v;
        if (!parse_assignment(item, k, v)) {
          std::cerr << "error: --param expects name=value, got '" << item << "'\n";
          return static_cast<int>(kUsage);
        }
        p[k] = scalar(v);
      }
      const std::string pj = p.dump();
      auto r = invoke([&](char** o) {
        return qfl_qr_suggest(e, alert_id.c_str(), pattern.c_str(), pj.c_str(), o);
      });
      return emit(r, print_qr);
    };
  });

  auto add_decision = [&](const char* name, const char* decision, const char* help) {
    auto* cmd = qr->add_subcommand(name, help);
    cmd->add_option("id", qr_id)->required();
    cmd->add_option("--rationale", rationale, "Justification (required to reject)");
    cmd->add_option("--stage", stage, "qe or pm (default: inferred from the state)")
        ->check(CLI::IsMember({"qe", "pm"}));
    cmd->callback([&, decision] {
      action = [&, decision](qfl_engine* e) {
        auto r = invoke([&](char** o) {
          return qfl_qr_decide(e, qr_id.c_str(), c_or_null(stage), decision, rationale.c_str(),
                               o);
        });
        return emit(r, print_qr);
      };
    });
  };
  add_decision("accept", "accept", "Accept (quality engineer or project manager)");
  add_decision("reject", "reject", "Reject with a rationale");
  add_decision("postpone", "postpone", "Postpone the project manager decision");

  auto* qr_export = qr->add_subcommand("export", "Create the backlog work package");
  qr_export->add_option("id", qr_id)->required();
  qr_export->callback([&] {
    action = [&](qfl_engine* e) {
      return emit(invoke([&](char** o) { return qfl_qr_export(e, qr_id.c_str(), o); }),
                  print_qr);
    };
  });

  auto* qr_derive = qr->add_subcommand("derive", "Derive a development task");
  qr_derive->add_option("id", qr_id)->required();
  qr_derive->add_option("subject", subject)->required();
  qr_derive->callback([&] {
    action = [&](qfl_engine* e) {
      auto r = invoke(
          [&](char** o) { return qfl_qr_derive(e, qr_id.c_str(), subject.c_str(), o); });
      return emit(r, [](const json& j) {
        std::cout << "task " << j["wp_id"].get<std::string>() << '\n';
        print_qr(j["qr"]);
      });
    };
  });

  auto* qr_sync = qr->add_subcommand("sync", "Refresh derived task statuses");
  qr_sync->add_option("--file", sync_file, "Backlog snapshot (default: read the backlog)");
  qr_sync->callback([&] {
    action = [&](qfl_engine* e) {
      std::string doc;
      if (!sync_file.empty() && !read_text(sync_file, doc)) {
        std::cerr << "error: cannot read " << sync_file << '\n';
        return static_cast<int>(kIo);
      }
      auto r = invoke([&](char** o) { return qfl_sync(e, c_or_null(doc), o); });
      return emit(r, [](const json& j) {
        std::cout << j["updated"].size() << " quality requirement(s) updated\n";
        for (const auto& q : j["updated"]) {
          std::cout << "  " << q["qr_id"].get<std::string>() << " "
                    << q["state"].get<std::string>() << '\n';
        }
      });
    };
  });

  auto* qfl = app.add_subcommand("qfl", "Feedback loop metrics and indicator");
  qfl->callback([&] {
    action = [&](qfl_engine* e) {
      return emit(invoke([&](char** o) { return qfl_qfl(e, o); }), print_qfl);
    };
  });

  auto* whatif = app.add_subcommand("whatif", "Recompute with pinned values");
  std::vector<std::string> sets;
  whatif->add_option("--set", sets, "element=value")->required()->take_all();
  whatif->callback([&] {
    action = [&](qfl_engine* e) {
      json overrides = json::object();
      for (const auto& item : sets) {
        std::string k, v;
        json value;
        if (parse_assignment(item, k, v)) value = scalar(v);
        if (!value.is_number()) {
          std::cerr << "error: --set expects element=number, got '" << item << "'\n";
          return static_cast<int>(kUsage);
        }
        overrides[k] = value;
      }
      const std::string text = overrides.dump();
      auto r = invoke([&](char** o) { return qfl_whatif(e, text.c_str(), o); });
      auto model = invoke([&](char** o) { return qfl_model(e, o); });
      return emit(r, [&](const json& j) { print_assessment(j, json::parse(model.text)); });
    };
  });

  auto* forecast = app.add_subcommand("forecast", "Forecast an element from its history");
  std::string element, method = "ses";
  int horizon = 0;
  double alpha = std::nan("");
  forecast->add_option("--element", element)->required();
  forecast->add_option("--method", method)
      ->check(CLI::IsMember({"ses", "trend"}))
      ->capture_default_str();
  forecast->add_option("--horizon", horizon, "Steps (default from config)");
  forecast->add_option("--alpha", alpha, "Smoothing factor for ses (default from config)");
  forecast->callback([&] {
    action = [&](qfl_engine* e) {
      auto r = invoke([&](char** o) {
        return qfl_forecast(e, element.c_str(), method.c_str(), horizon, alpha, o);
      });
      return emit(r, [](const json& j) { print_points(j["points"]); });
    };
  });

  auto* history = app.add_subcommand("history", "Stored values of an element");
  std::string from, to;
  history->add_option("element", element)->required();
  history->add_option("--from", from);
  history->add_option("--to", to);
  history->callback([&] {
    action = [&](qfl_engine* e) {
      auto r = invoke([&](char** o) {
        return qfl_history(e, element.c_str(), c_or_null(from), c_or_null(to), o);
      });
      return emit(r, [](const json& j) { print_points(j["points"]); });
    };
  });

  auto* events = app.add_subcommand("events", "Decision and threshold events");
  std::string event_subject;
  events->add_option("--subject", event_subject);
  events->add_option("--from", from);
  events->add_option("--to", to);
  events->callback([&] {
    action = [&](qfl_engine* e) {
      auto r = invoke([&](char** o) {
        return qfl_events(e, c_or_null(event_subject), c_or_null(from), c_or_null(to), o);
      });
      return emit(r, [](const json& j) {
        std::vector<std::vector<std::string>> rows;
        for (const auto& ev : j["items"]) {
          rows.push_back({ev["event_id"], ev["timestamp"], ev["kind"], ev["subject_id"],
                          ev["rationale"]});
        }
        print_table({"EVENT", "TIMESTAMP", "KIND", "SUBJECT", "RATIONALE"}, rows);
      });
    };
  });

  auto* csv = app.add_subcommand("export-csv", "Write the stored history as CSV");
  csv->callback([&] {
    action = [&](qfl_engine* e) {
      auto r = invoke([&](char** o) { return qfl_export_csv(e, o); });
      if (r.status != QFL_OK) return report_error(r.status);
      std::cout << r.text;
      return static_cast<int>(kOk);
    };
  });

  auto* serve = app.add_subcommand("serve", "Run the HTTP service until interrupted");
  std::string host;
  int port = -1;
  serve->add_option("--host", host, "Bind address (default from config)");
  serve->add_option("--port", port, "Port, 0 for any (default from config)");
  serve->callback([&] {
    action = [&](qfl_engine* e) {
      std::string shown = host;
      if (shown.empty()) {
        auto c = invoke([&](char** o) { return qfl_config(e, o); });
        if (c.status != QFL_OK) return report_error(c.status);
        shown = json::parse(c.text)["host"].get<std::string>();
      }
      auto r = invoke([&](char**) {
        return qfl_serve(e, c_or_null(host), port, on_ready, &shown);
      });
      if (r.status != QFL_OK) return report_error(r.status);
      return static_cast<int>(kOk);
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }
  opts.color = opts.format == "table" && ::isatty(STDOUT_FILENO) != 0;

  qfl_engine* engine = nullptr;
  if (needs_engine) {
    const qfl_status st = qfl_engine_open(c_or_null(opts.config), &engine);
    if (st != QFL_OK) return report_error(st);
  }
  const int rc = action(engine);
  qfl_engine_close(engine);
  return rc;
}
