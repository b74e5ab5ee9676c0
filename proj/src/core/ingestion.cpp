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

#include "qfl/ingestion.hpp"

#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "json_util.hpp"
#include "qfl/error.hpp"

namespace qfl::ingest {

using nlohmann::json;

namespace {

enum class FieldType { String, Number, Integer, Timestamp, Id };
enum class Bound { None, NonNegative, UnitInterval };

struct FieldSpec {
  std::string_view name;
  FieldType type;
  bool required;
  Bound bound = Bound::None;
};

const std::vector<FieldSpec>& schema_for(SourceKind kind) {
  static const std::vector<FieldSpec> static_analysis{
      {"file", FieldType::String, true},
      {"comment_density", FieldType::Number, true, Bound::UnitInterval},
      {"complexity", FieldType::Number, true, Bound::NonNegative},
      {"duplicated_block_density", FieldType::Number, true, Bound::UnitInterval},
      {"critical_or_blocker_violations", FieldType::Integer, true, Bound::NonNegative}};
  static const std::vector<FieldSpec> issue_tracker{
      {"id", FieldType::Id, true},
      {"type", FieldType::String, true},
      {"status", FieldType::String, true},
      {"severity", FieldType::String, true},
      {"created_at", FieldType::Timestamp, true},
      {"closed_at", FieldType::Timestamp, false}};
  static const std::vector<FieldSpec> ci_builds{
      {"build_id", FieldType::Id, true},
      {"passed_tests", FieldType::Integer, true, Bound::NonNegative},
      {"total_tests", FieldType::Integer, true, Bound::NonNegative},
      {"finished_at", FieldType::Timestamp, true}};
  static const std::vector<FieldSpec> vcs_log{
      {"revision", FieldType::Id, true},
      {"author", FieldType::String, true},
      {"timestamp", FieldType::Timestamp, true},
      {"files_changed", FieldType::Integer, true, Bound::NonNegative}};
  static const std::vector<FieldSpec> backlog{
      {"id", FieldType::Id, true},
      {"subject", FieldType::String, true},
      {"type", FieldType::String, true},
      {"status", FieldType::String, true},
      {"parent_id", FieldType::Id, false}};
  switch (kind) {
    case SourceKind::static_analysis:
      return static_analysis;
    case SourceKind::issue_tracker:
      return issue_tracker;
    case SourceKind::ci_builds:
      return ci_builds;
    case SourceKind::vcs_log:
      return vcs_log;
    case SourceKind::backlog:
      return backlog;
  }
  return static_analysis;
}

[[noreturn]] void record_error(std::size_t index, std::string_view field,
                               const std::string& problem) {
  throw Error(Errc::SchemaError,
              "record " + std::to_string(index) + ": field '" + std::string(field) + "' " +
                  problem,
              {{"index", index}, {"field", std::string(field)}});
}

std::string id_text(const json& value) {
  return value.is_string() ? value.get<std::string>() : std::to_string(value.get<long long>());
}

void validate_record(const json& fields, SourceKind kind, std::size_t index) {
  if (!fields.is_object()) record_error(index, "*", "record must be an object");
  for (const auto& spec : schema_for(kind)) {
    auto it = fields.find(spec.name);
    if (it == fields.end() || it->is_null()) {
      if (spec.required) record_error(index, spec.name, "is missing");
      continue;
    }
    const json& v = *it;
    switch (spec.type) {
      case FieldType::String:
        if (!v.is_string()) record_error(index, spec.name, "must be a string");
        break;
      case FieldType::Number:
        if (!v.is_number()) record_error(index, spec.name, "must be a number");
        break;
      case FieldType::Integer:
        if (!v.is_number_integer()) record_error(index, spec.name, "must be an integer");
        break;
      case FieldType::Timestamp:
        if (!v.is_string()) record_error(index, spec.name, "must be an RFC 3339 string");
        try {
          parse_rfc3339(v.get<std::string>());
        } catch (const Error&) {
          record_error(index, spec.name, "must be an RFC 3339 timestamp");
        }
        break;
      case FieldType::Id:
        if (!v.is_string() && !v.is_number_integer()) {
          record_error(index, spec.name, "must be a string or integer id");
        }
        break;
    }
    if (spec.bound != Bound::None) {
      const double x = v.get<double>();
      if (x < 0.0) record_error(index, spec.name, "must be nonnegative");
      if (spec.bound == Bound::UnitInterval && x > 1.0) {
        record_error(index, spec.name, "must lie in [0,1]");
      }
    }
  }

  if (kind == SourceKind::issue_tracker && fields.contains("closed_at") &&
      !fields["closed_at"].is_null()) {
    const auto created = parse_rfc3339(fields["created_at"].get<std::string>());
    const auto closed = parse_rfc3339(fields["closed_at"].get<std::string>());
    if (closed < created) record_error(index, "closed_at", "is earlier than created_at");
  }
  if (kind == SourceKind::ci_builds &&
      fields["passed_tests"].get<long long>() > fields["total_tests"].get<long long>()) {
    record_error(index, "passed_tests", "exceeds total_tests");
  }
}

}  // namespace

SourceSnapshot snapshot_from_json(const json& doc, std::optional<SourceKind> expected,
                                  std::optional<Timestamp> now) {
  const std::string where = "snapshot";
  if (!doc.is_object()) throw Error(Errc::SchemaError, "snapshot must be a JSON object");
  SourceSnapshot snapshot;
  snapshot.source_id = detail::require_string(doc, "source_id", where);
  snapshot.kind = parse_source_kind(detail::require_string(doc, "source_kind", where));
  if (expected && *expected != snapshot.kind) {
    throw Error(Errc::SchemaError,
                "snapshot declares source_kind '" + std::string(to_string(snapshot.kind)) +
                    "' but '" + std::string(to_string(*expected)) + "' was expected",
                {{"field", "source_kind"}});
  }
  snapshot.captured_at = parse_rfc3339(detail::require_string(doc, "captured_at", where));
  if (snapshot.captured_at > now.value_or(now_utc())) {
    throw Error(Errc::SchemaError, "captured_at lies in the future",
                {{"field", "captured_at"}});
  }
  const json& records = detail::require_array(doc, "records", where);
  snapshot.records.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    validate_record(records[i], snapshot.kind, i);
    snapshot.records.emplace_back(records[i]);
  }

  if (snapshot.kind == SourceKind::backlog) {
    std::set<std::string> ids;
    for (const auto& r : snapshot.records) ids.insert(id_text(r.fields()["id"]));
    for (std::size_t i = 0; i < snapshot.records.size(); ++i) {
      const json& fields = snapshot.records[i].fields();
      auto parent = fields.find("parent_id");
      if (parent != fields.end() && !parent->is_null() && !ids.contains(id_text(*parent))) {
        record_error(i, "parent_id", "references unknown work package '" + id_text(*parent) + "'");
      }
    }
  }
  return snapshot;
}

SourceSnapshot parse_snapshot(std::string_view document, std::optional<SourceKind> expected,
                              std::optional<Timestamp> now) {
  return snapshot_from_json(detail::parse_document(document, "snapshot"), expected, now);
}

json snapshot_to_json(const SourceSnapshot& snapshot) {
  json records = json::array();
  for (const auto& r : snapshot.records) records.push_back(r.fields());
  return {{"source_id", snapshot.source_id},
          {"source_kind", std::string(to_string(snapshot.kind))},
          {"captured_at", format_rfc3339(snapshot.captured_at)},
          {"records", std::move(records)}};
}

std::string serialize_snapshot(const SourceSnapshot& snapshot) {
  return snapshot_to_json(snapshot).dump(2);
}

model::ValueMap compute_metric_values(const model::QualityModel& model,
                                      std::span<const SourceSnapshot> snapshots) {
  std::map<std::string, const SourceSnapshot*> latest;
  for (const auto& snapshot : snapshots) {
    auto& slot = latest[snapshot.source_id];
    if (slot == nullptr || slot->captured_at <= snapshot.captured_at) slot = &snapshot;
  }
  model::ValueMap values;
  for (const auto& metric : model.metrics()) {
    auto it = latest.find(metric.data_source_id);
    if (it == latest.end()) {
      throw Error(Errc::SourceMissing,
                  "metric '" + metric.id + "' needs data source '" + metric.data_source_id +
                      "' but no snapshot was ingested for it",
                  {{"metric", metric.id}, {"source", metric.data_source_id}});
    }
    try {
      values[metric.id] = model::evaluate_metric(metric.evaluator, it->second->records);
    } catch (const Error& e) {
      if (e.code() != Errc::FieldMissing) throw;
      json details = e.details();
      details["metric"] = metric.id;
      details["source"] = metric.data_source_id;
      throw Error(Errc::FieldMissing, "metric '" + metric.id + "': " + e.what(), details);
    }
  }
  return values;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(Errc::ConfigError, "cannot read '" + path.string() + "'",
                {{"path", path.string()}});
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

FileConnector::FileConnector(std::string source_id, SourceKind kind, std::filesystem::path path)
    : source_id_(std::move(source_id)), kind_(kind), path_(std::move(path)) {}

SourceSnapshot FileConnector::fetch() {
  auto snapshot = parse_snapshot(read_file(path_), kind_);
  if (snapshot.source_id != source_id_) {
    throw Error(Errc::SchemaError,
                path_.string() + ": source_id '" + snapshot.source_id + "' does not match '" +
                    source_id_ + "'",
                {{"field", "source_id"}});
  }
  return snapshot;
}

void ConnectorRegistry::add(std::unique_ptr<Connector> connector) {
  if (contains(connector->source_id())) {
    throw Error(Errc::ValidationError, "duplicate connector '" + connector->source_id() + "'");
  }
  connectors_.push_back(std::move(connector));
}

bool ConnectorRegistry::contains(std::string_view source_id) const {
  for (const auto& c : connectors_) {
    if (c->source_id() == source_id) return true;
  }
  return false;
}

std::vector<SourceSnapshot> ConnectorRegistry::fetch_all() const {
  std::vector<SourceSnapshot> out;
  out.reserve(connectors_.size());
  for (const auto& c : connectors_) out.push_back(c->fetch());
  return out;
}

}  // namespace qfl::ingest
