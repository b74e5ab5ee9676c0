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

#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "qfl/model.hpp"
#include "qfl/record.hpp"
#include "qfl/time.hpp"

namespace qfl::ingest {

/// One exported document from a development tool.
struct SourceSnapshot {
  std::string source_id;
  SourceKind kind = SourceKind::static_analysis;
  Timestamp captured_at{};
  std::vector<Record> records;

  friend bool operator==(const SourceSnapshot&, const SourceSnapshot&) = default;
};

/// Parses and validates a snapshot document. `expected` must match the
/// header's source_kind when given. Records are checked against the schema
/// of their kind; errors carry the record index and field name.
/// `now` bounds captured_at (defaults to the wall clock).
SourceSnapshot parse_snapshot(std::string_view document,
                              std::optional<SourceKind> expected = std::nullopt,
                              std::optional<Timestamp> now = std::nullopt);
SourceSnapshot snapshot_from_json(const nlohmann::json& doc,
                                  std::optional<SourceKind> expected = std::nullopt,
                                  std::optional<Timestamp> now = std::nullopt);
nlohmann::json snapshot_to_json(const SourceSnapshot& snapshot);
std::string serialize_snapshot(const SourceSnapshot& snapshot);

/// Applies every metric's evaluator to the records of its data source. When
/// several snapshots share a source id the most recently captured one wins.
model::ValueMap compute_metric_values(const model::QualityModel& model,
                                      std::span<const SourceSnapshot> snapshots);

/// Uniform contract for anything that can produce snapshots.
class Connector {
 public:
  virtual ~Connector() = default;
  virtual const std::string& source_id() const = 0;
  virtual SourceKind kind() const = 0;
  virtual SourceSnapshot fetch() = 0;
};

/// Reads an exported snapshot file on every fetch.
class FileConnector final : public Connector {
 public:
  FileConnector(std::string source_id, SourceKind kind, std::filesystem::path path);

  const std::string& source_id() const override { return source_id_; }
  SourceKind kind() const override { return kind_; }
  SourceSnapshot fetch() override;

 private:
  std::string source_id_;
  SourceKind kind_;
  std::filesystem::path path_;
};

class ConnectorRegistry {
 public:
  /// Throws Error{ValidationError} on duplicate ids.
  void add(std::unique_ptr<Connector> connector);
  bool contains(std::string_view source_id) const;
  std::vector<SourceSnapshot> fetch_all() const;
  std::size_t size() const noexcept { return connectors_.size(); }

 private:
  std::vector<std::unique_ptr<Connector>> connectors_;
};

std::string read_file(const std::filesystem::path& path);

}  // namespace qfl::ingest
