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

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <shared_mutex>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "qfl/model.hpp"
#include "qfl/time.hpp"

namespace qfl::store {

struct HistorySeries {
  std::string element_id;
  std::vector<model::AssessmentPoint> points;
};

enum class EventKind {
  qr_added,
  qr_accepted_qe,
  qr_rejected_qe,
  qr_exported,
  qr_accepted_pm,
  qr_rejected_pm,
  qr_postponed,
  qr_derived,
  qr_completed,
  threshold_changed,
};

std::string_view to_string(EventKind kind) noexcept;
EventKind parse_event_kind(std::string_view name);
bool requires_rationale(EventKind kind) noexcept;

struct DecisionEvent {
  std::string event_id;  // assigned by the store when empty
  EventKind kind = EventKind::qr_added;
  std::string subject_id;
  Timestamp timestamp{};
  std::string rationale;
  friend bool operator==(const DecisionEvent&, const DecisionEvent&) = default;
};

void to_json(nlohmann::json& j, const DecisionEvent& event);
void from_json(const nlohmann::json& j, DecisionEvent& event);

/// Keyed documents kept alongside the time series; the last write per key wins.
enum class DocumentKind : std::uint8_t {
  alert = 1,
  qr = 2,
  snapshot = 3,
  thresholds = 4,
};

struct EventQuery {
  Timestamp from = kMinTimestamp;
  Timestamp to = kMaxTimestamp;
  std::optional<std::string> subject;
};

struct StoreOptions {
  /// A new segment is started once the current one would exceed this size.
  std::uint64_t segment_bytes = 8u << 20;
  /// fdatasync after every committed write.
  bool durable = true;
};

/// Append-only segmented log with an in-memory index.
///
/// On-disk layout: `segment-NNNNNN.qfl` files, each starting with the magic
/// bytes "QFL1" and a version byte, followed by records framed as
/// [u32 length][u32 crc32][payload]. A payload's first byte is its type:
/// 1 assessment batch, 2 decision event, 3 document. A torn record at the
/// tail of the newest segment is discarded on open.
///
/// Writers are serialized; readers only ever observe whole batches.
class Store {
 public:
  static constexpr std::string_view kMagic = "QFL1";
  static constexpr std::uint8_t kVersion = 1;

  explicit Store(std::filesystem::path directory, StoreOptions options = {});
  ~Store();
  Store(const Store&) = delete;
  Store& operator=(const Store&) = delete;

  /// Makes ids queryable before their first point arrives.
  void declare_elements(std::span<const std::string> element_ids);

  /// Throws Error{OutOfOrderTimestamp} unless every point is strictly later
  /// than the stored tail of its element (and than earlier points of the
  /// same element in the batch). Nothing is written on error.
  void append_assessment(std::span<const model::AssessmentPoint> points);

  /// Points with from <= t <= to. Throws Error{UnknownElement}.
  HistorySeries query_range(std::string_view element_id, Timestamp from, Timestamp to) const;
  std::optional<model::AssessmentPoint> latest(std::string_view element_id) const;
  std::vector<std::string> element_ids() const;

  /// Throws Error{MissingRationale} for rejection kinds without rationale.
  DecisionEvent record_event(DecisionEvent event);
  std::vector<DecisionEvent> list_events(const EventQuery& query = {}) const;

  void put_document(DocumentKind kind, const std::string& key, const nlohmann::json& body);
  std::optional<nlohmann::json> get_document(DocumentKind kind, const std::string& key) const;
  std::vector<std::pair<std::string, nlohmann::json>> documents(DocumentKind kind) const;

  /// element_id,timestamp,value,provenance; one line per stored point.
  void export_csv(std::ostream& out) const;

  const std::filesystem::path& directory() const noexcept { return directory_; }
  std::size_t segment_count() const;

 private:
  void replay_segment(const std::filesystem::path& path, bool is_last);
  void apply(std::span<const std::uint8_t> payload);
  void write_payload(const std::vector<std::uint8_t>& payload);
  void open_segment(std::uint32_t number, bool create);

  std::filesystem::path directory_;
  StoreOptions options_;
  int fd_ = -1;
  std::uint32_t segment_number_ = 0;
  std::uint64_t segment_size_ = 0;

  mutable std::shared_mutex mutex_;
  std::map<std::string, std::vector<model::AssessmentPoint>, std::less<>> series_;
  std::vector<DecisionEvent> events_;
  std::map<std::pair<std::uint8_t, std::string>, nlohmann::json> documents_;
};

}  // namespace qfl::store
