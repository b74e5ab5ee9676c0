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

#include "qfl/store.hpp"

#include <fcntl.h>
#include <unistd.h>
#include <zlib.h>

#include <algorithm>
#include <array>
#include <bit>
#include <cerrno>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <mutex>
#include <sstream>

#include "json_util.hpp"
#include "qfl/error.hpp"

namespace qfl::store {

using nlohmann::json;

namespace {

constexpr std::array<std::string_view, 10> kEventNames{
    "qr_added",      "qr_accepted_qe", "qr_rejected_qe", "qr_exported", "qr_accepted_pm",
    "qr_rejected_pm", "qr_postponed",  "qr_derived",     "qr_completed", "threshold_changed"};

constexpr std::uint8_t kAssessmentBatch = 1;
constexpr std::uint8_t kEvent = 2;
constexpr std::uint8_t kDocument = 3;
constexpr std::size_t kHeaderSize = 5;
constexpr std::size_t kFrameSize = 8;

[[noreturn]] void storage_failure(const std::string& message) {
  throw Error(Errc::StorageFailure, message);
}

std::string segment_name(std::uint32_t number) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "segment-%06u.qfl", number);
  return buf;
}

class Writer {
 public:
  void u8(std::uint8_t v) { bytes.push_back(v); }
  void u16(std::uint16_t v) { put(v, 2); }
  void u32(std::uint32_t v) { put(v, 4); }
  void u64(std::uint64_t v) { put(v, 8); }
  void str16(std::string_view s) {
    if (s.size() > 0xffff) storage_failure("identifier too long to store");
    u16(static_cast<std::uint16_t>(s.size()));
    bytes.insert(bytes.end(), s.begin(), s.end());
  }
  void raw(std::string_view s) { bytes.insert(bytes.end(), s.begin(), s.end()); }

  std::vector<std::uint8_t> bytes;

 private:
  void put(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) bytes.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> data) : data_(data) {}
  std::uint8_t u8() { return static_cast<std::uint8_t>(get(1)); }
  std::uint16_t u16() { return static_cast<std::uint16_t>(get(2)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
  std::uint64_t u64() { return get(8); }
  std::string str16() { return str(u16()); }
  std::string rest() { return str(data_.size() - pos_); }

 private:
  std::uint64_t get(int n) {
    need(static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(data_[pos_ + i]) << (8 * i);
    pos_ += static_cast<std::size_t>(n);
    return v;
  }
  std::string str(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(data_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  void need(std::size_t n) const {
    if (pos_ + n > data_.size()) storage_failure("truncated record payload");
  }
  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

std::uint32_t checksum(std::span<const std::uint8_t> bytes) {
  return static_cast<std::uint32_t>(
      ::crc32(0L, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(bytes.size())));
}

std::uint32_t read_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | static_cast<std::uint32_t>(p[1]) << 8 |
         static_cast<std::uint32_t>(p[2]) << 16 | static_cast<std::uint32_t>(p[3]) << 24;
}

void write_all(int fd, const std::uint8_t* data, std::size_t size) {
  while (size > 0) {
    const ssize_t n = ::write(fd, data, size);
    if (n < 0) {
      if (errno == EINTR) continue;
      storage_failure(std::string("write failed: ") + std::strerror(errno));
    }
    data += n;
    size -= static_cast<std::size_t>(n);
  }
}

std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

}  // namespace

std::string_view to_string(EventKind kind) noexcept {
  return kEventNames[static_cast<std::size_t>(kind)];
}

EventKind parse_event_kind(std::string_view name) {
  for (std::size_t i = 0; i < kEventNames.size(); ++i) {
    if (kEventNames[i] == name) return static_cast<EventKind>(i);
  }
  throw Error(Errc::SchemaError, "unknown event kind '" + std::string(name) + "'");
}

bool requires_rationale(EventKind kind) noexcept {
  return kind == EventKind::qr_rejected_qe || kind == EventKind::qr_rejected_pm;
}

void to_json(json& j, const DecisionEvent& event) {
  j = {{"event_id", event.event_id},
       {"kind", std::string(to_string(event.kind))},
       {"subject_id", event.subject_id},
       {"timestamp", format_rfc3339(event.timestamp)},
       {"rationale", event.rationale}};
}

void from_json(const json& j, DecisionEvent& event) {
  const std::string where = "event";
  event.event_id = detail::optional_string(j, "event_id", where);
  event.kind = parse_event_kind(detail::require_string(j, "kind", where));
  event.subject_id = detail::require_string(j, "subject_id", where);
  event.timestamp = parse_rfc3339(detail::require_string(j, "timestamp", where));
  event.rationale = detail::optional_string(j, "rationale", where);
}

// ---------------------------------------------------------------------------

Store::Store(std::filesystem::path directory, StoreOptions options)
    : directory_(std::move(directory)), options_(options) {
  std::error_code ec;
  std::filesystem::create_directories(directory_, ec);
  if (ec) storage_failure("cannot create store directory '" + directory_.string() + "'");

  std::vector<std::pair<std::uint32_t, std::filesystem::path>> segments;
  for (const auto& entry : std::filesystem::directory_iterator(directory_)) {
    const std::string name = entry.path().filename().string();
    unsigned number = 0;
    if (name.size() == 18 && std::sscanf(name.c_str(), "segment-%6u.qfl", &number) == 1) {
      segments.emplace_back(number, entry.path());
    }
  }
  std::sort(segments.begin(), segments.end());
  for (std::size_t i = 0; i < segments.size(); ++i) {
    replay_segment(segments[i].second, i + 1 == segments.size());
  }
  if (segments.empty()) {
    open_segment(1, true);
  } else {
    open_segment(segments.back().first, false);
  }
}

Store::~Store() {
  if (fd_ >= 0) ::close(fd_);
}

void Store::open_segment(std::uint32_t number, bool create) {
  if (fd_ >= 0) ::close(fd_);
  const auto path = directory_ / segment_name(number);
  fd_ = ::open(path.c_str(), O_WRONLY | O_APPEND | O_CREAT | O_CLOEXEC, 0644);
  if (fd_ < 0) storage_failure("cannot open segment '" + path.string() + "'");
  segment_number_ = number;
  if (create) {
    Writer header;
    header.raw(kMagic);
    header.u8(kVersion);
    write_all(fd_, header.bytes.data(), header.bytes.size());
    if (options_.durable) ::fdatasync(fd_);
    segment_size_ = kHeaderSize;
  } else {
    segment_size_ = std::filesystem::file_size(path);
  }
}

void Store::replay_segment(const std::filesystem::path& path, bool is_last) {
  std::ifstream in(path, std::ios::binary);
  if (!in) storage_failure("cannot read segment '" + path.string() + "'");
  std::vector<std::uint8_t> data((std::istreambuf_iterator<char>(in)),
                                 std::istreambuf_iterator<char>());
  if (data.size() < kHeaderSize ||
      std::memcmp(data.data(), kMagic.data(), kMagic.size()) != 0) {
    if (is_last && data.size() < kHeaderSize) {
      // Crash while writing the header of a fresh segment.
      std::filesystem::remove(path);
      return;
    }
    storage_failure("segment '" + path.string() + "' has a bad header");
  }
  if (data[4] != kVersion) {
    storage_failure("segment '" + path.string() + "' has unsupported version " +
                    std::to_string(data[4]));
  }
  std::size_t offset = kHeaderSize;
  while (offset < data.size()) {
    bool torn = data.size() - offset < kFrameSize;
    std::uint32_t length = 0;
    if (!torn) {
      length = read_u32(&data[offset]);
      torn = data.size() - offset - kFrameSize < length;
    }
    if (!torn) {
      std::span<const std::uint8_t> payload(&data[offset + kFrameSize], length);
      torn = checksum(payload) != read_u32(&data[offset + 4]);
      if (!torn) {
        apply(payload);
        offset += kFrameSize + length;
        continue;
      }
    }
    if (!is_last) storage_failure("segment '" + path.string() + "' is corrupt");
    std::filesystem::resize_file(path, offset);
    break;
  }
}

void Store::apply(std::span<const std::uint8_t> payload) {
  Reader r(payload);
  switch (r.u8()) {
    case kAssessmentBatch: {
      const std::uint32_t count = r.u32();
      for (std::uint32_t i = 0; i < count; ++i) {
        model::AssessmentPoint p;
        p.element_id = r.str16();
        p.layer = static_cast<model::Layer>(r.u8());
        p.timestamp = from_micros(static_cast<std::int64_t>(r.u64()));
        p.value = std::bit_cast<double>(r.u64());
        p.provenance = static_cast<model::Provenance>(r.u8());
        series_[p.element_id].push_back(std::move(p));
      }
      break;
    }
    case kEvent:
      events_.push_back(json::parse(r.rest()).get<DecisionEvent>());
      break;
    case kDocument: {
      const std::uint8_t kind = r.u8();
      std::string key = r.str16();
      documents_[{kind, std::move(key)}] = json::parse(r.rest());
      break;
    }
    default:
      storage_failure("unknown record type");
  }
}

void Store::write_payload(const std::vector<std::uint8_t>& payload) {
  const std::uint64_t frame = kFrameSize + payload.size();
  if (segment_size_ > kHeaderSize && segment_size_ + frame > options_.segment_bytes) {
    open_segment(segment_number_ + 1, true);
  }
  Writer w;
  w.u32(static_cast<std::uint32_t>(payload.size()));
  w.u32(checksum(payload));
  w.bytes.insert(w.bytes.end(), payload.begin(), payload.end());
  try {
    write_all(fd_, w.bytes.data(), w.bytes.size());
  } catch (const Error&) {
    if (::ftruncate(fd_, static_cast<off_t>(segment_size_)) != 0) {
      // Leaves a torn tail that the next open discards.
    }
    throw;
  }
  if (options_.durable && ::fdatasync(fd_) != 0) {
    storage_failure(std::string("fdatasync failed: ") + std::strerror(errno));
  }
  segment_size_ += frame;
}

void Store::declare_elements(std::span<const std::string> element_ids) {
  std::unique_lock lock(mutex_);
  for (const auto& id : element_ids) series_.try_emplace(id);
}

void Store::append_assessment(std::span<const model::AssessmentPoint> points) {
  if (points.empty()) return;
  std::unique_lock lock(mutex_);
  std::map<std::string_view, Timestamp> tails;
  for (const auto& p : points) {
    if (!(p.value >= 0.0 && p.value <= 1.0)) {
      throw Error(Errc::ValueOutOfRange, p.element_id + ": value outside [0,1]",
                  {{"element", p.element_id}});
    }
    auto tail = tails.find(p.element_id);
    if (tail == tails.end()) {
      auto it = series_.find(p.element_id);
      if (it != series_.end() && !it->second.empty()) {
        tail = tails.emplace(p.element_id, it->second.back().timestamp).first;
      }
    }
    if (tail != tails.end() && p.timestamp <= tail->second) {
      throw Error(Errc::OutOfOrderTimestamp,
                  p.element_id + ": point at " + format_rfc3339(p.timestamp) +
                      " is not after stored tail " + format_rfc3339(tail->second),
                  {{"element", p.element_id},
                   {"timestamp", format_rfc3339(p.timestamp)},
                   {"tail", format_rfc3339(tail->second)}});
    }
    tails[p.element_id] = p.timestamp;
  }

  Writer w;
  w.u8(kAssessmentBatch);
  w.u32(static_cast<std::uint32_t>(points.size()));
  for (const auto& p : points) {
    w.str16(p.element_id);
    w.u8(static_cast<std::uint8_t>(p.layer));
    w.u64(static_cast<std::uint64_t>(to_micros(p.timestamp)));
    w.u64(std::bit_cast<std::uint64_t>(p.value));
    w.u8(static_cast<std::uint8_t>(p.provenance));
  }
  write_payload(w.bytes);
  for (const auto& p : points) series_[p.element_id].push_back(p);
}

HistorySeries Store::query_range(std::string_view element_id, Timestamp from,
                                 Timestamp to) const {
  std::shared_lock lock(mutex_);
  auto it = series_.find(element_id);
  if (it == series_.end()) {
    throw Error(Errc::UnknownElement, "no history for element '" + std::string(element_id) + "'",
                {{"element", std::string(element_id)}});
  }
  HistorySeries out{std::string(element_id), {}};
  const auto& points = it->second;
  auto first = std::lower_bound(points.begin(), points.end(), from,
                                [](const auto& p, Timestamp t) { return p.timestamp < t; });
  auto last = std::upper_bound(first, points.end(), to,
                               [](Timestamp t, const auto& p) { return t < p.timestamp; });
  out.points.assign(first, last);
  return out;
}

std::optional<model::AssessmentPoint> Store::latest(std::string_view element_id) const {
  std::shared_lock lock(mutex_);
  auto it = series_.find(element_id);
  if (it == series_.end() || it->second.empty()) return std::nullopt;
  return it->second.back();
}

std::vector<std::string> Store::element_ids() const {
  std::shared_lock lock(mutex_);
  std::vector<std::string> ids;
  for (const auto& [id, _] : series_) ids.push_back(id);
  return ids;
}

DecisionEvent Store::record_event(DecisionEvent event) {
  if (requires_rationale(event.kind) && event.rationale.empty()) {
    throw Error(Errc::MissingRationale,
                std::string(to_string(event.kind)) + " requires a rationale",
                {{"subject", event.subject_id}});
  }
  if (event.subject_id.empty()) {
    throw Error(Errc::ValidationError, "event subject_id is empty");
  }
  std::unique_lock lock(mutex_);
  if (event.event_id.empty()) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "EV-%06zu", events_.size() + 1);
    event.event_id = buf;
  }
  Writer w;
  w.u8(kEvent);
  w.raw(json(event).dump());
  write_payload(w.bytes);
  events_.push_back(event);
  return event;
}

std::vector<DecisionEvent> Store::list_events(const EventQuery& query) const {
  std::shared_lock lock(mutex_);
  std::vector<DecisionEvent> out;
  for (const auto& e : events_) {
    if (e.timestamp < query.from || e.timestamp > query.to) continue;
    if (query.subject && e.subject_id != *query.subject) continue;
    out.push_back(e);
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const auto& a, const auto& b) { return a.timestamp < b.timestamp; });
  return out;
}

void Store::put_document(DocumentKind kind, const std::string& key, const json& body) {
  std::unique_lock lock(mutex_);
  Writer w;
  w.u8(kDocument);
  w.u8(static_cast<std::uint8_t>(kind));
  w.str16(key);
  w.raw(body.dump());
  write_payload(w.bytes);
  documents_[{static_cast<std::uint8_t>(kind), key}] = body;
}

std::optional<json> Store::get_document(DocumentKind kind, const std::string& key) const {
  std::shared_lock lock(mutex_);
  auto it = documents_.find({static_cast<std::uint8_t>(kind), key});
  if (it == documents_.end()) return std::nullopt;
  return it->second;
}

std::vector<std::pair<std::string, json>> Store::documents(DocumentKind kind) const {
  std::shared_lock lock(mutex_);
  std::vector<std::pair<std::string, json>> out;
  const auto k = static_cast<std::uint8_t>(kind);
  for (auto it = documents_.lower_bound({k, std::string()});
       it != documents_.end() && it->first.first == k; ++it) {
    out.emplace_back(it->first.second, it->second);
  }
  return out;
}

void Store::export_csv(std::ostream& out) const {
  std::shared_lock lock(mutex_);
  out << "element_id,timestamp,value,provenance\n";
  char buf[40];
  for (const auto& [id, points] : series_) {
    for (const auto& p : points) {
      std::snprintf(buf, sizeof buf, "%.17g", p.value);
      out << csv_field(id) << ',' << format_rfc3339(p.timestamp) << ',' << buf << ','
          << model::to_string(p.provenance) << '\n';
    }
  }
}

std::size_t Store::segment_count() const {
  std::shared_lock lock(mutex_);
  return segment_number_;
}

}  // namespace qfl::store
