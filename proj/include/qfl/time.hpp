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

#include <chrono>
#include <cstdint>
#include <string>
#include <string_view>

namespace qfl {

/// UTC instant at microsecond resolution.
using Timestamp = std::chrono::sys_time<std::chrono::microseconds>;

/// Accepts `YYYY-MM-DDTHH:MM:SS[.frac](Z|+HH:MM|-HH:MM)`; offsets are folded
/// into UTC. Throws Error{SchemaError} on anything else.
Timestamp parse_rfc3339(std::string_view text);

/// Always emits `Z`; fractional seconds only when non-zero.
std::string format_rfc3339(Timestamp ts);

Timestamp now_utc();

inline std::int64_t to_micros(Timestamp ts) { return ts.time_since_epoch().count(); }
inline Timestamp from_micros(std::int64_t us) {
  return Timestamp{std::chrono::microseconds{us}};
}

inline constexpr Timestamp kMinTimestamp{std::chrono::microseconds{INT64_MIN / 2}};
inline constexpr Timestamp kMaxTimestamp{std::chrono::microseconds{INT64_MAX / 2}};

}  // namespace qfl
