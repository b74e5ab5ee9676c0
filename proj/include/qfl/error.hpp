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

#include <stdexcept>
#include <string>
#include <string_view>

#include "json.hpp"

namespace qfl {

/// Every error case the engine can report. The numeric order is part of the
/// C ABI (status = value + 1), so append only.
enum class Errc : int {
  SchemaError = 0,
  ValidationError,
  FieldMissing,
  EmptyChildren,
  MissingMetricValue,
  UnknownElement,
  ValueOutOfRange,
  SourceMissing,
  OutOfOrderTimestamp,
  StorageFailure,
  MissingRationale,
  UnknownAlert,
  IllegalTransition,
  DanglingMetricLink,
  MissingParam,
  ParamOutOfRange,
  PatternNotApplicable,
  UnknownQR,
  BacklogUnavailable,
  RemoteError,
  ConflictError,
  UnknownParent,
  UnknownWorkPackage,
  UnknownStatus,
  EmptySeries,
  BadAlpha,
  InsufficientHistory,
  BindError,
  ConfigError,
  MissingIdempotencyKey,
  Unauthorized,
  NotFound,
  BadRequest,
};

inline constexpr int kErrcCount = static_cast<int>(Errc::BadRequest) + 1;

/// Coarse classification used for CLI exit codes.
enum class ErrorClass : int { Domain = 1, Usage = 2, Io = 3 };

std::string_view errc_name(Errc code) noexcept;
int errc_http_status(Errc code) noexcept;
ErrorClass errc_class(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message,
        nlohmann::json details = nlohmann::json::object());

  Errc code() const noexcept { return code_; }
  std::string_view name() const noexcept { return errc_name(code_); }
  const nlohmann::json& details() const noexcept { return details_; }

  /// {status, code, message, details}
  nlohmann::json to_json() const;

 private:
  Errc code_;
  nlohmann::json details_;
};

}  // namespace qfl
