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

#include "qfl/error.hpp"

#include <array>

namespace qfl {
namespace {

struct ErrcInfo {
  std::string_view name;
  int http_status;
  ErrorClass cls;
};

constexpr std::array<ErrcInfo, kErrcCount> kInfo{{
    {"SchemaError", 400, ErrorClass::Domain},
    {"ValidationError", 400, ErrorClass::Domain},
    {"FieldMissing", 422, ErrorClass::Domain},
    {"EmptyChildren", 422, ErrorClass::Domain},
    {"MissingMetricValue", 422, ErrorClass::Domain},
    {"UnknownElement", 404, ErrorClass::Domain},
    {"ValueOutOfRange", 422, ErrorClass::Domain},
    {"SourceMissing", 422, ErrorClass::Domain},
    {"OutOfOrderTimestamp", 409, ErrorClass::Domain},
    {"StorageFailure", 500, ErrorClass::Io},
    {"MissingRationale", 422, ErrorClass::Domain},
    {"UnknownAlert", 404, ErrorClass::Domain},
    {"IllegalTransition", 409, ErrorClass::Domain},
    {"DanglingMetricLink", 400, ErrorClass::Domain},
    {"MissingParam", 422, ErrorClass::Domain},
    {"ParamOutOfRange", 422, ErrorClass::Domain},
    {"PatternNotApplicable", 422, ErrorClass::Domain},
    {"UnknownQR", 404, ErrorClass::Domain},
    {"BacklogUnavailable", 503, ErrorClass::Io},
    {"RemoteError", 502, ErrorClass::Io},
    {"ConflictError", 409, ErrorClass::Domain},
    {"UnknownParent", 422, ErrorClass::Domain},
    {"UnknownWorkPackage", 404, ErrorClass::Domain},
    {"UnknownStatus", 422, ErrorClass::Domain},
    {"EmptySeries", 422, ErrorClass::Domain},
    {"BadAlpha", 422, ErrorClass::Domain},
    {"InsufficientHistory", 422, ErrorClass::Domain},
    {"BindError", 500, ErrorClass::Io},
    {"ConfigError", 500, ErrorClass::Io},
    {"MissingIdempotencyKey", 428, ErrorClass::Usage},
    {"Unauthorized", 401, ErrorClass::Usage},
    {"NotFound", 404, ErrorClass::Usage},
    {"BadRequest", 400, ErrorClass::Usage},
}};

const ErrcInfo& info(Errc code) noexcept {
  return kInfo[static_cast<std::size_t>(code)];
}

}  // namespace

std::string_view errc_name(Errc code) noexcept { return info(code).name; }
int errc_http_status(Errc code) noexcept { return info(code).http_status; }
ErrorClass errc_class(Errc code) noexcept { return info(code).cls; }

Error::Error(Errc code, const std::string& message, nlohmann::json details)
    : std::runtime_error(message), code_(code), details_(std::move(details)) {}

nlohmann::json Error::to_json() const {
  return {{"status", errc_http_status(code_)},
          {"code", std::string(errc_name(code_))},
          {"message", what()},
          {"details", details_}};
}

}  // namespace qfl
