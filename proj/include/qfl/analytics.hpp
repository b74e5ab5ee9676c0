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

#include <string_view>
#include <vector>

#include "json.hpp"
#include "qfl/store.hpp"
#include "qfl/time.hpp"

namespace qfl::analytics {

enum class Method { ses, linear_trend };

std::string_view to_string(Method method) noexcept;
/// Accepts "ses", "trend" and "linear_trend".
Method parse_method(std::string_view name);

inline constexpr double kDefaultAlpha = 0.3;
inline constexpr int kDefaultHorizon = 5;

struct ForecastPoint {
  Timestamp timestamp{};
  double value = 0.0;
  friend bool operator==(const ForecastPoint&, const ForecastPoint&) = default;
};

struct ForecastResult {
  std::string element_id;
  int horizon = 0;
  Method method = Method::ses;
  /// Smoothing factor; only meaningful for ses.
  double alpha = 0.0;
  std::vector<ForecastPoint> points;
  friend bool operator==(const ForecastResult&, const ForecastResult&) = default;
};

void to_json(nlohmann::json& j, const ForecastResult& result);

/// Simple exponential smoothing: l0 = v0, lt = a*vt + (1-a)*l(t-1); every
/// step predicts the final level. Samples are treated as equally spaced.
/// Throws EmptySeries, BadAlpha (alpha outside (0,1]) or ValidationError
/// (horizon < 1).
ForecastResult ses_forecast(const store::HistorySeries& series, double alpha = kDefaultAlpha,
                            int horizon = kDefaultHorizon);

/// Least-squares line over (time, value), extrapolated. Throws
/// InsufficientHistory below two points.
ForecastResult linear_trend_forecast(const store::HistorySeries& series,
                                     int horizon = kDefaultHorizon);

struct LineFit {
  double intercept = 0.0;  // value at the first sample
  double slope = 0.0;      // per second
};

/// OLS fit against seconds elapsed since the first sample.
LineFit fit_line(const store::HistorySeries& series);

}  // namespace qfl::analytics
