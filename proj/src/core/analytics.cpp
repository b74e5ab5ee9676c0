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

#include "qfl/analytics.hpp"

#include <algorithm>
#include <chrono>

#include "qfl/error.hpp"

namespace qfl::analytics {

using nlohmann::json;

namespace {

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

double seconds_between(Timestamp a, Timestamp b) {
  return std::chrono::duration<double>(b - a).count();
}

void check_horizon(int horizon) {
  if (horizon < 1) {
    throw Error(Errc::ValidationError, "horizon must be a positive number of steps",
                {{"field", "horizon"}, {"horizon", horizon}});
  }
}

// Future points are spaced by the mean sample spacing (one day for a
// single sample).
std::vector<Timestamp> future_steps(const store::HistorySeries& series, int horizon) {
  const auto& pts = series.points;
  Timestamp::duration step = std::chrono::hours(24);
  if (pts.size() >= 2) {
    step = (pts.back().timestamp - pts.front().timestamp) /
           static_cast<Timestamp::rep>(pts.size() - 1);
    if (step <= Timestamp::duration::zero()) step = std::chrono::hours(24);
  }
  std::vector<Timestamp> out;
  for (int k = 1; k <= horizon; ++k) out.push_back(pts.back().timestamp + step * k);
  return out;
}

}  // namespace

std::string_view to_string(Method method) noexcept {
  return method == Method::ses ? "ses" : "linear_trend";
}

Method parse_method(std::string_view name) {
  if (name == "ses") return Method::ses;
  if (name == "trend" || name == "linear_trend") return Method::linear_trend;
  throw Error(Errc::BadRequest, "unknown forecast method '" + std::string(name) + "'",
              {{"field", "method"}});
}

void to_json(json& j, const ForecastResult& r) {
  json points = json::array();
  for (const auto& p : r.points) {
    points.push_back({{"timestamp", format_rfc3339(p.timestamp)}, {"value", p.value}});
  }
  json params = json::object();
  if (r.method == Method::ses) params["alpha"] = r.alpha;
  j = json{{"element_id", r.element_id},
           {"horizon", r.horizon},
           {"method", to_string(r.method)},
           {"params", params},
           {"points", points}};
}

ForecastResult ses_forecast(const store::HistorySeries& series, double alpha, int horizon) {
  if (!(alpha > 0.0 && alpha <= 1.0)) {
    throw Error(Errc::BadAlpha, "alpha must lie in (0,1]", {{"alpha", alpha}});
  }
  check_horizon(horizon);
  if (series.points.empty()) {
    throw Error(Errc::EmptySeries, "no history for '" + series.element_id + "'",
                {{"element", series.element_id}});
  }
  double level = series.points.front().value;
  for (std::size_t i = 1; i < series.points.size(); ++i) {
    level = alpha * series.points[i].value + (1.0 - alpha) * level;
  }
  ForecastResult result{series.element_id, horizon, Method::ses, alpha, {}};
  for (auto t : future_steps(series, horizon)) result.points.push_back({t, clamp01(level)});
  return result;
}

LineFit fit_line(const store::HistorySeries& series) {
  const auto& pts = series.points;
  if (pts.size() < 2) {
    throw Error(Errc::InsufficientHistory,
                "a trend needs at least two points for '" + series.element_id + "'",
                {{"element", series.element_id}, {"points", pts.size()}});
  }
  const Timestamp t0 = pts.front().timestamp;
  const double n = static_cast<double>(pts.size());
  double mean_x = 0.0, mean_y = 0.0;
  for (const auto& p : pts) {
    mean_x += seconds_between(t0, p.timestamp);
    mean_y += p.value;
  }
  mean_x /= n;
  mean_y /= n;
  double sxx = 0.0, sxy = 0.0;
  for (const auto& p : pts) {
    const double dx = seconds_between(t0, p.timestamp) - mean_x;
    sxx += dx * dx;
    sxy += dx * (p.value - mean_y);
  }
  LineFit fit;
  fit.slope = sxx > 0.0 ? sxy / sxx : 0.0;
  fit.intercept = mean_y - fit.slope * mean_x;
  return fit;
}

ForecastResult linear_trend_forecast(const store::HistorySeries& series, int horizon) {
  check_horizon(horizon);
  const LineFit fit = fit_line(series);
  const Timestamp t0 = series.points.front().timestamp;
  ForecastResult result{series.element_id, horizon, Method::linear_trend, 0.0, {}};
  for (auto t : future_steps(series, horizon)) {
    result.points.push_back({t, clamp01(fit.intercept + fit.slope * seconds_between(t0, t))});
  }
  return result;
}

}  // namespace qfl::analytics
