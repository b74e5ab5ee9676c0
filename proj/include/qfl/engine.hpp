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
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "qfl/alerting.hpp"
#include "qfl/analytics.hpp"
#include "qfl/backlog.hpp"
#include "qfl/catalogue.hpp"
#include "qfl/ingestion.hpp"
#include "qfl/model.hpp"
#include "qfl/store.hpp"
#include "qfl/workflow.hpp"

namespace qfl::engine {

/// Workspace settings. Relative paths are resolved against the directory
/// holding the config file.
struct Config {
  std::filesystem::path base_dir;
  std::filesystem::path model_path;
  std::filesystem::path catalogue_path;
  std::filesystem::path thresholds_path;
  std::filesystem::path store_path;
  std::string backlog_url = "file:backlog.jsonl";
  std::string backlog_token;
  workflow::QflOptions qfl;
  std::string host = "127.0.0.1";
  int port = 8080;
  double forecast_alpha = analytics::kDefaultAlpha;
  int forecast_horizon = analytics::kDefaultHorizon;
  /// Shared secret required by the service when non-empty.
  std::string api_secret;
  bool durable = true;
};

inline constexpr std::string_view kConfigFileName = "qfl.config";

/// Reads a config document. QFL_BACKLOG_TOKEN and QFL_API_SECRET fill the
/// secrets. Throws Error{ConfigError}.
Config load_config(const std::filesystem::path& path);
Config config_from_json(const nlohmann::json& doc, const std::filesystem::path& base_dir);

/// --config flag, then QFL_CONFIG, then ./qfl.config.
std::filesystem::path discover_config(const std::optional<std::string>& flag);

/// Writes the bundled example workspace into `dir`; existing files are kept.
/// Returns {written: [...], skipped: [...]}.
nlohmann::json init_workspace(const std::filesystem::path& dir);

struct Page {
  std::size_t limit = 100;
  std::size_t offset = 0;
};

/// Facade used by both the HTTP service and the C API. Every operation
/// returns the JSON body that the service sends for the same request.
class Engine {
 public:
  explicit Engine(Config config);
  ~Engine();
  Engine(const Engine&) = delete;
  Engine& operator=(const Engine&) = delete;

  const Config& config() const noexcept { return config_; }
  const model::QualityModel& model() const noexcept { return model_; }
  const catalogue::Catalogue& catalogue() const noexcept { return catalogue_; }
  store::Store& store() noexcept { return *store_; }
  workflow::Workflow& workflow() noexcept { return *workflow_; }

  nlohmann::json model_json() const;
  nlohmann::json catalogue_json() const;
  nlohmann::json thresholds_json() const;

  /// Validates and stores a snapshot as the latest one of its source.
  nlohmann::json ingest(std::string_view document,
                        std::optional<SourceKind> expected = std::nullopt);
  /// Evaluates the model from the stored snapshots and the QR records,
  /// appends the points and checks thresholds.
  nlohmann::json assess(std::optional<Timestamp> at = std::nullopt);
  nlohmann::json latest_assessment() const;
  nlohmann::json indicators() const;
  nlohmann::json history(std::string_view element_id, Timestamp from = kMinTimestamp,
                         Timestamp to = kMaxTimestamp) const;
  nlohmann::json events(const store::EventQuery& query = {}) const;

  nlohmann::json alerts(std::optional<alerting::AlertState> state = std::nullopt,
                        Page page = {}) const;
  nlohmann::json acknowledge(std::string_view alert_id);
  nlohmann::json candidates(std::string_view alert_id) const;

  nlohmann::json suggest(std::string_view alert_id, std::string_view pattern,
                         const catalogue::ParamMap& params);
  nlohmann::json qrs(std::optional<workflow::QRState> state = std::nullopt,
                     Page page = {}) const;
  nlohmann::json qr(std::string_view qr_id) const;
  /// stage "qe" or "pm"; an empty stage is inferred from the QR state.
  nlohmann::json decide(std::string_view qr_id, std::string_view stage,
                        std::string_view decision, const std::string& rationale);
  nlohmann::json export_qr(std::string_view qr_id);
  nlohmann::json derive(std::string_view qr_id, const std::string& subject);
  /// Uses `snapshot` (a backlog snapshot document) or, when absent, the
  /// backlog's current content.
  nlohmann::json sync(const std::optional<nlohmann::json>& snapshot = std::nullopt);
  nlohmann::json qfl() const;

  /// Overrides: {element_id: value}. Baseline is the latest observed metric
  /// values.
  nlohmann::json whatif(const nlohmann::json& overrides) const;
  nlohmann::json forecast(std::string_view element_id, analytics::Method method,
                          std::optional<int> horizon = std::nullopt,
                          std::optional<double> alpha = std::nullopt) const;

  std::string export_csv() const;

 private:
  class StoreJournal;

  void sync_thresholds(Timestamp now);
  std::vector<ingest::SourceSnapshot> snapshots() const;

  Config config_;
  model::QualityModel product_model_;
  model::QualityModel model_;
  catalogue::Catalogue catalogue_;
  std::vector<alerting::Threshold> thresholds_;
  std::unique_ptr<store::Store> store_;
  std::unique_ptr<backlog::BacklogClient> backlog_;
  std::unique_ptr<StoreJournal> journal_;
  std::unique_ptr<workflow::Workflow> workflow_;
  mutable std::shared_mutex mutex_;
  alerting::AlertBook alerts_;
};

}  // namespace qfl::engine
