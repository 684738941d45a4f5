#pragma once

// Stage runner: simulate -> render -> features -> train -> eval. Each stage
// reads its inputs from the output directory, so stages can be rerun alone.
//
// Layout under the output directory:
//   scenarios.csv
//   loci/<dataset>/<scenario_id>.csv
//   images/<dataset>/<scenario_id>.pgm
//   features.csv
//   models/<dataset>/<model>.model   (or <model>.failed with the reason)
//   report.json, table_rmse.csv, table_best.csv, plot_actual_vs_pred.csv
//   manifest.json

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mtlfault/config.hpp"

namespace mtlfault {

inline constexpr const char* kToolVersion = "0.3.0";

enum class Stage { kSimulate, kRender, kFeatures, kTrain, kEval };

std::string to_string(Stage s);
Stage stage_from_string(const std::string& s);
std::vector<Stage> all_stages();
/// Comma-separated stage names, returned in pipeline order without duplicates.
std::vector<Stage> parse_stages(const std::string& list);

struct StageRecord {
  Stage stage = Stage::kSimulate;
  std::vector<std::string> artifacts;  // relative to the output directory
  double seconds = 0.0;
};

struct RunManifest {
  std::string tool_version = kToolVersion;
  std::string config_hash;
  std::uint64_t seed = 0;
  std::vector<std::string> warnings;
  std::vector<StageRecord> stages;
  /// FNV-1a 64 over every listed artifact (path and bytes), in path order.
  std::string content_hash;
};

struct ScenarioRow {
  std::string id;
  std::string dataset;
  std::size_t section = 0;
  double distance_km = 0.0;
  double absolute_km = 0.0;
  double zf_ohm = 0.0;
};

struct FeatureRow {
  std::string id;
  std::string dataset;
  std::size_t section = 0;
  double distance_km = 0.0;
  double target_norm = 0.0;
  FeatureVector f{};
};

/// "<dataset>_<NNN>"; the dataset is everything before the last underscore.
std::string scenario_id(const std::string& dataset, std::size_t k);
std::string dataset_of(const std::string& id);

std::vector<ScenarioRow> read_scenarios_csv(const std::filesystem::path& path);
std::vector<FeatureRow> read_features_csv(const std::filesystem::path& path);
std::string features_csv(const std::vector<FeatureRow>& rows);

/// Workers for scenario-level loops: MTLFAULT_THREADS if set, else hardware
/// concurrency. Outputs never depend on it.
unsigned worker_count();

/// Runs `stages` (in pipeline order) into `out` and writes manifest.json.
RunManifest run_pipeline(const PipelineConfig& cfg, const std::vector<Stage>& stages,
                         const std::filesystem::path& out);

std::string manifest_json(const RunManifest& m);

}  // namespace mtlfault
