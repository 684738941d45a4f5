#pragma once

// Pipeline configuration: a JSON document (comments allowed) whose every
// key has a default. Unknown keys are rejected with their full path.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mtlfault/evaluation.hpp"
#include "mtlfault/fault_simulator.hpp"
#include "mtlfault/glcm_features.hpp"
#include "mtlfault/models.hpp"
#include "mtlfault/relay_model.hpp"
#include "mtlfault/rx_raster.hpp"

namespace mtlfault {

/// A fault-distance grid inside one section, rendered with its own window.
struct DatasetConfig {
  std::string name;
  std::size_t section = 0;
  double start_km = 0.0;
  double step_km = 0.0;
  std::size_t count = 0;
  std::optional<ViewWindow> window;  // empty: the render window
  /// Fit the window to the fault points at the first and last grid distance.
  bool auto_window = false;
};

struct RenderConfig {
  int width = 512;
  int height = 512;
  ViewWindow window;
  bool draw_zones = true;
  /// Padding of an automatic window, as a fraction of its larger side.
  double auto_margin = 0.1;
};

struct GlcmConfig {
  int levels = 8;
  std::vector<GlcmOffset> offsets = default_offsets();
  bool symmetric = true;
};

struct SplitConfig {
  SplitPolicy policy = SplitPolicy::kSystematic;
  std::size_t test_every = 5;
};

struct RelayConfig {
  int samples_per_cycle = 20;
  int prefault_cycles = 2;
  int fault_cycles = 4;
  double zone1_reach = 0.8;
  double zone2_reach = 1.2;
};

struct PipelineConfig {
  std::uint64_t seed = 1;
  std::string output_dir = "out";
  MixedLineSpec line = MixedLineSpec::default_route();
  double zf_ohm = 1.0;
  std::vector<DatasetConfig> datasets;
  RelayConfig relay;
  RenderConfig render;
  GlcmConfig glcm;
  SplitConfig split;
  std::vector<ModelConfig> models;
  /// Non-fatal findings (parameter ratios outside the usual range).
  std::vector<std::string> warnings;

  RelaySettings relay_settings() const;
  /// Explicit, automatic or render-wide window of a dataset.
  ViewWindow window_for(const DatasetConfig& d) const;
  const DatasetConfig& dataset(const std::string& name) const;

  /// Defaults: the two-source mixed line, OHL and UGC grids, full roster.
  static PipelineConfig defaults();
};

/// The 17-model roster: six networks (feed-forward and cascade, each with
/// LM, SCG, GDX) and eleven regression models.
std::vector<ModelConfig> default_roster();

/// Parses JSON text. ValidationError messages name the offending key path;
/// syntax errors carry the line number.
PipelineConfig parse_config(const std::string& text);
PipelineConfig load_config(const std::filesystem::path& path);

/// Cross-field checks; fills `warnings`.
void validate(PipelineConfig& cfg);

/// Fully resolved configuration as JSON, every default spelled out.
std::string to_json(const PipelineConfig& cfg, bool include_output_dir = true);

/// FNV-1a 64 over the resolved JSON without output_dir, as 16 hex digits.
std::string config_hash(const PipelineConfig& cfg);

}  // namespace mtlfault
