#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "fame/landscape.hpp"
#include "fame/optim.hpp"

namespace fame::harness {

// Invalid configs are rejected before any experiment work starts; the
// message names the offending key.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr int kSchemaVersion = 1;

enum class EmitMode { csv, json, both };

struct DatasetSpec {
  std::string generator = "two_moons";
  int train_size = 500;
  int test_size = 500;
  double noise = 0.2;
  std::uint64_t seed = 0;
  int num_classes = 2;
};

struct NetworkSpec {
  std::vector<int> hidden = {32, 32};
  std::string activation = "relu";
};

struct SurfaceSpec {
  std::vector<landscape::Basin> basins;
  double noise_std = 0.0;
  landscape::Bounds bounds;
};

struct DescentSpec {
  landscape::Point x0;
  int steps = 1000;
};

struct TrainSpec {
  int epochs = 10;
  int batch_size = 32;
};

struct GridAxis {
  std::string param;
  std::vector<double> values;  // ranges are expanded at parse time
};

struct GridSpec {
  std::vector<GridAxis> axes;
  std::string metric = "final_test_acc";  // or "final_train_loss"
  int cell_cap = 4096;
};

struct LabeledOptimizer {
  std::string label;  // unique; defaults to the kind name, deduped
  optim::OptimizerKind kind;
};

struct ExperimentConfig {
  int schema_version = kSchemaVersion;
  std::string kind;  // landscape | train | compare | grid_search
  std::vector<LabeledOptimizer> optimizers;
  std::vector<std::uint64_t> seeds;
  std::string output_dir = "out";
  EmitMode emit = EmitMode::both;
  int threads = 1;
  std::optional<SurfaceSpec> surface;
  std::optional<DescentSpec> descent;
  std::optional<DatasetSpec> dataset;
  std::optional<NetworkSpec> network;
  std::optional<TrainSpec> train;
  std::optional<GridSpec> grid;
};

// Strict parse: unknown keys anywhere are rejected, required blocks per
// kind are enforced, and grid cell counts are checked against the cap.
ExperimentConfig parse_config(const nlohmann::json& doc);
ExperimentConfig load_config_file(const std::filesystem::path& path);

// Normalized echo of the config (defaults materialized, keys sorted on
// dump). Echoes output_dir as configured, never the resolved path, so one
// config file yields one echo regardless of output redirection.
nlohmann::json config_to_json(const ExperimentConfig& config);

nlohmann::json optimizer_to_json(const LabeledOptimizer& opt);
LabeledOptimizer parse_optimizer(const nlohmann::json& spec);

// Number of cells the grid describes (product of axis lengths).
std::size_t grid_cell_count(const GridSpec& grid);

// Returns a copy of base with axis parameters overridden by cell values.
optim::OptimizerKind apply_grid_point(const optim::OptimizerKind& base,
                                      const std::vector<GridAxis>& axes,
                                      const std::vector<double>& values);

std::string emit_mode_name(EmitMode mode);

}  // namespace fame::harness
