#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "fame/config.hpp"
#include "fame/record.hpp"

namespace fame::harness {

struct RunOutcome {
  int exit_code = 0;  // 0 ok, 1 divergence or runtime failure
  std::vector<std::filesystem::path> files;
  std::string message;
};

// output_dir from the config, optionally re-rooted: when the environment
// variable FAME_OUTPUT_ROOT is set and output_dir is relative, outputs land
// under that root instead of the working directory.
std::filesystem::path resolve_output_dir(const ExperimentConfig& config);

// Executes a parsed config and writes its outputs. Dispatches on kind;
// deterministic given the config (sidecar files aside), regardless of the
// thread count.
RunOutcome run(const ExperimentConfig& config);

// Single-trial building blocks, exposed for tests and the grid runner.
RunRecord landscape_trial(const ExperimentConfig& config,
                          const optim::OptimizerKind& kind, std::uint64_t seed);
RunRecord train_trial(const ExperimentConfig& config,
                      const optim::OptimizerKind& kind, std::uint64_t seed);

}  // namespace fame::harness
