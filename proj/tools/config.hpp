#pragma once

// Experiment configuration: a YAML document whose keys mirror BenchSpec and
// StrategySpec. Unknown keys are rejected with their line number.

#include <string>
#include <vector>

#include "rert/analytics.hpp"
#include "rert/synthbench.hpp"

namespace rert::cli {

struct ConfigError : InvalidInput {
  using InvalidInput::InvalidInput;
};

struct StrategyEntry {
  std::string name;
  StrategySpec spec;
};

struct SweepEntry {
  std::string strategy;  // name of a StrategyEntry
  SweepAxis axis = SweepAxis::steps;
  std::vector<std::string> values;
};

struct ExperimentConfig {
  BenchSpec bench;  // bench.seed is the experiment seed
  std::vector<StrategyEntry> strategies;
  std::vector<SweepEntry> sweeps;
  std::string output_dir = "rert-out";
  bool retain_trajectories = true;
  bool per_step_transitions = false;
  int threads = 1;

  /// Throws ConfigError.
  void validate() const;
};

/// base, mode_finding, kernel_regression, ngd and oracle_gd at their defaults.
ExperimentConfig default_config();

/// origin names the document in error messages.
ExperimentConfig parse_config(const std::string& text, const std::string& origin);
ExperimentConfig load_config(const std::string& path);

/// Every field written out, so the result parses back to the same config.
std::string emit_config(const ExperimentConfig& config);

}  // namespace rert::cli
