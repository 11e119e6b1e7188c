#pragma once

#include <optional>
#include <set>
#include <string>
#include <vector>

#include "rezone/objectives.hpp"
#include "rezone/solver.hpp"
#include "rezone/types.hpp"

namespace rezone::experiment {

// The seven experiment shapes: status-quo evaluation, four single-objective
// runs, and two multi-objective runs (uniform / survey weights).
enum class Preset { none, SQ, S_TR, S_DB, S_C, S_FP, M_NW, M_SW };
const char* preset_name(Preset p);
Preset parse_preset(const std::string& name);  // throws DataError

enum class WeightMode { uniform, survey_file };
enum class CalibrationMode { unit, compute, from_file };

struct ExperimentConfig {
  std::string name = "experiment";
  Preset preset = Preset::none;
  std::set<Objective> objectives;
  WeightMode weight_mode = WeightMode::uniform;
  std::string weights_file;  // relative to the data dir unless absolute
  ConstraintConfig constraints;
  bool derive_capacity_bounds = false;
  std::vector<std::uint64_t> seeds = {1};
  SolverParams solver;
  CalibrationMode calibration_mode = CalibrationMode::unit;
  std::string calibration_file;
  bool write_geojson = false;
  bool write_trace = false;

  void validate() const;  // throws DataError (e.g. survey mode without a file)
};

/// Baseline config for a preset; a config file starts from its preset's
/// defaults and may override any key.
ExperimentConfig preset_config(Preset p);

/// Parse the key-value config format (see README). Errors carry line numbers.
ExperimentConfig parse_config_file(const std::string& path);
ExperimentConfig parse_config_text(const std::string& text, const std::string& name);

struct RunOutcome {
  int exit_code = 0;
  std::string message;
};

/// End-to-end experiment: load, weights, calibration, evaluate or batch
/// solve, write artifacts + manifest under out_dir.
RunOutcome run(const ExperimentConfig& config, const std::string& data_dir,
               const std::string& out_dir, bool quiet = true);

RunOutcome run_config_file(const std::string& config_path, const std::string& data_dir,
                           const std::string& out_dir, bool quiet = true,
                           std::optional<int> override_seed_count = {},
                           std::optional<double> override_time_limit = {});

/// FNV-1a 64-bit content hash used in the artifact manifest.
std::uint64_t fnv1a64_file(const std::string& path);

}  // namespace rezone::experiment
