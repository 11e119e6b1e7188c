#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "rezone/objectives.hpp"
#include "rezone/solver.hpp"
#include "rezone/types.hpp"

namespace rezone::calibration {

struct Entry {
  LevelId level = 0;
  Objective obj = Objective::distance;
  long long n_terms = 0;
  double abs_delta = 0;  // mean |term_after - term_sq| over all terms
  double b = 0;          // 1 / (n_terms * abs_delta), fallback 1/n_terms
  bool fallback = false;  // no achievable movement (abs_delta == 0)
};

struct CalibrationResult {
  std::vector<Entry> entries;  // level-major, objective order
  std::map<Objective, SolveResult> source_runs;

  const Entry* find(LevelId level, Objective obj) const;
  Calibrations to_calibrations() const;
};

/// One single-objective solve per objective (unit weights, b = 1 on the
/// target), then b_{l,obj} from per-term movement vs the status quo. The
/// balance run additionally applies the dissimilarity bound.
CalibrationResult calibrate(const Instance& inst, const std::set<Objective>& objectives,
                            const SolverParams& params);

void write_table_csv(const CalibrationResult& result, const std::string& path);
std::string table_text(const CalibrationResult& result);
Calibrations load_table_csv(const std::string& path);

}  // namespace rezone::calibration
