#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rezone/eval.hpp"
#include "rezone/objectives.hpp"
#include "rezone/types.hpp"

namespace rezone {

struct MoveMix {
  double reassign = 0.8;  // single-unit reassignment
  double swap = 0.2;      // adjacent cross-boundary pair swap

  void validate() const;  // probabilities must sum to 1
};

struct SolverParams {
  std::uint64_t seed = 1;
  double time_limit = 10.0;  // seconds; iteration budget is the deterministic stop
  long long max_iterations = 200'000;
  // Unset: calibrated so the median |delta| of 1,000 sampled feasible moves
  // is accepted with probability 0.5.
  std::optional<double> initial_temperature;
  double cooling_rate = 0.999;  // geometric, applied per accepted move
  MoveMix move_mix;
  bool keep_trace = true;
  // Debug mode: run the full feasibility check after every accepted move.
  bool check_feasible_each_accept = false;

  void validate() const;
};

struct TracePoint {
  long long iteration = 0;
  double objective = 0;
  double wall_seconds = 0;  // informational; not part of the determinism contract
};

struct SolveResult {
  Zoning best_zoning;
  ObjectiveBreakdown best_breakdown;
  long long iterations = 0;
  double wall_seconds = 0;
  bool proven_optimal = false;
  std::vector<TracePoint> trace;  // improvements, starting at the warm start
};

namespace solver {

/// Feasibility-preserving simulated annealing, warm-started at the status
/// quo. Deterministic given (seed, instance, config, params) when the
/// iteration budget binds before the time limit. Throws ModelError when the
/// warm start is infeasible.
SolveResult solve(const Instance& inst, const ObjectiveConfig& config,
                  const SolverParams& params);

/// Exhaustive enumeration within candidate sets; refuses when the assignment
/// space exceeds 1e7. Ties broken to the lexicographically smallest
/// assignment vector by unit id.
SolveResult enumerate_optimal(const Instance& inst, const ObjectiveConfig& config);

struct BatchRun {
  std::uint64_t seed = 0;
  std::optional<SolveResult> result;
  std::string error;  // nonempty when the run failed
};

struct BatchResult {
  std::vector<BatchRun> runs;  // in seed order
  eval::ComparisonTable metrics;
  double objective_mean = 0;
  double objective_se = 0;
  bool single_sample = false;
};

/// Independent runs, one per seed, optionally concurrent (threads = 0 reads
/// REZONE_THREADS, then hardware concurrency). Per-run failures are recorded
/// and do not stop the batch.
BatchResult batch_solve(const Instance& inst, const ObjectiveConfig& config,
                        const std::vector<std::uint64_t>& seeds,
                        const SolverParams& params, int threads = 0);

void write_trace_log(const SolveResult& result, const std::string& path);

}  // namespace solver
}  // namespace rezone
