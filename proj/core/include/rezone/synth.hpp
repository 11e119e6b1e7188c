#pragma once

#include <cstdint>
#include <vector>

#include "rezone/types.hpp"

namespace rezone::synth {

struct SynthParams {
  int rows = 10;
  int cols = 10;
  std::vector<LevelId> levels = {1, 2};
  std::vector<int> schools_per_level = {4, 2};
  long long students_min = 8;
  long long students_max = 12;
  double group_fraction = 0.3;
  double clustering = 0.3;  // spatial autocorrelation of group membership, [0, 1]
  std::uint64_t seed = 1;
  // Stale-boundary knob: grows the status quo toward displaced school sites
  // (plus boundary jitter) instead of the true ones, leaving the baseline
  // realistically suboptimal on every metric. 0 = grow by true distance.
  double sq_distortion = 0.0;
  // Capacity band around status-quo enrollment; desired is the level average
  // clamped into the band.
  double cap_slack_low = 0.6;
  double cap_slack_high = 1.5;

  void validate() const;
};

/// Deterministic synthetic district on a grid: 4-neighborhood adjacency,
/// schools at spread sites, status quo grown contiguously with load
/// balancing, group membership sampled with controlled clustering, distances
/// from cell centers with a 1.3 road factor. Candidate sets are installed for
/// the default ConstraintConfig; recompute them for other travel bounds.
Instance generate(const SynthParams& params);

}  // namespace rezone::synth
