#pragma once

#include <string>
#include <vector>

#include "rezone/objectives.hpp"
#include "rezone/types.hpp"

namespace rezone::constraints {

enum class Family { travel, capacity, contiguity, dissimilarity_bound, feeder_no_increase };
const char* family_name(Family f);

struct Violation {
  Family family = Family::travel;
  long long entity = 0;  // student id, school id, or level id by family
  double measured = 0;
  double bound = 0;
};

struct FeasibilityReport {
  bool ok = true;
  std::vector<Violation> violations;

  std::string to_text() const;
  // Machine-readable rows: family, entity, measured, bound.
  std::vector<std::vector<std::string>> to_rows() const;
};

/// Per-student travel bound vs the status-quo distance.
std::vector<Violation> check_travel(const Zoning& z, const Instance& inst,
                                    const ConstraintConfig& config);

/// o_min <= o_s <= o_max for every school.
std::vector<Violation> check_capacity(const Zoning& z, const Instance& inst);

/// Per school at the level: component count of its assigned units must not
/// exceed its status-quo component count. Empty schools are skipped (they
/// surface under capacity).
std::vector<Violation> check_contiguity(const Zoning& z, const Instance& inst,
                                        LevelId level);

/// d_s <= max(lambda, signed status-quo deviation of s).
std::vector<Violation> check_dissimilarity_bound(const Zoning& z, const Instance& inst,
                                                 const ConstraintConfig& config);

/// Feeder pattern count per level must not exceed the status-quo count.
std::vector<Violation> check_feeder_no_increase(const Zoning& z, const Instance& inst,
                                                const ConstraintConfig& config);

/// Union of the families active under the config. The dissimilarity bound is
/// checked only when balance is a selected objective and the toggle is on;
/// feeder_no_increase only when its toggle is on.
FeasibilityReport check_feasible(const Zoning& z, const Instance& inst,
                                 const ObjectiveConfig& config);

}  // namespace rezone::constraints
