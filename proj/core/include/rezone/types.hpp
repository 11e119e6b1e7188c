#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace rezone {

using LevelId = int;
using SchoolId = int;
using UnitId = int;
using StudentId = long long;

/// Error in input data. Carries file/row/field context when known.
class DataError : public std::runtime_error {
public:
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
  DataError(const std::string& file, int row, const std::string& field,
            const std::string& msg);
};

/// Semantic error: an operation was asked for something undefined
/// (empty school in a ratio objective, infeasible warm start, ...).
class ModelError : public std::runtime_error {
public:
  explicit ModelError(const std::string& msg) : std::runtime_error(msg) {}
};

// ---------------------------------------------------------------------------
// Geometry (optional on units; required only by the merge preprocessing and
// GeoJSON export)

using Point = std::array<double, 2>;
using Ring = std::vector<Point>;  // closed implicitly: last connects to first

struct Polygon {
  std::vector<Ring> rings;  // rings[0] is the outer boundary, rest are holes
};

double ring_area(const Ring& r);       // signed shoelace area
double ring_length(const Ring& r);

struct UnitGeometry {
  std::vector<Polygon> polygons;
  double area = 0.0;       // total enclosed area
  double perimeter = 0.0;  // total boundary length incl. holes
  void recompute_measures();
};

/// Isoperimetric quotient 4*pi*A/P^2; 1 for a disc, smaller for stragglier
/// shapes. Scale invariant.
double compactness_score(double area, double perimeter);

// ---------------------------------------------------------------------------
// Core entities

struct LevelSet {
  std::vector<LevelId> levels;  // strictly increasing, nonempty

  LevelId max_level() const { return levels.back(); }
  int count() const { return static_cast<int>(levels.size()); }
  int index_of(LevelId l) const;  // -1 if absent
  bool contains(LevelId l) const { return index_of(l) >= 0; }

  static LevelSet of(std::vector<LevelId> levels);  // validates
};

struct School {
  SchoolId id = 0;
  LevelId level = 0;
  long long cap_min = 0;
  long long cap_max = 0;
  long long cap_desired = 0;
  // Status-quo enrollment, derived from the planning units zoned to this
  // school in the status quo.
  long long sq_enrolled = 0;
  long long sq_group = 0;
  std::optional<UnitId> site_unit;
};

struct PlanningUnit {
  UnitId id = 0;
  LevelId level = 0;
  long long n_students = 0;
  long long n_group = 0;
  SchoolId sq_school = 0;
  std::optional<UnitGeometry> geometry;
  std::optional<Point> centroid;
};

struct Student {
  StudentId id = 0;
  LevelId level = 0;  // current level
  SchoolId sq_school = 0;
  bool in_group = false;
  // Residential planning unit per level, defined for all levels >= current.
  std::map<LevelId, UnitId> residence_units;
  // Travel miles to each school, defined at least for all same-level schools.
  std::unordered_map<SchoolId, double> distances;

  double distance_to(SchoolId s) const;  // throws ModelError if missing
};

struct AdjacencyGraph {
  struct Edge {
    UnitId a = 0, b = 0;  // normalized a < b
    std::optional<double> boundary_len;
  };
  std::vector<Edge> edges;
};

/// A complete assignment of planning units to schools, all levels at once.
/// Stored densely: school *index* per unit *index* (see Instance).
struct Zoning {
  std::vector<std::int32_t> school_by_unit;

  bool operator==(const Zoning&) const = default;
};

/// Admissible schools per unit after travel-based variable elimination.
/// Sorted school indices; the status-quo school is always a member.
struct CandidateSets {
  std::vector<std::vector<std::int32_t>> by_unit;
};

struct ConstraintConfig {
  // Travel bound, applied to every student: new distance must be at most
  // (1 + mu_ratio) * status-quo distance, and additionally within
  // status-quo distance + mu_abs when mu_abs is set.
  double mu_ratio = 1.0;
  std::optional<double> mu_abs;
  double lambda = 0.15;    // balance margin, in [0, 0.5]
  long long epsilon = 1;   // feeder pattern threshold, >= 1
  bool enforce_travel = true;
  bool enforce_capacity = true;
  bool enforce_contiguity = true;
  bool enforce_dissimilarity_bound = false;
  bool enforce_feeder_no_increase = false;

  void validate() const;  // throws DataError on invariant violation
};

// ---------------------------------------------------------------------------
// Instance: immutable district snapshot. Entity vectors are sorted by id and
// addressed by dense index everywhere downstream; finalize() builds the
// derived indexes and validates cross-references.

struct Instance {
  LevelSet level_set{{1}};
  std::vector<School> schools;    // sorted by id
  std::vector<PlanningUnit> units;
  std::vector<Student> students;
  std::vector<AdjacencyGraph> adjacency;  // parallel to level_set.levels
  Zoning sq_zoning;
  CandidateSets candidates;

  // Derived by finalize():
  std::unordered_map<SchoolId, int> school_index_by_id;
  std::unordered_map<UnitId, int> unit_index_by_id;
  std::vector<int> unit_level;    // level index per unit
  std::vector<int> school_level;  // level index per school
  std::vector<int> school_local;  // position of a school within its level
  std::vector<std::vector<int>> units_at_level;    // unit indices, id order
  std::vector<std::vector<int>> schools_at_level;  // school indices, id order
  std::vector<long long> level_students;  // |N^l| from unit counts
  std::vector<long long> level_group;     // |G^l| from unit counts
  std::vector<std::vector<int>> unit_neighbors;  // same-level, by unit index
  std::vector<std::vector<std::pair<int, int>>> level_edges;  // unit-index pairs
  // Students currently at the unit's level residing in it.
  std::vector<std::vector<int>> unit_students;
  // For unit u at level l: their residential unit index at level l+1
  // (parallel to unit_students; empty when there is no next level).
  std::vector<std::vector<int>> unit_students_next;
  // Students one level below whose residence at this unit's level is here,
  // and their residential unit index at that lower level.
  std::vector<std::vector<int>> unit_upper_students;
  std::vector<std::vector<int>> unit_upper_students_prev;
  // Status-quo connected component count per school (recorded, not asserted 1).
  std::vector<int> school_sq_components;
  // Distance aggregates for the travel objective:
  // unit_dist[u][local school] = sum over resident students of miles to it;
  // unit_dist_sq[u] = same sum to each student's status-quo school.
  std::vector<std::vector<double>> unit_dist;
  std::vector<double> unit_dist_sq;
  // candidate_mask[u][local school] - O(1) admissibility test.
  std::vector<std::vector<std::uint8_t>> candidate_mask;

  int school_index(SchoolId id) const;  // throws ModelError if unknown
  int unit_index(UnitId id) const;
  int level_index(LevelId l) const;

  int n_units() const { return static_cast<int>(units.size()); }
  int n_schools() const { return static_cast<int>(schools.size()); }

  /// Build derived indexes, compute status-quo constants, validate
  /// structural invariants. Must be called before any operation; candidate
  /// sets are installed separately via set_candidates().
  void finalize();

  void set_candidates(CandidateSets cs);

  bool is_candidate(int unit_idx, int school_idx) const {
    return candidate_mask[unit_idx][school_local[school_idx]] != 0;
  }

  /// The status-quo zoning as a fresh copy (the usual solver warm start).
  Zoning sq_copy() const { return sq_zoning; }
};

/// Connected components of the subgraph induced by `member` over the
/// same-level neighbor lists. `scratch` must be sized n_units, zeroed between
/// calls by the function itself.
int count_components(const Instance& inst, const std::vector<int>& members);

}  // namespace rezone
