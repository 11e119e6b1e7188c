#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rezone/types.hpp"

namespace rezone {

struct InstancePaths {
  std::string schools;
  std::string units;
  std::string students;
  std::string distances;
  std::string adjacency;
  std::optional<std::string> geojson;

  /// Standard filenames under a data directory (schools.csv, units.csv,
  /// students.csv, distances.csv, adjacency.csv, units.geojson if present).
  static InstancePaths in_dir(const std::string& dir);
};

struct LoadOptions {
  // Reinterpret the cap_max column as raw serviceable capacity and derive
  // bounds as max(sq, serviceable) / floor(0.85 * min(sq, serviceable)).
  bool derive_capacity_bounds = false;
};

/// Ingest the CSV inputs, cross-link, validate referential integrity, and
/// populate candidate sets via eliminate_candidates.
Instance load_instance(const InstancePaths& paths, const ConstraintConfig& config,
                       const LoadOptions& options = {});

/// Write an instance back out in the standard CSV schemas (plus GeoJSON when
/// geometry is present). Deterministic: rows sorted by id.
void save_instance(const Instance& inst, const std::string& dir);

/// Travel-based variable elimination: school s is admissible for unit p iff
/// every resident student satisfies the travel bound; the status-quo school
/// is always retained.
CandidateSets eliminate_candidates(const Instance& inst, const ConstraintConfig& config);

/// For each unit with >= 3 neighbors (ascending id order), drop its
/// shortest-shared-boundary edge unless that would isolate either endpoint.
AdjacencyGraph prune_weak_edges(const AdjacencyGraph& graph);

struct MergeResult {
  std::vector<PlanningUnit> units;
  AdjacencyGraph graph;
  std::map<UnitId, UnitId> merged_into;  // absorbed id -> surviving id
  bool reached_target = true;
};

/// Greedy compactness-driven merging of one level's units: repeatedly merge
/// the lowest-scoring unit into the same-sq-school neighbor that maximizes
/// the merged score. Requires geometry on every unit and boundary lengths on
/// every edge.
MergeResult merge_units_greedy(std::vector<PlanningUnit> units, AdjacencyGraph graph,
                               std::size_t target_count);

}  // namespace rezone
