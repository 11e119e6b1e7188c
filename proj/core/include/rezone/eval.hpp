#pragma once

#include <optional>
#include <string>
#include <vector>

#include "rezone/objectives.hpp"
#include "rezone/types.hpp"

namespace rezone::eval {

struct LevelMetrics {
  LevelId level = 0;
  double avg_driving_miles = 0;
  double district_dissimilarity = 0;  // meaningless when !dissimilarity_defined
  bool dissimilarity_defined = true;
  std::optional<long long> feeder_count;  // absent at the top level
  long long rezoned_students = 0;
  long long rezoned_group_students = 0;
  long long rezoned_units = 0;
  double pct_students = 0;  // rounded to 2 decimals
  double pct_group_students = 0;
  double pct_units = 0;
  long long total_students = 0;
  long long total_group_students = 0;
  long long total_units = 0;
};

struct MetricsReport {
  std::vector<LevelMetrics> levels;

  const LevelMetrics& at(LevelId level) const;  // throws ModelError
};

MetricsReport evaluate(const Zoning& z, const Instance& inst,
                       const ObjectiveConfig& config);

/// Unweighted district dissimilarity index in [0, 1]; `defined` is false when
/// the level has no group students or only group students.
double district_dissimilarity(const Zoning& z, const Instance& inst, LevelId level,
                              bool& defined);

/// zoning.csv: unit_id, level, school_id, sq_school_id, changed. Sorted by
/// unit id; byte-deterministic.
void export_zoning_csv(const Zoning& z, const Instance& inst, const std::string& path);

/// GeoJSON FeatureCollection with assignment + change flag per unit. Requires
/// geometry; byte-deterministic.
void export_geojson(const Zoning& z, const Instance& inst, const std::string& path);

std::string metrics_json(const MetricsReport& report);
void write_metrics_json(const MetricsReport& report, const std::string& path);

struct RunForComparison {
  const Zoning* zoning = nullptr;
  double objective = 0;
  bool proven_optimal = false;
};

struct ComparisonTable {
  struct Row {
    LevelId level = 0;
    std::string metric;
    double mean = 0;
    double se = 0;  // 0 with single_sample flag when n == 1
    int n = 0;
    bool from_optimal = false;  // row reports the optimal run alone
  };
  std::vector<Row> rows;
  bool single_sample = false;

  const Row* find(LevelId level, const std::string& metric) const;
};

/// Mean and standard error of every evaluation metric across runs, one
/// sub-table per level. When any run is proven optimal, that run is reported
/// alone.
ComparisonTable compare_runs(const std::vector<RunForComparison>& runs,
                             const Instance& inst, const ObjectiveConfig& config);

void write_comparison_csv(const ComparisonTable& table, const std::string& path);
std::string comparison_text(const ComparisonTable& table);

}  // namespace rezone::eval
