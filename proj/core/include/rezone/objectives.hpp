#pragma once

#include <array>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "rezone/types.hpp"

namespace rezone {

enum class Objective { distance, balance, compact, feeder, capacity };

constexpr std::array<Objective, 5> kAllObjectives = {
    Objective::distance, Objective::balance, Objective::compact,
    Objective::feeder, Objective::capacity};

const char* objective_name(Objective o);
Objective parse_objective(const std::string& name);  // throws DataError

/// Per-school importance weights. Defaults to 1 for every (school,
/// objective); survey-derived weights are normalized triples over
/// {distance, balance, feeder}. Compactness never carries a weight.
class SchoolWeights {
public:
  static SchoolWeights uniform() { return SchoolWeights{}; }

  double get(SchoolId school, Objective obj) const;
  void set(SchoolId school, Objective obj, double w);

  bool survey_mode() const { return survey_mode_; }
  void set_survey_mode(bool v) { survey_mode_ = v; }

  /// In survey mode, checks sum over {distance, balance, feeder} == 1 +- 1e-9
  /// for every school of the instance. Throws DataError.
  void validate(const Instance& inst) const;

  static SchoolWeights load_csv(const std::string& path);
  void save_csv(const std::string& path) const;

  const std::map<std::pair<SchoolId, int>, double>& entries() const { return w_; }

private:
  std::map<std::pair<SchoolId, int>, double> w_;  // key: (school, objective idx)
  bool survey_mode_ = false;
};

/// Calibration scalings b_{l,obj}. An entry must exist for every
/// (level, selected objective) used in a total; unit() fills ones.
struct Calibrations {
  std::map<std::pair<LevelId, int>, double> b;

  static Calibrations unit(const LevelSet& levels, const std::set<Objective>& objs);

  bool has(LevelId l, Objective o) const;
  double get(LevelId l, Objective o) const;  // throws ModelError when absent
  void set(LevelId l, Objective o, double v);
};

struct ObjectiveConfig {
  std::set<Objective> selected;
  Calibrations calibrations;
  SchoolWeights weights;
  ConstraintConfig constraints;

  bool has(Objective o) const { return selected.count(o) > 0; }
};

struct ObjectiveBreakdown {
  struct Entry {
    LevelId level = 0;
    Objective obj = Objective::distance;
    double raw = 0;         // f_obj(l); NaN when undefined for a diagnostic row
    double calibrated = 0;  // b * raw, 0 when not selected
    bool in_total = false;
    // Weighted per-school contributions (school id, value); empty for
    // compactness, whose granularity is per adjacency edge.
    std::vector<std::pair<SchoolId, double>> terms;
  };
  std::vector<Entry> entries;
  double total = 0;

  const Entry* find(LevelId level, Objective obj) const;
};

namespace objectives {

struct SchoolCounts {
  std::vector<long long> enrolled;  // o_s by school index
  std::vector<long long> group;     // o^g_s
};
SchoolCounts school_counts(const Zoning& z, const Instance& inst);

/// Sum over schools of w_s * (assigned miles) / (status-quo miles), both
/// summed over the students zoned to the school.
double travel_distance_ratio(const Zoning& z, const Instance& inst, LevelId level,
                             const SchoolWeights& w);

/// Sum over schools of w_s * |1 - o_s / o*_s|.
double capacity_objective(const Zoning& z, const Instance& inst, LevelId level,
                          const SchoolWeights& w);

/// Sum over schools of w_s * max(d_s, lambda) with d_s the school's absolute
/// deviation from the level-wide group share.
double balance_objective(const Zoning& z, const Instance& inst, LevelId level,
                         const SchoolWeights& w, double lambda);

/// Number of adjacency edges whose endpoints are assigned different schools.
long long edge_cut_compactness(const Zoning& z, const Instance& inst, LevelId level);

struct FeederPatterns {
  long long count = 0;
  double weighted = 0;
};

/// Active lower->upper school transitions followed by at least epsilon
/// students, determined at student level. Zero at the top level.
FeederPatterns feeder_patterns(const Zoning& z, const Instance& inst, LevelId level,
                               long long epsilon, const SchoolWeights& w);

ObjectiveBreakdown total_objective(const Zoning& z, const Instance& inst,
                                   const ObjectiveConfig& config);

/// Unweighted per-term values at calibration granularity: one value per
/// school at the level (per adjacency edge for compactness). Used to measure
/// per-term movement between two zonings.
std::vector<double> term_vector(Objective obj, LevelId level, const Zoning& z,
                                const Instance& inst, const ConstraintConfig& config);

}  // namespace objectives
}  // namespace rezone
