#include "rezone/calibration.hpp"

#include <cmath>
#include <iomanip>
#include <sstream>

#include "rezone/csv.hpp"

namespace rezone::calibration {

const Entry* CalibrationResult::find(LevelId level, Objective obj) const {
  for (const auto& e : entries)
    if (e.level == level && e.obj == obj) return &e;
  return nullptr;
}

Calibrations CalibrationResult::to_calibrations() const {
  Calibrations c;
  for (const auto& e : entries) c.set(e.level, e.obj, e.b);
  return c;
}

CalibrationResult calibrate(const Instance& inst, const std::set<Objective>& objectives,
                            const SolverParams& params) {
  CalibrationResult result;
  for (Objective obj : kAllObjectives) {
    if (!objectives.count(obj)) continue;

    // Single-objective run: b = 1 on the target, unit per-school weights,
    // the three core constraint families; the balance run additionally
    // applies the dissimilarity bound.
    ObjectiveConfig cfg;
    cfg.selected = {obj};
    cfg.calibrations = Calibrations::unit(inst.level_set, cfg.selected);
    cfg.weights = SchoolWeights::uniform();
    cfg.constraints.lambda = 0.15;
    cfg.constraints.epsilon = 1;
    cfg.constraints.enforce_dissimilarity_bound = obj == Objective::balance;
    cfg.constraints.enforce_feeder_no_increase = false;

    SolveResult run = solver::solve(inst, cfg, params);

    for (LevelId level : inst.level_set.levels) {
      std::vector<double> before = objectives::term_vector(obj, level, inst.sq_zoning,
                                                           inst, cfg.constraints);
      std::vector<double> after = objectives::term_vector(obj, level, run.best_zoning,
                                                          inst, cfg.constraints);
      Entry e;
      e.level = level;
      e.obj = obj;
      e.n_terms = static_cast<long long>(before.size());
      double sum = 0;
      for (std::size_t i = 0; i < before.size(); ++i)
        sum += std::abs(after[i] - before[i]);
      e.abs_delta = e.n_terms > 0 ? sum / static_cast<double>(e.n_terms) : 0.0;
      if (e.n_terms == 0) {
        // Structurally empty term list (no adjacency edges, say); nothing to
        // calibrate against.
        e.b = 1.0;
        e.fallback = true;
      } else if (e.abs_delta > 0) {
        e.b = 1.0 / (static_cast<double>(e.n_terms) * e.abs_delta);
      } else {
        e.b = 1.0 / static_cast<double>(e.n_terms);
        e.fallback = true;
      }
      result.entries.push_back(e);
    }
    result.source_runs.emplace(obj, std::move(run));
  }
  return result;
}

void write_table_csv(const CalibrationResult& result, const std::string& path) {
  std::vector<std::vector<std::string>> rows;
  for (const auto& e : result.entries)
    rows.push_back({std::to_string(e.level), objective_name(e.obj),
                    std::to_string(e.n_terms), csv::format_double(e.abs_delta),
                    csv::format_double(e.b), e.fallback ? "1" : "0"});
  csv::write_file(path, {"level", "objective", "n_terms", "abs_delta", "b", "fallback"},
                  rows);
}

std::string table_text(const CalibrationResult& result) {
  std::ostringstream os;
  os << "level  objective  N      |delta|        b\n";
  for (const auto& e : result.entries) {
    os << std::left << std::setw(7) << e.level << std::setw(11) << objective_name(e.obj)
       << std::setw(7) << e.n_terms << std::setw(15) << std::setprecision(6)
       << e.abs_delta << std::setprecision(6) << e.b;
    if (e.fallback) os << "  (fallback: no achievable movement)";
    os << "\n";
  }
  return os.str();
}

Calibrations load_table_csv(const std::string& path) {
  csv::Table t = csv::read_file(path);
  int c_level = t.require_col("level");
  int c_obj = t.require_col("objective");
  int c_b = t.require_col("b");
  Calibrations c;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    LevelId level = static_cast<LevelId>(t.get_int(r, c_level, "level"));
    Objective obj = parse_objective(t.field(r, c_obj));
    c.set(level, obj, t.get_double(r, c_b, "b"));
  }
  return c;
}

}  // namespace rezone::calibration
