#include "rezone/constraints.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "rezone/objectives.hpp"

namespace rezone::constraints {

const char* family_name(Family f) {
  switch (f) {
    case Family::travel: return "travel";
    case Family::capacity: return "capacity";
    case Family::contiguity: return "contiguity";
    case Family::dissimilarity_bound: return "dissimilarity_bound";
    case Family::feeder_no_increase: return "feeder_no_increase";
  }
  return "?";
}

std::vector<Violation> check_travel(const Zoning& z, const Instance& inst,
                                    const ConstraintConfig& config) {
  std::vector<Violation> out;
  for (const Student& st : inst.students) {
    int u = inst.unit_index_by_id.at(st.residence_units.at(st.level));
    SchoolId assigned = inst.schools[z.school_by_unit[u]].id;
    double d = st.distance_to(assigned);
    double base = st.distance_to(st.sq_school);
    double bound = (1.0 + config.mu_ratio) * base;
    if (config.mu_abs) bound = std::min(bound, base + *config.mu_abs);
    if (d > bound) out.push_back({Family::travel, st.id, d, bound});
  }
  return out;
}

std::vector<Violation> check_capacity(const Zoning& z, const Instance& inst) {
  std::vector<Violation> out;
  auto counts = objectives::school_counts(z, inst);
  for (int sc = 0; sc < inst.n_schools(); ++sc) {
    const School& s = inst.schools[sc];
    long long o = counts.enrolled[sc];
    if (o < s.cap_min)
      out.push_back({Family::capacity, s.id, static_cast<double>(o),
                     static_cast<double>(s.cap_min)});
    else if (o > s.cap_max)
      out.push_back({Family::capacity, s.id, static_cast<double>(o),
                     static_cast<double>(s.cap_max)});
  }
  return out;
}

std::vector<Violation> check_contiguity(const Zoning& z, const Instance& inst,
                                        LevelId level) {
  std::vector<Violation> out;
  int li = inst.level_index(level);
  std::vector<std::vector<int>> members(inst.schools.size());
  for (int u : inst.units_at_level[li]) members[z.school_by_unit[u]].push_back(u);
  for (int sc : inst.schools_at_level[li]) {
    if (members[sc].empty()) continue;  // reported under capacity
    int comps = count_components(inst, members[sc]);
    if (comps > inst.school_sq_components[sc])
      out.push_back({Family::contiguity, inst.schools[sc].id, static_cast<double>(comps),
                     static_cast<double>(inst.school_sq_components[sc])});
  }
  return out;
}

std::vector<Violation> check_dissimilarity_bound(const Zoning& z, const Instance& inst,
                                                 const ConstraintConfig& config) {
  std::vector<Violation> out;
  auto counts = objectives::school_counts(z, inst);
  for (int sc = 0; sc < inst.n_schools(); ++sc) {
    const School& s = inst.schools[sc];
    if (counts.enrolled[sc] == 0) continue;  // reported under capacity
    int li = inst.school_level[sc];
    double share = static_cast<double>(inst.level_group[li]) /
                   static_cast<double>(inst.level_students[li]);
    double d = std::abs(static_cast<double>(counts.group[sc]) /
                            static_cast<double>(counts.enrolled[sc]) -
                        share);
    // Bound: no deviating further from the district share than the school
    // already does in the status quo, with a lambda floor. Keeps the warm
    // start feasible for schools on either side of the district share.
    double sq_dev = std::abs(static_cast<double>(s.sq_group) /
                                 static_cast<double>(s.sq_enrolled) -
                             share);
    double bound = std::max(config.lambda, sq_dev);
    if (d > bound) out.push_back({Family::dissimilarity_bound, s.id, d, bound});
  }
  return out;
}

std::vector<Violation> check_feeder_no_increase(const Zoning& z, const Instance& inst,
                                                const ConstraintConfig& config) {
  std::vector<Violation> out;
  SchoolWeights unit_w = SchoolWeights::uniform();
  for (int li = 0; li + 1 < inst.level_set.count(); ++li) {
    LevelId level = inst.level_set.levels[li];
    long long now =
        objectives::feeder_patterns(z, inst, level, config.epsilon, unit_w).count;
    long long sq = objectives::feeder_patterns(inst.sq_zoning, inst, level,
                                               config.epsilon, unit_w)
                       .count;
    if (now > sq)
      out.push_back({Family::feeder_no_increase, level, static_cast<double>(now),
                     static_cast<double>(sq)});
  }
  return out;
}

FeasibilityReport check_feasible(const Zoning& z, const Instance& inst,
                                 const ObjectiveConfig& config) {
  FeasibilityReport report;
  const ConstraintConfig& cc = config.constraints;
  auto add = [&](std::vector<Violation> v) {
    report.violations.insert(report.violations.end(), v.begin(), v.end());
  };
  if (cc.enforce_travel) add(check_travel(z, inst, cc));
  if (cc.enforce_capacity) add(check_capacity(z, inst));
  if (cc.enforce_contiguity)
    for (LevelId l : inst.level_set.levels) add(check_contiguity(z, inst, l));
  if (cc.enforce_dissimilarity_bound && config.has(Objective::balance))
    add(check_dissimilarity_bound(z, inst, cc));
  if (cc.enforce_feeder_no_increase) add(check_feeder_no_increase(z, inst, cc));
  report.ok = report.violations.empty();
  return report;
}

std::string FeasibilityReport::to_text() const {
  std::ostringstream os;
  if (ok) {
    os << "feasible: no violations\n";
    return os.str();
  }
  os << "infeasible: " << violations.size() << " violation(s)\n";
  for (const auto& v : violations)
    os << "  " << family_name(v.family) << " entity " << v.entity << ": measured "
       << v.measured << " vs bound " << v.bound << "\n";
  return os.str();
}

std::vector<std::vector<std::string>> FeasibilityReport::to_rows() const {
  std::vector<std::vector<std::string>> rows;
  for (const auto& v : violations) {
    std::ostringstream m, b;
    m << v.measured;
    b << v.bound;
    rows.push_back({family_name(v.family), std::to_string(v.entity), m.str(), b.str()});
  }
  return rows;
}

}  // namespace rezone::constraints
