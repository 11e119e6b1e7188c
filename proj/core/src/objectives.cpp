#include "rezone/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "rezone/csv.hpp"

namespace rezone {

const char* objective_name(Objective o) {
  switch (o) {
    case Objective::distance: return "distance";
    case Objective::balance: return "balance";
    case Objective::compact: return "compact";
    case Objective::feeder: return "feeder";
    case Objective::capacity: return "capacity";
  }
  return "?";
}

Objective parse_objective(const std::string& name) {
  for (Objective o : kAllObjectives)
    if (name == objective_name(o)) return o;
  throw DataError("unknown objective '" + name + "'");
}

double SchoolWeights::get(SchoolId school, Objective obj) const {
  if (obj == Objective::compact) return 1.0;  // compactness is unweighted
  auto it = w_.find({school, static_cast<int>(obj)});
  if (it != w_.end()) return it->second;
  // Survey weights cover {distance, balance, feeder}; schools absent from the
  // file fall back to the uniform 1/3 split.
  if (survey_mode_ && obj != Objective::capacity) return 1.0 / 3.0;
  return 1.0;
}

void SchoolWeights::set(SchoolId school, Objective obj, double w) {
  if (w < 0) throw DataError("weights must be nonnegative");
  w_[{school, static_cast<int>(obj)}] = w;
}

void SchoolWeights::validate(const Instance& inst) const {
  if (!survey_mode_) return;
  for (const auto& s : inst.schools) {
    double sum = get(s.id, Objective::distance) + get(s.id, Objective::balance) +
                 get(s.id, Objective::feeder);
    if (std::abs(sum - 1.0) > 1e-9)
      throw DataError("survey weights for school " + std::to_string(s.id) +
                      " sum to " + std::to_string(sum) + ", expected 1");
  }
}

SchoolWeights SchoolWeights::load_csv(const std::string& path) {
  csv::Table t = csv::read_file(path);
  int c_id = t.require_col("school_id");
  int c_d = t.require_col("w_distance");
  int c_b = t.require_col("w_balance");
  int c_f = t.require_col("w_feeder");
  SchoolWeights w;
  w.survey_mode_ = true;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    SchoolId id = static_cast<SchoolId>(t.get_int(r, c_id, "school_id"));
    w.set(id, Objective::distance, t.get_double(r, c_d, "w_distance"));
    w.set(id, Objective::balance, t.get_double(r, c_b, "w_balance"));
    w.set(id, Objective::feeder, t.get_double(r, c_f, "w_feeder"));
  }
  return w;
}

void SchoolWeights::save_csv(const std::string& path) const {
  std::vector<SchoolId> ids;
  for (const auto& [key, _] : w_)
    if (ids.empty() || ids.back() != key.first) ids.push_back(key.first);
  std::vector<std::vector<std::string>> rows;
  for (SchoolId id : ids)
    rows.push_back({std::to_string(id), csv::format_double(get(id, Objective::distance)),
                    csv::format_double(get(id, Objective::balance)),
                    csv::format_double(get(id, Objective::feeder))});
  csv::write_file(path, {"school_id", "w_distance", "w_balance", "w_feeder"}, rows);
}

Calibrations Calibrations::unit(const LevelSet& levels, const std::set<Objective>& objs) {
  Calibrations c;
  for (LevelId l : levels.levels)
    for (Objective o : objs) c.b[{l, static_cast<int>(o)}] = 1.0;
  return c;
}

bool Calibrations::has(LevelId l, Objective o) const {
  return b.count({l, static_cast<int>(o)}) > 0;
}

double Calibrations::get(LevelId l, Objective o) const {
  auto it = b.find({l, static_cast<int>(o)});
  if (it == b.end())
    throw ModelError(std::string("no calibration for level ") + std::to_string(l) +
                     ", objective " + objective_name(o));
  return it->second;
}

void Calibrations::set(LevelId l, Objective o, double v) {
  b[{l, static_cast<int>(o)}] = v;
}

const ObjectiveBreakdown::Entry* ObjectiveBreakdown::find(LevelId level,
                                                          Objective obj) const {
  for (const auto& e : entries)
    if (e.level == level && e.obj == obj) return &e;
  return nullptr;
}

namespace objectives {

SchoolCounts school_counts(const Zoning& z, const Instance& inst) {
  SchoolCounts c;
  c.enrolled.assign(inst.schools.size(), 0);
  c.group.assign(inst.schools.size(), 0);
  for (int u = 0; u < inst.n_units(); ++u) {
    int sc = z.school_by_unit[u];
    c.enrolled[sc] += inst.units[u].n_students;
    c.group[sc] += inst.units[u].n_group;
  }
  return c;
}

namespace {

// Per-school assigned/status-quo mile sums for one level.
void distance_sums(const Zoning& z, const Instance& inst, int li,
                   std::vector<double>& num, std::vector<double>& den) {
  int n_local = static_cast<int>(inst.schools_at_level[li].size());
  num.assign(n_local, 0.0);
  den.assign(n_local, 0.0);
  for (int u : inst.units_at_level[li]) {
    int local = inst.school_local[z.school_by_unit[u]];
    num[local] += inst.unit_dist[u][local];
    den[local] += inst.unit_dist_sq[u];
  }
}

}  // namespace

double travel_distance_ratio(const Zoning& z, const Instance& inst, LevelId level,
                             const SchoolWeights& w) {
  int li = inst.level_index(level);
  std::vector<double> num, den;
  distance_sums(z, inst, li, num, den);
  SchoolCounts counts = school_counts(z, inst);
  double total = 0;
  for (std::size_t k = 0; k < num.size(); ++k) {
    int sc = inst.schools_at_level[li][k];
    if (counts.enrolled[sc] == 0)
      throw ModelError("travel ratio undefined: school " +
                       std::to_string(inst.schools[sc].id) + " has no zoned student");
    if (den[k] == 0)
      throw ModelError("travel ratio undefined: school " +
                       std::to_string(inst.schools[sc].id) +
                       " has zero status-quo distance sum");
    total += w.get(inst.schools[sc].id, Objective::distance) * (num[k] / den[k]);
  }
  return total;
}

double capacity_objective(const Zoning& z, const Instance& inst, LevelId level,
                          const SchoolWeights& w) {
  int li = inst.level_index(level);
  SchoolCounts counts = school_counts(z, inst);
  double total = 0;
  for (int sc : inst.schools_at_level[li]) {
    const School& s = inst.schools[sc];
    if (s.cap_desired <= 0)
      throw ModelError("capacity objective undefined: school " + std::to_string(s.id) +
                       " has no desired capacity");
    total += w.get(s.id, Objective::capacity) *
             std::abs(1.0 - static_cast<double>(counts.enrolled[sc]) /
                                static_cast<double>(s.cap_desired));
  }
  return total;
}

double balance_objective(const Zoning& z, const Instance& inst, LevelId level,
                         const SchoolWeights& w, double lambda) {
  int li = inst.level_index(level);
  SchoolCounts counts = school_counts(z, inst);
  double share = static_cast<double>(inst.level_group[li]) /
                 static_cast<double>(inst.level_students[li]);
  double total = 0;
  for (int sc : inst.schools_at_level[li]) {
    if (counts.enrolled[sc] == 0)
      throw ModelError("balance undefined: school " + std::to_string(inst.schools[sc].id) +
                       " has no zoned student");
    double d = std::abs(static_cast<double>(counts.group[sc]) /
                            static_cast<double>(counts.enrolled[sc]) -
                        share);
    total += w.get(inst.schools[sc].id, Objective::balance) * std::max(d, lambda);
  }
  return total;
}

long long edge_cut_compactness(const Zoning& z, const Instance& inst, LevelId level) {
  int li = inst.level_index(level);
  long long cuts = 0;
  for (const auto& [a, b] : inst.level_edges[li])
    if (z.school_by_unit[a] != z.school_by_unit[b]) ++cuts;
  return cuts;
}

FeederPatterns feeder_patterns(const Zoning& z, const Instance& inst, LevelId level,
                               long long epsilon, const SchoolWeights& w) {
  int li = inst.level_index(level);
  if (li + 1 >= inst.level_set.count()) return {0, 0.0};
  int n1 = static_cast<int>(inst.schools_at_level[li].size());
  int n2 = static_cast<int>(inst.schools_at_level[li + 1].size());
  std::vector<long long> c(static_cast<std::size_t>(n1) * n2, 0);
  for (int u : inst.units_at_level[li]) {
    int s1 = inst.school_local[z.school_by_unit[u]];
    const auto& next_units = inst.unit_students_next[u];
    for (int nu : next_units) {
      int s2 = inst.school_local[z.school_by_unit[nu]];
      ++c[static_cast<std::size_t>(s1) * n2 + s2];
    }
  }
  FeederPatterns out;
  for (int s1 = 0; s1 < n1; ++s1) {
    long long active = 0;
    for (int s2 = 0; s2 < n2; ++s2)
      if (c[static_cast<std::size_t>(s1) * n2 + s2] >= epsilon) ++active;
    out.count += active;
    SchoolId id1 = inst.schools[inst.schools_at_level[li][s1]].id;
    out.weighted += w.get(id1, Objective::feeder) * static_cast<double>(active);
  }
  return out;
}

namespace {

double w_get(const ObjectiveConfig& cfg, SchoolId id, Objective obj) {
  return cfg.weights.get(id, obj);
}

// Weighted per-school term values for the ratio-style objectives. Undefined
// terms (empty school) yield NaN so diagnostics rows can still render.
std::vector<std::pair<SchoolId, double>> school_terms(Objective obj, const Zoning& z,
                                                      const Instance& inst, int li,
                                                      const ObjectiveConfig& cfg,
                                                      const SchoolCounts& counts) {
  std::vector<std::pair<SchoolId, double>> terms;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  double share = inst.level_students[li] > 0
                     ? static_cast<double>(inst.level_group[li]) /
                           static_cast<double>(inst.level_students[li])
                     : nan;
  std::vector<double> num, den;
  if (obj == Objective::distance) distance_sums(z, inst, li, num, den);

  std::vector<long long> feeder_active;
  if (obj == Objective::feeder && li + 1 < inst.level_set.count()) {
    int n1 = static_cast<int>(inst.schools_at_level[li].size());
    int n2 = static_cast<int>(inst.schools_at_level[li + 1].size());
    std::vector<long long> c(static_cast<std::size_t>(n1) * n2, 0);
    for (int u : inst.units_at_level[li]) {
      int s1 = inst.school_local[z.school_by_unit[u]];
      for (int nu : inst.unit_students_next[u])
        ++c[static_cast<std::size_t>(s1) * n2 + inst.school_local[z.school_by_unit[nu]]];
    }
    feeder_active.assign(n1, 0);
    for (int s1 = 0; s1 < n1; ++s1)
      for (int s2 = 0; s2 < n2; ++s2)
        if (c[static_cast<std::size_t>(s1) * n2 + s2] >= cfg.constraints.epsilon)
          ++feeder_active[s1];
  }

  for (std::size_t k = 0; k < inst.schools_at_level[li].size(); ++k) {
    int sc = inst.schools_at_level[li][k];
    const School& s = inst.schools[sc];
    double v = nan;
    switch (obj) {
      case Objective::distance:
        if (counts.enrolled[sc] > 0 && den[k] > 0)
          v = w_get(cfg, s.id, obj) * (num[k] / den[k]);
        break;
      case Objective::balance:
        if (counts.enrolled[sc] > 0)
          v = w_get(cfg, s.id, obj) *
              std::max(std::abs(static_cast<double>(counts.group[sc]) /
                                    static_cast<double>(counts.enrolled[sc]) -
                                share),
                       cfg.constraints.lambda);
        break;
      case Objective::capacity:
        if (s.cap_desired > 0)
          v = w_get(cfg, s.id, obj) *
              std::abs(1.0 - static_cast<double>(counts.enrolled[sc]) /
                                 static_cast<double>(s.cap_desired));
        break;
      case Objective::feeder:
        v = feeder_active.empty()
                ? 0.0
                : w_get(cfg, s.id, obj) * static_cast<double>(feeder_active[k]);
        break;
      case Objective::compact:
        break;  // per-edge granularity, no school terms
    }
    terms.emplace_back(s.id, v);
  }
  return terms;
}

}  // namespace

ObjectiveBreakdown total_objective(const Zoning& z, const Instance& inst,
                                   const ObjectiveConfig& config) {
  ObjectiveBreakdown out;
  out.total = 0;
  SchoolCounts counts = school_counts(z, inst);
  for (int li = 0; li < inst.level_set.count(); ++li) {
    LevelId level = inst.level_set.levels[li];
    for (Objective obj : kAllObjectives) {
      ObjectiveBreakdown::Entry e;
      e.level = level;
      e.obj = obj;
      e.in_total = config.has(obj);
      // Raw value, also for unselected objectives (diagnostics); undefined
      // values surface as NaN rather than an error when not selected.
      try {
        switch (obj) {
          case Objective::distance:
            e.raw = travel_distance_ratio(z, inst, level, config.weights);
            break;
          case Objective::balance:
            e.raw = balance_objective(z, inst, level, config.weights,
                                      config.constraints.lambda);
            break;
          case Objective::compact:
            e.raw = static_cast<double>(edge_cut_compactness(z, inst, level));
            break;
          case Objective::feeder:
            e.raw = feeder_patterns(z, inst, level, config.constraints.epsilon,
                                    config.weights)
                        .weighted;
            break;
          case Objective::capacity:
            e.raw = capacity_objective(z, inst, level, config.weights);
            break;
        }
      } catch (const ModelError&) {
        if (e.in_total) throw;
        e.raw = std::numeric_limits<double>::quiet_NaN();
      }
      if (e.in_total) {
        e.calibrated = config.calibrations.get(level, obj) * e.raw;
        out.total += e.calibrated;
      }
      if (obj != Objective::compact)
        e.terms = school_terms(obj, z, inst, li, config, counts);
      out.entries.push_back(std::move(e));
    }
  }
  return out;
}

std::vector<double> term_vector(Objective obj, LevelId level, const Zoning& z,
                                const Instance& inst, const ConstraintConfig& config) {
  int li = inst.level_index(level);
  std::vector<double> out;
  if (obj == Objective::compact) {
    for (const auto& [a, b] : inst.level_edges[li])
      out.push_back(z.school_by_unit[a] != z.school_by_unit[b] ? 1.0 : 0.0);
    return out;
  }
  SchoolWeights unit_w = SchoolWeights::uniform();
  SchoolCounts counts = school_counts(z, inst);
  double share = static_cast<double>(inst.level_group[li]) /
                 static_cast<double>(inst.level_students[li]);
  std::vector<double> num, den;
  if (obj == Objective::distance) {
    num.reserve(inst.schools_at_level[li].size());
    std::vector<double> n2, d2;
    // reuse helper through travel path
    n2.assign(inst.schools_at_level[li].size(), 0.0);
    d2.assign(inst.schools_at_level[li].size(), 0.0);
    for (int u : inst.units_at_level[li]) {
      int local = inst.school_local[z.school_by_unit[u]];
      n2[local] += inst.unit_dist[u][local];
      d2[local] += inst.unit_dist_sq[u];
    }
    num = std::move(n2);
    den = std::move(d2);
  }
  std::vector<long long> feeder_active;
  if (obj == Objective::feeder) {
    if (li + 1 >= inst.level_set.count()) {
      // No next level: the objective is identically zero; one zero term per
      // school keeps the calibration shape regular.
      return std::vector<double>(inst.schools_at_level[li].size(), 0.0);
    }
    int n1 = static_cast<int>(inst.schools_at_level[li].size());
    int n2 = static_cast<int>(inst.schools_at_level[li + 1].size());
    std::vector<long long> c(static_cast<std::size_t>(n1) * n2, 0);
    for (int u : inst.units_at_level[li]) {
      int s1 = inst.school_local[z.school_by_unit[u]];
      for (int nu : inst.unit_students_next[u])
        ++c[static_cast<std::size_t>(s1) * n2 + inst.school_local[z.school_by_unit[nu]]];
    }
    feeder_active.assign(n1, 0);
    for (int s1 = 0; s1 < n1; ++s1)
      for (int s2 = 0; s2 < n2; ++s2)
        if (c[static_cast<std::size_t>(s1) * n2 + s2] >= config.epsilon)
          ++feeder_active[s1];
  }

  for (std::size_t k = 0; k < inst.schools_at_level[li].size(); ++k) {
    int sc = inst.schools_at_level[li][k];
    const School& s = inst.schools[sc];
    switch (obj) {
      case Objective::distance: {
        if (counts.enrolled[sc] == 0 || den[k] == 0)
          throw ModelError("term vector undefined: school " + std::to_string(s.id) +
                           " is empty");
        out.push_back(num[k] / den[k]);
        break;
      }
      case Objective::balance: {
        if (counts.enrolled[sc] == 0)
          throw ModelError("term vector undefined: school " + std::to_string(s.id) +
                           " is empty");
        double d = std::abs(static_cast<double>(counts.group[sc]) /
                                static_cast<double>(counts.enrolled[sc]) -
                            share);
        out.push_back(std::max(d, config.lambda));
        break;
      }
      case Objective::capacity:
        out.push_back(std::abs(1.0 - static_cast<double>(counts.enrolled[sc]) /
                                         static_cast<double>(s.cap_desired)));
        break;
      case Objective::feeder:
        out.push_back(static_cast<double>(feeder_active[k]));
        break;
      case Objective::compact:
        break;  // handled above
    }
  }
  return out;
}

}  // namespace objectives
}  // namespace rezone
