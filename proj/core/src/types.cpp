#include "rezone/types.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace rezone {

DataError::DataError(const std::string& file, int row, const std::string& field,
                     const std::string& msg)
    : std::runtime_error([&] {
        std::ostringstream os;
        os << file << ":" << row;
        if (!field.empty()) os << " [" << field << "]";
        os << ": " << msg;
        return os.str();
      }()) {}

double ring_area(const Ring& r) {
  double a = 0;
  std::size_t n = r.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Point& p = r[i];
    const Point& q = r[(i + 1) % n];
    a += p[0] * q[1] - q[0] * p[1];
  }
  return a / 2.0;
}

double ring_length(const Ring& r) {
  double len = 0;
  std::size_t n = r.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Point& p = r[i];
    const Point& q = r[(i + 1) % n];
    len += std::hypot(q[0] - p[0], q[1] - p[1]);
  }
  return len;
}

void UnitGeometry::recompute_measures() {
  area = 0;
  perimeter = 0;
  for (const Polygon& poly : polygons) {
    for (std::size_t i = 0; i < poly.rings.size(); ++i) {
      double a = std::abs(ring_area(poly.rings[i]));
      area += (i == 0) ? a : -a;  // holes subtract
      perimeter += ring_length(poly.rings[i]);
    }
  }
}

double compactness_score(double area, double perimeter) {
  if (perimeter <= 0) return 0;
  return 4.0 * std::numbers::pi * area / (perimeter * perimeter);
}

int LevelSet::index_of(LevelId l) const {
  auto it = std::lower_bound(levels.begin(), levels.end(), l);
  if (it == levels.end() || *it != l) return -1;
  return static_cast<int>(it - levels.begin());
}

LevelSet LevelSet::of(std::vector<LevelId> levels) {
  if (levels.empty()) throw DataError("level set must be nonempty");
  for (std::size_t i = 0; i < levels.size(); ++i) {
    if (levels[i] <= 0) throw DataError("level ids must be positive");
    if (i > 0 && levels[i] <= levels[i - 1])
      throw DataError("level ids must be strictly increasing");
  }
  return LevelSet{std::move(levels)};
}

double Student::distance_to(SchoolId s) const {
  auto it = distances.find(s);
  if (it == distances.end())
    throw ModelError("student " + std::to_string(id) + " has no distance to school " +
                     std::to_string(s));
  return it->second;
}

void ConstraintConfig::validate() const {
  if (mu_ratio < 0) throw DataError("mu_ratio must be nonnegative");
  if (mu_abs && *mu_abs < 0) throw DataError("mu_abs must be nonnegative");
  if (lambda < 0 || lambda > 0.5) throw DataError("lambda must be in [0, 0.5]");
  if (epsilon < 1) throw DataError("epsilon must be a positive integer");
}

int Instance::school_index(SchoolId id) const {
  auto it = school_index_by_id.find(id);
  if (it == school_index_by_id.end())
    throw ModelError("unknown school id " + std::to_string(id));
  return it->second;
}

int Instance::unit_index(UnitId id) const {
  auto it = unit_index_by_id.find(id);
  if (it == unit_index_by_id.end())
    throw ModelError("unknown unit id " + std::to_string(id));
  return it->second;
}

int Instance::level_index(LevelId l) const {
  int i = level_set.index_of(l);
  if (i < 0) throw ModelError("unknown level " + std::to_string(l));
  return i;
}

namespace {

template <typename T, typename GetId>
void check_sorted_unique(const std::vector<T>& v, GetId get_id, const char* what) {
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (get_id(v[i - 1]) >= get_id(v[i]))
      throw DataError(std::string(what) + " ids must be unique (duplicate or unsorted id " +
                      std::to_string(get_id(v[i])) + ")");
  }
}

}  // namespace

void Instance::finalize() {
  LevelSet::of(level_set.levels);  // re-validate
  int n_levels = level_set.count();
  if (static_cast<int>(adjacency.size()) != n_levels)
    throw DataError("adjacency graphs must be given per level (" +
                    std::to_string(adjacency.size()) + " graphs for " +
                    std::to_string(n_levels) + " levels)");

  std::sort(schools.begin(), schools.end(),
            [](const School& a, const School& b) { return a.id < b.id; });
  std::sort(units.begin(), units.end(),
            [](const PlanningUnit& a, const PlanningUnit& b) { return a.id < b.id; });
  std::sort(students.begin(), students.end(),
            [](const Student& a, const Student& b) { return a.id < b.id; });
  check_sorted_unique(schools, [](const School& s) { return s.id; }, "school");
  check_sorted_unique(units, [](const PlanningUnit& u) { return u.id; }, "unit");
  check_sorted_unique(students, [](const Student& s) { return s.id; }, "student");
  if (schools.empty()) throw DataError("instance has no schools");
  if (units.empty()) throw DataError("instance has no units");

  school_index_by_id.clear();
  unit_index_by_id.clear();
  for (int i = 0; i < n_schools(); ++i) school_index_by_id[schools[i].id] = i;
  for (int i = 0; i < n_units(); ++i) unit_index_by_id[units[i].id] = i;

  school_level.assign(schools.size(), -1);
  school_local.assign(schools.size(), -1);
  schools_at_level.assign(n_levels, {});
  for (int i = 0; i < n_schools(); ++i) {
    const School& s = schools[i];
    int li = level_set.index_of(s.level);
    if (li < 0)
      throw DataError("school " + std::to_string(s.id) + " has unknown level " +
                      std::to_string(s.level));
    if (s.cap_min < 0 || s.cap_min > s.cap_desired || s.cap_desired > s.cap_max)
      throw DataError("school " + std::to_string(s.id) +
                      " capacities must satisfy 0 <= min <= desired <= max");
    school_level[i] = li;
    school_local[i] = static_cast<int>(schools_at_level[li].size());
    schools_at_level[li].push_back(i);
  }

  unit_level.assign(units.size(), -1);
  units_at_level.assign(n_levels, {});
  level_students.assign(n_levels, 0);
  level_group.assign(n_levels, 0);
  for (int i = 0; i < n_units(); ++i) {
    const PlanningUnit& u = units[i];
    int li = level_set.index_of(u.level);
    if (li < 0)
      throw DataError("unit " + std::to_string(u.id) + " has unknown level " +
                      std::to_string(u.level));
    if (u.n_students < 0 || u.n_group < 0 || u.n_group > u.n_students)
      throw DataError("unit " + std::to_string(u.id) +
                      " requires 0 <= n_group <= n_students");
    auto it = school_index_by_id.find(u.sq_school);
    if (it == school_index_by_id.end())
      throw DataError("unit " + std::to_string(u.id) + " references unknown school id " +
                      std::to_string(u.sq_school));
    if (schools[it->second].level != u.level)
      throw DataError("unit " + std::to_string(u.id) + " assigned to school " +
                      std::to_string(u.sq_school) + " of a different level");
    unit_level[i] = li;
    units_at_level[li].push_back(i);
    level_students[li] += u.n_students;
    level_group[li] += u.n_group;
  }

  // Adjacency -> dense neighbor lists.
  unit_neighbors.assign(units.size(), {});
  level_edges.assign(n_levels, {});
  for (int li = 0; li < n_levels; ++li) {
    for (const auto& e : adjacency[li].edges) {
      if (e.a == e.b)
        throw DataError("adjacency self-loop on unit " + std::to_string(e.a));
      auto ia = unit_index_by_id.find(e.a);
      auto ib = unit_index_by_id.find(e.b);
      if (ia == unit_index_by_id.end() || ib == unit_index_by_id.end())
        throw DataError("adjacency references unknown unit id " +
                        std::to_string(ia == unit_index_by_id.end() ? e.a : e.b));
      int a = ia->second, b = ib->second;
      if (unit_level[a] != li || unit_level[b] != li)
        throw DataError("adjacency edge (" + std::to_string(e.a) + "," +
                        std::to_string(e.b) + ") does not match its level");
      unit_neighbors[a].push_back(b);
      unit_neighbors[b].push_back(a);
      level_edges[li].emplace_back(a, b);
    }
  }
  for (auto& nbrs : unit_neighbors) {
    std::sort(nbrs.begin(), nbrs.end());
    if (std::adjacent_find(nbrs.begin(), nbrs.end()) != nbrs.end())
      throw DataError("duplicate adjacency edge");
  }

  // Students: residence and distance coverage, then per-unit rosters.
  unit_students.assign(units.size(), {});
  unit_students_next.assign(units.size(), {});
  unit_upper_students.assign(units.size(), {});
  unit_upper_students_prev.assign(units.size(), {});
  for (int si = 0; si < static_cast<int>(students.size()); ++si) {
    const Student& st = students[si];
    int sli = level_set.index_of(st.level);
    if (sli < 0)
      throw DataError("student " + std::to_string(st.id) + " has unknown level " +
                      std::to_string(st.level));
    for (int li = sli; li < n_levels; ++li) {
      LevelId l = level_set.levels[li];
      auto ru = st.residence_units.find(l);
      if (ru == st.residence_units.end())
        throw DataError("student " + std::to_string(st.id) +
                        " missing residence unit at level " + std::to_string(l));
      auto iu = unit_index_by_id.find(ru->second);
      if (iu == unit_index_by_id.end())
        throw DataError("student " + std::to_string(st.id) +
                        " references unknown unit id " + std::to_string(ru->second));
      if (unit_level[iu->second] != li)
        throw DataError("student " + std::to_string(st.id) + " residence unit " +
                        std::to_string(ru->second) + " is not a level-" +
                        std::to_string(l) + " unit");
    }
    auto isq = school_index_by_id.find(st.sq_school);
    if (isq == school_index_by_id.end())
      throw DataError("student " + std::to_string(st.id) +
                      " references unknown school id " + std::to_string(st.sq_school));
    if (schools[isq->second].level != st.level)
      throw DataError("student " + std::to_string(st.id) + " status-quo school " +
                      std::to_string(st.sq_school) + " is not at the student's level");
    int own_unit = unit_index_by_id.at(st.residence_units.at(st.level));
    if (units[own_unit].sq_school != st.sq_school)
      throw DataError("student " + std::to_string(st.id) + " status-quo school " +
                      std::to_string(st.sq_school) + " differs from unit " +
                      std::to_string(units[own_unit].id) + " status-quo school " +
                      std::to_string(units[own_unit].sq_school));
    for (const auto& [sch, d] : st.distances) {
      if (d < 0)
        throw DataError("student " + std::to_string(st.id) + " has negative distance to school " +
                        std::to_string(sch));
    }
    for (int sc : schools_at_level[sli]) {
      if (!st.distances.count(schools[sc].id))
        throw DataError("student " + std::to_string(st.id) + " missing distance to school " +
                        std::to_string(schools[sc].id));
    }

    unit_students[own_unit].push_back(si);
    if (sli + 1 < n_levels) {
      int next_unit = unit_index_by_id.at(st.residence_units.at(level_set.levels[sli + 1]));
      unit_students_next[own_unit].push_back(next_unit);
      unit_upper_students[next_unit].push_back(si);
      unit_upper_students_prev[next_unit].push_back(own_unit);
    }
  }

  // Unit counts must agree with the student roster.
  for (int i = 0; i < n_units(); ++i) {
    long long n = static_cast<long long>(unit_students[i].size());
    long long g = 0;
    for (int si : unit_students[i])
      if (students[si].in_group) ++g;
    if (n != units[i].n_students)
      throw DataError("unit " + std::to_string(units[i].id) + " declares " +
                      std::to_string(units[i].n_students) + " students but " +
                      std::to_string(n) + " reside there");
    if (g != units[i].n_group)
      throw DataError("unit " + std::to_string(units[i].id) + " declares " +
                      std::to_string(units[i].n_group) + " group students but " +
                      std::to_string(g) + " reside there");
  }

  // Status-quo zoning and derived school constants.
  sq_zoning.school_by_unit.assign(units.size(), -1);
  for (auto& s : schools) {
    s.sq_enrolled = 0;
    s.sq_group = 0;
  }
  for (int i = 0; i < n_units(); ++i) {
    int sc = school_index_by_id.at(units[i].sq_school);
    sq_zoning.school_by_unit[i] = sc;
    schools[sc].sq_enrolled += units[i].n_students;
    schools[sc].sq_group += units[i].n_group;
  }

  school_sq_components.assign(schools.size(), 0);
  {
    std::vector<std::vector<int>> members(schools.size());
    for (int i = 0; i < n_units(); ++i)
      members[sq_zoning.school_by_unit[i]].push_back(i);
    for (int sc = 0; sc < n_schools(); ++sc)
      school_sq_components[sc] = count_components(*this, members[sc]);
  }

  // Distance aggregates for the travel objective.
  unit_dist.assign(units.size(), {});
  unit_dist_sq.assign(units.size(), 0.0);
  for (int i = 0; i < n_units(); ++i) {
    int li = unit_level[i];
    unit_dist[i].assign(schools_at_level[li].size(), 0.0);
    for (int si : unit_students[i]) {
      const Student& st = students[si];
      for (std::size_t k = 0; k < schools_at_level[li].size(); ++k)
        unit_dist[i][k] += st.distance_to(schools[schools_at_level[li][k]].id);
      unit_dist_sq[i] += st.distance_to(st.sq_school);
    }
  }

  candidate_mask.clear();
  candidates.by_unit.clear();
}

void Instance::set_candidates(CandidateSets cs) {
  if (cs.by_unit.size() != units.size())
    throw ModelError("candidate sets do not cover every unit");
  candidates = std::move(cs);
  candidate_mask.assign(units.size(), {});
  for (int i = 0; i < n_units(); ++i) {
    int li = unit_level[i];
    candidate_mask[i].assign(schools_at_level[li].size(), 0);
    bool has_sq = false;
    for (int sc : candidates.by_unit[i]) {
      if (school_level[sc] != li)
        throw ModelError("candidate school " + std::to_string(schools[sc].id) +
                         " is not at unit " + std::to_string(units[i].id) + "'s level");
      candidate_mask[i][school_local[sc]] = 1;
      if (sc == sq_zoning.school_by_unit[i]) has_sq = true;
    }
    if (!has_sq)
      throw ModelError("candidate set for unit " + std::to_string(units[i].id) +
                       " omits its status-quo school");
  }
}

int count_components(const Instance& inst, const std::vector<int>& members) {
  if (members.empty()) return 0;
  std::vector<char> in_set(inst.units.size(), 0);
  std::vector<char> seen(inst.units.size(), 0);
  for (int u : members) in_set[u] = 1;
  int comps = 0;
  std::vector<int> stack;
  for (int u : members) {
    if (seen[u]) continue;
    ++comps;
    stack.push_back(u);
    seen[u] = 1;
    while (!stack.empty()) {
      int v = stack.back();
      stack.pop_back();
      for (int w : inst.unit_neighbors[v]) {
        if (in_set[w] && !seen[w]) {
          seen[w] = 1;
          stack.push_back(w);
        }
      }
    }
  }
  return comps;
}

}  // namespace rezone
