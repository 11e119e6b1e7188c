#include "rezone/detail/search_state.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace rezone::solver_detail {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
}

SearchState::SearchState(const Instance& inst, const ObjectiveConfig& config)
    : inst_(inst), cfg_(config) {
  sel_dist_ = cfg_.has(Objective::distance);
  sel_bal_ = cfg_.has(Objective::balance);
  sel_comp_ = cfg_.has(Objective::compact);
  sel_feed_ = cfg_.has(Objective::feeder);
  sel_cap_ = cfg_.has(Objective::capacity);

  int n_schools = inst_.n_schools();
  w_dist_.resize(n_schools);
  w_bal_.resize(n_schools);
  w_cap_.resize(n_schools);
  w_feed_.resize(n_schools);
  for (int sc = 0; sc < n_schools; ++sc) {
    SchoolId id = inst_.schools[sc].id;
    w_dist_[sc] = cfg_.weights.get(id, Objective::distance);
    w_bal_[sc] = cfg_.weights.get(id, Objective::balance);
    w_cap_[sc] = cfg_.weights.get(id, Objective::capacity);
    w_feed_[sc] = cfg_.weights.get(id, Objective::feeder);
  }

  int n_levels = inst_.level_set.count();
  group_share_.resize(n_levels);
  b_dist_.assign(n_levels, 0);
  b_bal_.assign(n_levels, 0);
  b_comp_.assign(n_levels, 0);
  b_feed_.assign(n_levels, 0);
  b_cap_.assign(n_levels, 0);
  sq_feeder_count_.assign(n_levels, 0);
  for (int li = 0; li < n_levels; ++li) {
    LevelId l = inst_.level_set.levels[li];
    group_share_[li] = inst_.level_students[li] > 0
                           ? static_cast<double>(inst_.level_group[li]) /
                                 static_cast<double>(inst_.level_students[li])
                           : 0.0;
    if (sel_dist_) b_dist_[li] = cfg_.calibrations.get(l, Objective::distance);
    if (sel_bal_) b_bal_[li] = cfg_.calibrations.get(l, Objective::balance);
    if (sel_comp_) b_comp_[li] = cfg_.calibrations.get(l, Objective::compact);
    if (sel_feed_) b_feed_[li] = cfg_.calibrations.get(l, Objective::feeder);
    if (sel_cap_) b_cap_[li] = cfg_.calibrations.get(l, Objective::capacity);
    if (li + 1 < n_levels)
      sq_feeder_count_[li] = objectives::feeder_patterns(inst_.sq_zoning, inst_, l,
                                                         cfg_.constraints.epsilon,
                                                         cfg_.weights)
                                 .count;
  }

  visit_mark_.assign(inst_.units.size(), 0);
  reset(inst_.sq_zoning);
}

void SearchState::reset(const Zoning& z) {
  zoning_ = z;
  pending_.valid = false;
  int n_schools = inst_.n_schools();
  int n_levels = inst_.level_set.count();

  o_.assign(n_schools, 0);
  og_.assign(n_schools, 0);
  dist_num_.assign(n_schools, 0.0);
  dist_den_.assign(n_schools, 0.0);
  school_units_.assign(n_schools, {});
  unit_pos_in_school_.assign(inst_.units.size(), -1);
  for (int u = 0; u < inst_.n_units(); ++u) {
    int sc = zoning_.school_by_unit[u];
    o_[sc] += inst_.units[u].n_students;
    og_[sc] += inst_.units[u].n_group;
    dist_num_[sc] += inst_.unit_dist[u][inst_.school_local[sc]];
    dist_den_[sc] += inst_.unit_dist_sq[u];
    unit_pos_in_school_[u] = static_cast<int>(school_units_[sc].size());
    school_units_[sc].push_back(u);
  }

  cut_count_.assign(n_levels, 0);
  for (int li = 0; li < n_levels; ++li)
    for (const auto& [a, b] : inst_.level_edges[li])
      if (zoning_.school_by_unit[a] != zoning_.school_by_unit[b]) ++cut_count_[li];

  feeder_c_.assign(n_levels, {});
  feeder_count_.assign(n_levels, 0);
  feeder_weighted_.assign(n_levels, 0.0);
  for (int li = 0; li + 1 < n_levels; ++li) {
    std::size_t n1 = inst_.schools_at_level[li].size();
    std::size_t n2 = inst_.schools_at_level[li + 1].size();
    feeder_c_[li].assign(n1 * n2, 0);
    for (int u : inst_.units_at_level[li]) {
      int s1 = inst_.school_local[zoning_.school_by_unit[u]];
      for (int nu : inst_.unit_students_next[u]) {
        int s2 = inst_.school_local[zoning_.school_by_unit[nu]];
        ++feeder_c_[li][static_cast<std::size_t>(s1) * n2 + s2];
      }
    }
    for (std::size_t s1 = 0; s1 < n1; ++s1) {
      long long active = 0;
      for (std::size_t s2 = 0; s2 < n2; ++s2)
        if (feeder_c_[li][s1 * n2 + s2] >= cfg_.constraints.epsilon) ++active;
      feeder_count_[li] += active;
      feeder_weighted_[li] +=
          w_feed_[inst_.schools_at_level[li][s1]] * static_cast<double>(active);
    }
  }

  objective_ = objective_from_aggregates(o_, og_, dist_num_, dist_den_, cut_count_,
                                         feeder_weighted_);
  if (std::isnan(objective_))
    throw ModelError("objective undefined on the supplied zoning (empty school)");
}

double SearchState::school_objective_terms(int sc, long long o, long long og, double num,
                                           double den) const {
  int li = inst_.school_level[sc];
  double total = 0;
  if (sel_dist_) {
    if (o == 0 || den == 0) return kNaN;
    total += b_dist_[li] * w_dist_[sc] * (num / den);
  }
  if (sel_bal_) {
    if (o == 0) return kNaN;
    double d = std::abs(static_cast<double>(og) / static_cast<double>(o) -
                        group_share_[li]);
    total += b_bal_[li] * w_bal_[sc] * std::max(d, cfg_.constraints.lambda);
  }
  if (sel_cap_) {
    total += b_cap_[li] * w_cap_[sc] *
             std::abs(1.0 - static_cast<double>(o) /
                                static_cast<double>(inst_.schools[sc].cap_desired));
  }
  return total;
}

double SearchState::objective_from_aggregates(
    const std::vector<long long>& o, const std::vector<long long>& og,
    const std::vector<double>& num, const std::vector<double>& den,
    const std::vector<long long>& cuts,
    const std::vector<double>& feeder_weighted) const {
  double total = 0;
  if (sel_dist_ || sel_bal_ || sel_cap_) {
    for (int sc = 0; sc < inst_.n_schools(); ++sc) {
      double t = school_objective_terms(sc, o[sc], og[sc], num[sc], den[sc]);
      if (std::isnan(t)) return kNaN;
      total += t;
    }
  }
  for (int li = 0; li < inst_.level_set.count(); ++li) {
    if (sel_comp_) total += b_comp_[li] * static_cast<double>(cuts[li]);
    if (sel_feed_) total += b_feed_[li] * feeder_weighted[li];
  }
  return total;
}

double SearchState::recompute_objective() const {
  int n_schools = inst_.n_schools();
  int n_levels = inst_.level_set.count();
  std::vector<long long> o(n_schools, 0), og(n_schools, 0);
  std::vector<double> num(n_schools, 0.0), den(n_schools, 0.0);
  for (int u = 0; u < inst_.n_units(); ++u) {
    int sc = zoning_.school_by_unit[u];
    o[sc] += inst_.units[u].n_students;
    og[sc] += inst_.units[u].n_group;
    num[sc] += inst_.unit_dist[u][inst_.school_local[sc]];
    den[sc] += inst_.unit_dist_sq[u];
  }
  std::vector<long long> cuts(n_levels, 0);
  for (int li = 0; li < n_levels; ++li)
    for (const auto& [a, b] : inst_.level_edges[li])
      if (zoning_.school_by_unit[a] != zoning_.school_by_unit[b]) ++cuts[li];
  std::vector<double> fw(n_levels, 0.0);
  for (int li = 0; li + 1 < n_levels; ++li) {
    auto fp = objectives::feeder_patterns(zoning_, inst_, inst_.level_set.levels[li],
                                          cfg_.constraints.epsilon, cfg_.weights);
    fw[li] = fp.weighted;
  }
  return objective_from_aggregates(o, og, num, den, cuts, fw);
}

bool SearchState::unit_on_boundary(int u) const {
  int sc = zoning_.school_by_unit[u];
  for (int v : inst_.unit_neighbors[u])
    if (zoning_.school_by_unit[v] != sc) return true;
  return false;
}

bool SearchState::contiguity_ok(int school,
                                const std::vector<std::pair<int, int>>& moves) const {
  // Effective membership after the move; `moves` holds (unit, new school).
  auto school_of = [&](int u) {
    for (const auto& [mu, ms] : moves)
      if (mu == u) return ms;
    return static_cast<int>(zoning_.school_by_unit[u]);
  };
  // Seed member list: current units minus leavers plus joiners.
  bfs_stack_.clear();
  int members = 0;
  int start = -1;
  for (int u : school_units_[school]) {
    if (school_of(u) == school) {
      ++members;
      start = u;
    }
  }
  for (const auto& [mu, ms] : moves) {
    if (ms == school && zoning_.school_by_unit[mu] != school) {
      ++members;
      start = mu;
    }
  }
  if (members == 0) return true;  // handled by the capacity family

  ++visit_stamp_;
  int reached = 0;
  bfs_stack_.push_back(start);
  visit_mark_[start] = visit_stamp_;
  while (!bfs_stack_.empty()) {
    int v = bfs_stack_.back();
    bfs_stack_.pop_back();
    ++reached;
    for (int w : inst_.unit_neighbors[v]) {
      if (visit_mark_[w] != visit_stamp_ && school_of(w) == school) {
        visit_mark_[w] = visit_stamp_;
        bfs_stack_.push_back(w);
      }
    }
  }
  if (reached == members) return true;  // single component, always fine
  if (inst_.school_sq_components[school] <= 1) return false;

  // Multi-component status quo: count components fully.
  int comps = 1;
  for (int u : school_units_[school]) {
    if (school_of(u) != school || visit_mark_[u] == visit_stamp_) continue;
    ++comps;
    bfs_stack_.push_back(u);
    visit_mark_[u] = visit_stamp_;
    while (!bfs_stack_.empty()) {
      int v = bfs_stack_.back();
      bfs_stack_.pop_back();
      for (int w : inst_.unit_neighbors[v]) {
        if (visit_mark_[w] != visit_stamp_ && school_of(w) == school) {
          visit_mark_[w] = visit_stamp_;
          bfs_stack_.push_back(w);
        }
      }
    }
  }
  // Joiners disconnected from everything already counted once via `start`;
  // any joiner not yet visited forms its own component.
  for (const auto& [mu, ms] : moves) {
    if (ms == school && visit_mark_[mu] != visit_stamp_) {
      ++comps;
      visit_mark_[mu] = visit_stamp_;
    }
  }
  return comps <= inst_.school_sq_components[school];
}

void SearchState::collect_feeder_deltas(const std::vector<std::pair<int, int>>& moves,
                                        Pending& p) {
  feeder_scratch_.clear();
  auto add = [&](int li, std::size_t key, long long delta) {
    for (auto& [l, k, d] : feeder_scratch_) {
      if (l == li && k == key) {
        d += delta;
        return;
      }
    }
    feeder_scratch_.emplace_back(li, key, delta);
  };

  for (const auto& [u, to] : moves) {
    int from = zoning_.school_by_unit[u];
    int li = inst_.unit_level[u];
    int from_loc = inst_.school_local[from];
    int to_loc = inst_.school_local[to];
    if (li + 1 < inst_.level_set.count()) {
      std::size_t n2 = inst_.schools_at_level[li + 1].size();
      for (int nu : inst_.unit_students_next[u]) {
        std::size_t s2 = static_cast<std::size_t>(
            inst_.school_local[zoning_.school_by_unit[nu]]);
        add(li, static_cast<std::size_t>(from_loc) * n2 + s2, -1);
        add(li, static_cast<std::size_t>(to_loc) * n2 + s2, +1);
      }
    }
    if (li > 0) {
      std::size_t n2 = inst_.schools_at_level[li].size();
      const auto& prevs = inst_.unit_upper_students_prev[u];
      for (int pu : prevs) {
        std::size_t s1 = static_cast<std::size_t>(
            inst_.school_local[zoning_.school_by_unit[pu]]);
        add(li - 1, s1 * n2 + static_cast<std::size_t>(from_loc), -1);
        add(li - 1, s1 * n2 + static_cast<std::size_t>(to_loc), +1);
      }
    }
  }

  // Threshold crossings -> per-level count and weighted updates.
  long long eps = cfg_.constraints.epsilon;
  for (const auto& [li, key, delta] : feeder_scratch_) {
    if (delta == 0) continue;
    long long before = feeder_c_[li][key];
    long long after = before + delta;
    bool was = before >= eps, is = after >= eps;
    p.feeder_key_upd.emplace_back(li, key, delta);
    if (was == is) continue;
    long long cdelta = is ? 1 : -1;
    std::size_t n2 = inst_.schools_at_level[li + 1].size();
    int s1_local = static_cast<int>(key / n2);
    int s1_school = inst_.schools_at_level[li][s1_local];
    bool found_c = false, found_w = false;
    for (auto& [l, c] : p.feeder_count_upd)
      if (l == li) {
        c += cdelta;
        found_c = true;
      }
    if (!found_c) p.feeder_count_upd.emplace_back(li, feeder_count_[li] + cdelta);
    for (auto& [l, w] : p.feeder_weighted_upd)
      if (l == li) {
        w += static_cast<double>(cdelta) * w_feed_[s1_school];
        found_w = true;
      }
    if (!found_w)
      p.feeder_weighted_upd.emplace_back(
          li, feeder_weighted_[li] + static_cast<double>(cdelta) * w_feed_[s1_school]);
  }
}

std::optional<double> SearchState::evaluate_move(const Move& m) {
  pending_.valid = false;
  pending_.delta = 0;
  pending_.schools.clear();
  pending_.cut_upd.clear();
  pending_.feeder_key_upd.clear();
  pending_.feeder_count_upd.clear();
  pending_.feeder_weighted_upd.clear();

  std::vector<std::pair<int, int>> moves;  // (unit, new school)
  moves.emplace_back(m.unit_a, m.school_a);
  if (m.kind == Move::Kind::swap) moves.emplace_back(m.unit_b, m.school_b);

  for (const auto& [u, to] : moves) {
    if (to == zoning_.school_by_unit[u]) return std::nullopt;  // no-op
    if (!inst_.is_candidate(u, to)) return std::nullopt;
  }

  // Per-school aggregate updates over the (at most 4) affected schools.
  auto find_upd = [&](int sc) -> SchoolUpd& {
    for (auto& s : pending_.schools)
      if (s.school == sc) return s;
    pending_.schools.push_back({sc, o_[sc], og_[sc], dist_num_[sc], dist_den_[sc]});
    return pending_.schools.back();
  };
  for (const auto& [u, to] : moves) {
    int from = zoning_.school_by_unit[u];
    const PlanningUnit& pu = inst_.units[u];
    SchoolUpd& f = find_upd(from);
    f.o -= pu.n_students;
    f.og -= pu.n_group;
    f.num -= inst_.unit_dist[u][inst_.school_local[from]];
    f.den -= inst_.unit_dist_sq[u];
    SchoolUpd& t = find_upd(to);
    t.o += pu.n_students;
    t.og += pu.n_group;
    t.num += inst_.unit_dist[u][inst_.school_local[to]];
    t.den += inst_.unit_dist_sq[u];
  }

  const ConstraintConfig& cc = cfg_.constraints;
  bool dissim_active = cc.enforce_dissimilarity_bound && sel_bal_;
  for (const auto& s : pending_.schools) {
    if ((sel_dist_ || sel_bal_) && s.o == 0) return std::nullopt;  // undefined objective
    if (cc.enforce_capacity &&
        (s.o < inst_.schools[s.school].cap_min || s.o > inst_.schools[s.school].cap_max))
      return std::nullopt;
    if (dissim_active && s.o > 0) {
      int li = inst_.school_level[s.school];
      double d = std::abs(static_cast<double>(s.og) / static_cast<double>(s.o) -
                          group_share_[li]);
      const School& sch = inst_.schools[s.school];
      double sq_dev = std::abs(static_cast<double>(sch.sq_group) /
                                   static_cast<double>(sch.sq_enrolled) -
                               group_share_[li]);
      if (d > std::max(cc.lambda, sq_dev)) return std::nullopt;
    }
  }

  // Feeder tallies (objective and/or no-increase constraint).
  if (sel_feed_ || cc.enforce_feeder_no_increase) {
    collect_feeder_deltas(moves, pending_);
    if (cc.enforce_feeder_no_increase) {
      for (const auto& [li, count] : pending_.feeder_count_upd)
        if (count > sq_feeder_count_[li]) return std::nullopt;
    }
  }

  // Contiguity last (the expensive one).
  if (cc.enforce_contiguity) {
    std::vector<int> affected;
    for (const auto& [u, to] : moves) {
      int from = zoning_.school_by_unit[u];
      for (int sc : {from, to})
        if (std::find(affected.begin(), affected.end(), sc) == affected.end())
          affected.push_back(sc);
    }
    for (int sc : affected)
      if (!contiguity_ok(sc, moves)) return std::nullopt;
  }

  // Objective delta.
  double delta = 0;
  for (const auto& s : pending_.schools) {
    double before = school_objective_terms(s.school, o_[s.school], og_[s.school],
                                           dist_num_[s.school], dist_den_[s.school]);
    double after = school_objective_terms(s.school, s.o, s.og, s.num, s.den);
    delta += after - before;
  }
  if (sel_comp_) {
    auto school_of = [&](int u) {
      for (const auto& [mu, ms] : moves)
        if (mu == u) return ms;
      return static_cast<int>(zoning_.school_by_unit[u]);
    };
    // Distinct edges incident to moved units.
    std::vector<std::pair<int, int>> edges;
    for (const auto& [u, to] : moves) {
      for (int v : inst_.unit_neighbors[u]) {
        int a = std::min(u, v), b = std::max(u, v);
        if (std::find(edges.begin(), edges.end(), std::pair(a, b)) == edges.end())
          edges.emplace_back(a, b);
      }
    }
    long long cut_delta = 0;
    for (const auto& [a, b] : edges) {
      bool was = zoning_.school_by_unit[a] != zoning_.school_by_unit[b];
      bool is = school_of(a) != school_of(b);
      cut_delta += (is ? 1 : 0) - (was ? 1 : 0);
    }
    if (cut_delta != 0) {
      int li = inst_.unit_level[m.unit_a];
      pending_.cut_upd.emplace_back(li, cut_count_[li] + cut_delta);
      delta += b_comp_[li] * static_cast<double>(cut_delta);
    }
  }
  if (sel_feed_) {
    for (const auto& [li, w] : pending_.feeder_weighted_upd)
      delta += b_feed_[li] * (w - feeder_weighted_[li]);
  }

  pending_.delta = delta;
  pending_.valid = true;
  return delta;
}

void SearchState::commit(const Move& m) {
  if (!pending_.valid) throw ModelError("commit without a successful evaluate_move");
  std::vector<std::pair<int, int>> moves;
  moves.emplace_back(m.unit_a, m.school_a);
  if (m.kind == Move::Kind::swap) moves.emplace_back(m.unit_b, m.school_b);

  for (const auto& s : pending_.schools) {
    o_[s.school] = s.o;
    og_[s.school] = s.og;
    dist_num_[s.school] = s.num;
    dist_den_[s.school] = s.den;
  }
  for (const auto& [li, c] : pending_.cut_upd) cut_count_[li] = c;
  for (const auto& [li, key, d] : pending_.feeder_key_upd) feeder_c_[li][key] += d;
  for (const auto& [li, c] : pending_.feeder_count_upd) feeder_count_[li] = c;
  for (const auto& [li, w] : pending_.feeder_weighted_upd) feeder_weighted_[li] = w;

  for (const auto& [u, to] : moves) {
    int from = zoning_.school_by_unit[u];
    // O(1) removal from the donor's unit list.
    auto& fu = school_units_[from];
    int pos = unit_pos_in_school_[u];
    int last = fu.back();
    fu[pos] = last;
    unit_pos_in_school_[last] = pos;
    fu.pop_back();
    unit_pos_in_school_[u] = static_cast<int>(school_units_[to].size());
    school_units_[to].push_back(u);
    zoning_.school_by_unit[u] = to;
  }
  objective_ += pending_.delta;
  pending_.valid = false;
}

}  // namespace rezone::solver_detail
