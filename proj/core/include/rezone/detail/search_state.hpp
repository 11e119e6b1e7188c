#pragma once

#include <cstdint>
#include <optional>
#include <tuple>
#include <vector>

#include "rezone/objectives.hpp"
#include "rezone/types.hpp"

namespace rezone::solver_detail {

// Incrementally maintained aggregates for the annealing search. Counts and
// cut/feeder tallies are exact integers; per-school distance sums are doubles
// and get reconciled by periodic full rebuilds in the driver.
class SearchState {
public:
  struct Move {
    enum class Kind { reassign, swap } kind = Kind::reassign;
    int unit_a = -1;
    int school_a = -1;  // new school index for unit_a
    int unit_b = -1;    // swap only
    int school_b = -1;
  };

  SearchState(const Instance& inst, const ObjectiveConfig& config);

  void reset(const Zoning& z);  // full rebuild from a zoning

  const Zoning& zoning() const { return zoning_; }
  double objective() const { return objective_; }

  /// Total objective recomputed from scratch off the current zoning, leaving
  /// the incremental value untouched. Reconciliation + property tests.
  double recompute_objective() const;

  /// Evaluate a move: the objective delta when every active constraint
  /// family stays satisfied, nullopt otherwise. Caches the evaluation for
  /// commit().
  std::optional<double> evaluate_move(const Move& m);

  /// Apply the previously evaluated move (same move, no mutation between).
  void commit(const Move& m);

  long long feeder_count(int level_idx) const { return feeder_count_[level_idx]; }
  long long school_enrollment(int school_idx) const { return o_[school_idx]; }
  long long school_group(int school_idx) const { return og_[school_idx]; }
  bool unit_on_boundary(int unit_idx) const;

private:
  struct SchoolUpd {
    int school = -1;
    long long o = 0, og = 0;
    double num = 0, den = 0;
  };
  struct Pending {
    bool valid = false;
    double delta = 0;
    std::vector<SchoolUpd> schools;
    std::vector<std::pair<int, long long>> cut_upd;  // (level idx, new count)
    // (level idx, flat s1*width+s2 key, count delta)
    std::vector<std::tuple<int, std::size_t, long long>> feeder_key_upd;
    std::vector<std::pair<int, long long>> feeder_count_upd;
    std::vector<std::pair<int, double>> feeder_weighted_upd;
  };

  double objective_from_aggregates(
      const std::vector<long long>& o, const std::vector<long long>& og,
      const std::vector<double>& num, const std::vector<double>& den,
      const std::vector<long long>& cuts, const std::vector<double>& feeder_weighted) const;
  double school_objective_terms(int school_idx, long long o, long long og, double num,
                                double den) const;  // NaN when undefined
  bool contiguity_ok(int school_idx,
                     const std::vector<std::pair<int, int>>& moves) const;
  void collect_feeder_deltas(const std::vector<std::pair<int, int>>& moves, Pending& p);

  const Instance& inst_;
  const ObjectiveConfig& cfg_;

  Zoning zoning_;
  std::vector<long long> o_, og_;            // per school index
  std::vector<double> dist_num_, dist_den_;  // per school index
  std::vector<long long> cut_count_;         // per level index
  // feeder_c_[li][s1_local * width(li) + s2_local]: students on the
  // (s1 at l) -> (s2 at l+1) transition; empty at the top level.
  std::vector<std::vector<long long>> feeder_c_;
  std::vector<long long> feeder_count_;   // active patterns per level
  std::vector<double> feeder_weighted_;   // weight-scaled pattern sums
  std::vector<long long> sq_feeder_count_;
  std::vector<std::vector<int>> school_units_;  // (unordered) units per school
  std::vector<int> unit_pos_in_school_;         // position for O(1) removal
  double objective_ = 0;

  bool sel_dist_, sel_bal_, sel_comp_, sel_feed_, sel_cap_;
  std::vector<double> w_dist_, w_bal_, w_cap_, w_feed_;  // per school index
  std::vector<double> group_share_;                      // per level index
  std::vector<double> b_dist_, b_bal_, b_comp_, b_feed_, b_cap_;  // per level index

  Pending pending_;

  mutable std::vector<int> visit_mark_;
  mutable int visit_stamp_ = 0;
  mutable std::vector<int> bfs_stack_;
  // Scratch for feeder delta aggregation: (level, key) -> delta.
  std::vector<std::tuple<int, std::size_t, long long>> feeder_scratch_;
};

}  // namespace rezone::solver_detail
