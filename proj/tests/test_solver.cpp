#include <doctest.h>

#include <cmath>

#include "rezone/constraints.hpp"
#include "rezone/detail/search_state.hpp"
#include "rezone/solver.hpp"
#include "rezone/synth.hpp"
#include "testutil.hpp"

using namespace rezone;
using testutil::config_with;
using testutil::make_tiny1;
using testutil::zoning_with;

namespace {

SolverParams quick_params(std::uint64_t seed, long long iters = 30'000) {
  SolverParams p;
  p.seed = seed;
  p.time_limit = 30.0;
  p.max_iterations = iters;
  return p;
}

}  // namespace

TEST_CASE("solve finds the TINY-1 balance optimum under the bound") {
  Instance inst = make_tiny1();
  ConstraintConfig cc;
  cc.enforce_dissimilarity_bound = true;
  auto cfg = config_with(inst, {Objective::balance}, cc);
  auto res = solver::solve(inst, cfg, quick_params(7));
  CHECK(res.best_breakdown.total == doctest::Approx(0.3).epsilon(1e-9));
  CHECK(res.best_zoning == zoning_with(inst, {{2, 2}}));
  CHECK_FALSE(res.proven_optimal);
}

TEST_CASE("solve keeps the warm start when it is optimal") {
  Instance inst = make_tiny1();
  auto cfg = config_with(inst, {Objective::distance});
  auto res = solver::solve(inst, cfg, quick_params(11));
  CHECK(res.best_breakdown.total == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(res.best_zoning == inst.sq_zoning);
}

TEST_CASE("solve is deterministic for a fixed seed") {
  Instance inst = make_tiny1();
  ConstraintConfig cc;
  cc.enforce_dissimilarity_bound = true;
  auto cfg = config_with(inst, {Objective::balance}, cc);
  auto a = solver::solve(inst, cfg, quick_params(42));
  auto b = solver::solve(inst, cfg, quick_params(42));
  CHECK(a.best_zoning == b.best_zoning);
  CHECK(a.iterations == b.iterations);
  REQUIRE(a.trace.size() == b.trace.size());
  for (std::size_t i = 0; i < a.trace.size(); ++i) {
    CHECK(a.trace[i].iteration == b.trace[i].iteration);
    CHECK(a.trace[i].objective == b.trace[i].objective);  // bit-identical
  }
}

TEST_CASE("solve errors before searching on an infeasible warm start") {
  Instance inst = make_tiny1();
  // Shrink cap_max below the status-quo enrollment.
  for (auto& s : inst.schools) s.cap_max = 15;
  auto cfg = config_with(inst, {Objective::distance});
  CHECK_THROWS_WITH_AS(solver::solve(inst, cfg, quick_params(1)),
                       doctest::Contains("infeasible warm start"), ModelError);
}

TEST_CASE("solve's best objective matches a from-scratch recomputation") {
  Instance inst = make_tiny1();
  ConstraintConfig cc;
  cc.enforce_dissimilarity_bound = true;
  auto cfg = config_with(inst, {Objective::balance, Objective::compact}, cc);
  auto res = solver::solve(inst, cfg, quick_params(3));
  REQUIRE(!res.trace.empty());
  // Last trace point carries the incrementally maintained value; the
  // breakdown is recomputed from scratch.
  CHECK(res.trace.back().objective ==
        doctest::Approx(res.best_breakdown.total).epsilon(1e-9));
}

TEST_CASE("trace objectives are strictly decreasing") {
  Instance inst = make_tiny1();
  ConstraintConfig cc;
  cc.enforce_dissimilarity_bound = true;
  auto cfg = config_with(inst, {Objective::balance}, cc);
  auto res = solver::solve(inst, cfg, quick_params(5));
  for (std::size_t i = 1; i < res.trace.size(); ++i)
    CHECK(res.trace[i].objective < res.trace[i - 1].objective);
  // Warm start never abandoned for worse.
  auto sq_total = objectives::total_objective(inst.sq_zoning, inst, cfg).total;
  CHECK(res.best_breakdown.total <= sq_total + 1e-12);
}

TEST_CASE("every accepted state is feasible (debug assertion mode)") {
  synth::SynthParams sp;
  sp.rows = 4;
  sp.cols = 4;
  sp.levels = {1, 2};
  sp.schools_per_level = {3, 2};
  sp.seed = 17;
  Instance inst = synth::generate(sp);
  ConstraintConfig cc;
  cc.enforce_dissimilarity_bound = true;
  cc.enforce_feeder_no_increase = true;
  auto cfg = config_with(
      inst, {Objective::distance, Objective::balance, Objective::compact,
             Objective::feeder},
      cc);
  SolverParams p = quick_params(23, 4000);
  p.check_feasible_each_accept = true;  // throws on any infeasible acceptance
  auto res = solver::solve(inst, cfg, p);
  CHECK(constraints::check_feasible(res.best_zoning, inst, cfg).ok);
}

TEST_CASE("enumerate_optimal solves TINY-1 exactly") {
  Instance inst = make_tiny1();

  SUBCASE("compactness: optimum 1, tie broken lexicographically") {
    auto cfg = config_with(inst, {Objective::compact});
    auto res = solver::enumerate_optimal(inst, cfg);
    CHECK(res.proven_optimal);
    CHECK(res.best_breakdown.total == 1.0);
    // All three feasible zonings cut exactly one edge; the lexicographically
    // smallest assignment vector is p3 -> A.
    CHECK(res.best_zoning == zoning_with(inst, {{3, 1}}));
  }

  SUBCASE("balance with the bound: unique optimum p2 -> B at 0.3") {
    ConstraintConfig cc;
    cc.enforce_dissimilarity_bound = true;
    auto cfg = config_with(inst, {Objective::balance}, cc);
    auto res = solver::enumerate_optimal(inst, cfg);
    CHECK(res.best_breakdown.total == doctest::Approx(0.3).epsilon(1e-12));
    CHECK(res.best_zoning == zoning_with(inst, {{2, 2}}));
  }

  SUBCASE("distance: optimum is the status quo at 2.0") {
    auto cfg = config_with(inst, {Objective::distance});
    auto res = solver::enumerate_optimal(inst, cfg);
    CHECK(res.best_breakdown.total == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(res.best_zoning == inst.sq_zoning);
  }
}

TEST_CASE("enumerate_optimal refuses oversized spaces with an estimate") {
  synth::SynthParams sp;
  sp.rows = 5;
  sp.cols = 5;
  sp.levels = {1};
  sp.schools_per_level = {3};
  sp.seed = 2;
  Instance inst = synth::generate(sp);
  // Make every school admissible everywhere: 3^25 >> 1e7.
  ConstraintConfig wide;
  wide.mu_ratio = 1000.0;
  inst.set_candidates(eliminate_candidates(inst, wide));
  auto cfg = config_with(inst, {Objective::compact});
  CHECK_THROWS_WITH_AS(solver::enumerate_optimal(inst, cfg),
                       doctest::Contains("too large to enumerate"), ModelError);
}

TEST_CASE("solve matches the enumeration oracle on small synthetic instances") {
  // Quick cross-check; the acceptance suite runs the full 50-instance matrix.
  int matched = 0;
  for (std::uint64_t seed = 1; seed <= 6; ++seed) {
    synth::SynthParams sp;
    sp.rows = 2;
    sp.cols = 2 + static_cast<int>(seed % 3);
    sp.levels = seed % 2 == 0 ? std::vector<LevelId>{1, 2} : std::vector<LevelId>{1};
    sp.schools_per_level = seed % 2 == 0 ? std::vector<int>{2, 2} : std::vector<int>{2};
    sp.seed = seed;
    Instance inst = synth::generate(sp);
    ConstraintConfig cc;
    cc.enforce_dissimilarity_bound = true;
    std::set<Objective> sel = seed % 2 == 0
                                  ? std::set<Objective>{Objective::distance,
                                                        Objective::feeder}
                                  : std::set<Objective>{Objective::balance,
                                                        Objective::compact};
    auto cfg = config_with(inst, sel, cc);
    auto oracle = solver::enumerate_optimal(inst, cfg);
    auto heur = solver::solve(inst, cfg, quick_params(seed * 101, 60'000));
    if (std::abs(heur.best_breakdown.total - oracle.best_breakdown.total) <= 1e-9)
      ++matched;
  }
  CHECK(matched >= 5);
}

TEST_CASE("incremental evaluation equals full recomputation after random moves") {
  synth::SynthParams sp;
  sp.rows = 5;
  sp.cols = 5;
  sp.levels = {1, 2};
  sp.schools_per_level = {4, 2};
  sp.seed = 5;
  Instance inst = synth::generate(sp);
  ConstraintConfig cc;
  cc.enforce_dissimilarity_bound = true;
  auto cfg = config_with(
      inst, {Objective::distance, Objective::balance, Objective::compact,
             Objective::feeder},
      cc);

  solver_detail::SearchState state(inst, cfg);
  std::uint64_t rng = 1234567;
  auto next = [&] {
    rng = rng * 6364136223846793005ull + 1442695040888963407ull;
    return rng >> 33;
  };
  int applied = 0;
  for (int trial = 0; trial < 4000 && applied < 300; ++trial) {
    int u = static_cast<int>(next() % inst.units.size());
    const auto& cand = inst.candidates.by_unit[u];
    if (cand.size() < 2) continue;
    int target = cand[next() % cand.size()];
    if (target == state.zoning().school_by_unit[u]) continue;
    solver_detail::SearchState::Move m;
    m.kind = solver_detail::SearchState::Move::Kind::reassign;
    m.unit_a = u;
    m.school_a = target;
    auto delta = state.evaluate_move(m);
    if (!delta) continue;
    double before = state.objective();
    state.commit(m);
    ++applied;
    double incremental = state.objective();
    double full = state.recompute_objective();
    CHECK(incremental == doctest::Approx(full).epsilon(1e-9));
    CHECK(incremental == doctest::Approx(before + *delta).epsilon(1e-9));
    // Integer aggregates must match a from-scratch count exactly.
    auto counts = objectives::school_counts(state.zoning(), inst);
    for (int sc = 0; sc < inst.n_schools(); ++sc) {
      CHECK(state.school_enrollment(sc) == counts.enrolled[sc]);
      CHECK(state.school_group(sc) == counts.group[sc]);
    }
    for (int li = 0; li + 1 < inst.level_set.count(); ++li) {
      auto fp = objectives::feeder_patterns(state.zoning(), inst,
                                            inst.level_set.levels[li],
                                            cc.epsilon, cfg.weights);
      CHECK(state.feeder_count(li) == fp.count);
    }
  }
  CHECK(applied >= 100);
}

TEST_CASE("batch_solve: identical seeds give identical results") {
  Instance inst = make_tiny1();
  ConstraintConfig cc;
  cc.enforce_dissimilarity_bound = true;
  auto cfg = config_with(inst, {Objective::balance}, cc);
  auto batch = solver::batch_solve(inst, cfg, {1, 1}, quick_params(0, 20'000));
  REQUIRE(batch.runs.size() == 2);
  REQUIRE(batch.runs[0].result);
  REQUIRE(batch.runs[1].result);
  CHECK(batch.runs[0].result->best_zoning == batch.runs[1].result->best_zoning);
  CHECK(batch.runs[0].result->best_breakdown.total ==
        batch.runs[1].result->best_breakdown.total);
  CHECK(batch.objective_se == 0.0);
}

TEST_CASE("batch_solve flags single-sample summaries") {
  Instance inst = make_tiny1();
  auto cfg = config_with(inst, {Objective::distance});
  auto batch = solver::batch_solve(inst, cfg, {9}, quick_params(0, 5'000));
  CHECK(batch.single_sample);
  CHECK(batch.objective_se == 0.0);
  CHECK(batch.objective_mean == doctest::Approx(2.0));
}

TEST_CASE("batch_solve reaches the oracle optimum on every seed") {
  Instance inst = make_tiny1();
  ConstraintConfig cc;
  cc.enforce_dissimilarity_bound = true;
  auto cfg = config_with(inst, {Objective::balance}, cc);
  auto batch = solver::batch_solve(inst, cfg, {1, 2, 3}, quick_params(0, 30'000));
  for (const auto& run : batch.runs) {
    REQUIRE(run.result);
    CHECK(run.result->best_breakdown.total == doctest::Approx(0.3).epsilon(1e-9));
  }
  CHECK(batch.objective_mean == doctest::Approx(0.3).epsilon(1e-9));
  CHECK(batch.objective_se == doctest::Approx(0.0));
  // Metric summary rows exist for the single level.
  CHECK(batch.metrics.find(1, "district_dissimilarity") != nullptr);
}

TEST_CASE("batch_solve is independent of the thread count") {
  Instance inst = make_tiny1();
  ConstraintConfig cc;
  cc.enforce_dissimilarity_bound = true;
  auto cfg = config_with(inst, {Objective::balance}, cc);
  auto one = solver::batch_solve(inst, cfg, {1, 2, 3, 4}, quick_params(0, 10'000), 1);
  auto four = solver::batch_solve(inst, cfg, {1, 2, 3, 4}, quick_params(0, 10'000), 4);
  REQUIRE(one.runs.size() == four.runs.size());
  for (std::size_t i = 0; i < one.runs.size(); ++i) {
    REQUIRE(one.runs[i].result);
    REQUIRE(four.runs[i].result);
    CHECK(one.runs[i].result->best_zoning == four.runs[i].result->best_zoning);
  }
}
