#include <doctest.h>

#include <set>

#include "rezone/constraints.hpp"
#include "rezone/synth.hpp"
#include "testutil.hpp"

using namespace rezone;
using namespace rezone::constraints;
using testutil::config_with;
using testutil::make_feeder_fixture;
using testutil::make_tiny1;
using testutil::zoning_with;

TEST_CASE("check_travel flags every student of a unit moved past its bound") {
  Instance inst = make_tiny1();
  ConstraintConfig cc;  // mu = 1
  auto v = check_travel(zoning_with(inst, {{1, 2}}), inst, cc);
  CHECK(v.size() == 10);  // all of p1: 3 > 2 * 1
  std::set<long long> ids;
  for (const auto& viol : v) ids.insert(viol.entity);
  CHECK(ids == std::set<long long>{1, 2, 3, 4, 5, 6, 7, 8, 9, 10});

  CHECK(check_travel(inst.sq_zoning, inst, cc).empty());
  // Boundary-tight case: p3 -> A costs 2 = (1+1)*1 exactly.
  CHECK(check_travel(zoning_with(inst, {{3, 1}}), inst, cc).empty());
}

TEST_CASE("check_capacity reports both overflow and underflow") {
  Instance inst = make_tiny1();
  CHECK(check_capacity(inst.sq_zoning, inst).empty());
  auto v = check_capacity(zoning_with(inst, {{3, 1}, {4, 1}}), inst);
  REQUIRE(v.size() == 2);
  CHECK(v[0].entity == 1);
  CHECK(v[0].measured == 40);
  CHECK(v[0].bound == 35);
  CHECK(v[1].entity == 2);
  CHECK(v[1].measured == 0);
  CHECK(v[1].bound == 5);
  CHECK(check_capacity(zoning_with(inst, {{3, 1}}), inst).empty());
}

TEST_CASE("check_contiguity counts components against the status quo") {
  Instance inst = make_tiny1();
  // A = {p1, p3}, B = {p2, p4}: two components each on the path graph.
  auto v = check_contiguity(zoning_with(inst, {{2, 2}, {3, 1}}), inst, 1);
  REQUIRE(v.size() == 2);
  CHECK(v[0].measured == 2);
  CHECK(v[0].bound == 1);
  CHECK(check_contiguity(inst.sq_zoning, inst, 1).empty());
  CHECK(check_contiguity(zoning_with(inst, {{2, 2}}), inst, 1).empty());
}

TEST_CASE("contiguity verdicts are invariant under school relabeling") {
  Instance inst = make_tiny1();
  Zoning broken = zoning_with(inst, {{2, 2}, {3, 1}});
  Zoning relabeled = broken;
  for (auto& s : relabeled.school_by_unit) s = s == 0 ? 1 : 0;
  CHECK(check_contiguity(broken, inst, 1).size() ==
        check_contiguity(relabeled, inst, 1).size());
}

TEST_CASE("check_dissimilarity_bound on the TINY-1 cases") {
  Instance inst = make_tiny1();
  ConstraintConfig cc;  // lambda = 0.15
  CHECK(check_dissimilarity_bound(inst.sq_zoning, inst, cc).empty());
  // p3 -> A: school B keeps only p4, d_B = 0.3 over its bound.
  auto v = check_dissimilarity_bound(zoning_with(inst, {{3, 1}}), inst, cc);
  REQUIRE(v.size() == 1);
  CHECK(v[0].entity == 2);
  CHECK(v[0].measured == doctest::Approx(0.3));
  CHECK(v[0].bound == doctest::Approx(0.2));
  CHECK(check_dissimilarity_bound(zoning_with(inst, {{2, 2}}), inst, cc).empty());
}

TEST_CASE("check_feeder_no_increase compares against the status quo count") {
  // Status quo: both middle units feed M1 -> one pattern.
  Instance inst = make_feeder_fixture(false);
  ConstraintConfig cc;
  CHECK(check_feeder_no_increase(inst.sq_zoning, inst, cc).empty());
  // v2 -> M2 splits E1 across two middle schools: 2 > 1.
  auto v = check_feeder_no_increase(zoning_with(inst, {{202, 22}}), inst, cc);
  REQUIRE(v.size() == 1);
  CHECK(v[0].entity == 1);  // level id
  CHECK(v[0].measured == 2);
  CHECK(v[0].bound == 1);

  // Merging two patterns into one is allowed.
  Instance split = make_feeder_fixture(true);
  CHECK(check_feeder_no_increase(zoning_with(split, {{202, 21}}), split, cc).empty());
}

TEST_CASE("check_feasible unions the active families") {
  Instance inst = make_tiny1();
  ConstraintConfig cc;
  cc.enforce_dissimilarity_bound = true;

  auto cfg_balance = config_with(inst, {Objective::balance}, cc);
  CHECK(check_feasible(inst.sq_zoning, inst, cfg_balance).ok);
  auto rep = check_feasible(zoning_with(inst, {{3, 1}}), inst, cfg_balance);
  CHECK_FALSE(rep.ok);
  REQUIRE(rep.violations.size() == 1);
  CHECK(rep.violations[0].family == Family::dissimilarity_bound);

  // Same zoning with balance not selected: the bound is not checked.
  auto cfg_distance = config_with(inst, {Objective::distance}, cc);
  CHECK(check_feasible(zoning_with(inst, {{3, 1}}), inst, cfg_distance).ok);
}

TEST_CASE("the status quo is feasible under every configuration") {
  Instance tiny = make_tiny1();
  Instance feeder = make_feeder_fixture(true);
  synth::SynthParams sp;
  sp.rows = 5;
  sp.cols = 5;
  sp.levels = {1, 2};
  sp.schools_per_level = {3, 2};
  sp.seed = 7;
  Instance grid = synth::generate(sp);

  for (const Instance* inst : {&tiny, &feeder, &grid}) {
    for (bool bound : {false, true}) {
      for (bool feeder_fix : {false, true}) {
        for (std::set<Objective> sel :
             {std::set<Objective>{Objective::distance},
              std::set<Objective>{Objective::balance},
              std::set<Objective>{Objective::balance, Objective::feeder,
                                  Objective::compact, Objective::distance}}) {
          ConstraintConfig cc;
          cc.enforce_dissimilarity_bound = bound;
          cc.enforce_feeder_no_increase = feeder_fix;
          auto cfg = config_with(*inst, sel, cc);
          CAPTURE(bound);
          CAPTURE(feeder_fix);
          CHECK(check_feasible(inst->sq_zoning, *inst, cfg).ok);
        }
      }
    }
  }
}

TEST_CASE("zonings within candidate sets always pass check_travel") {
  synth::SynthParams sp;
  sp.rows = 4;
  sp.cols = 5;
  sp.levels = {1};
  sp.schools_per_level = {3};
  std::uint64_t state = 31337;
  auto next = [&] {
    state = state * 6364136223846793005ull + 1442695040888963407ull;
    return state >> 33;
  };
  for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
    sp.seed = seed;
    Instance inst = synth::generate(sp);
    ConstraintConfig cc;  // defaults match the candidate derivation
    for (int trial = 0; trial < 20; ++trial) {
      Zoning z = inst.sq_zoning;
      for (int u = 0; u < inst.n_units(); ++u) {
        const auto& cand = inst.candidates.by_unit[u];
        z.school_by_unit[u] = cand[next() % cand.size()];
      }
      CHECK(check_travel(z, inst, cc).empty());
    }
  }
}

TEST_CASE("check_travel honors the absolute slack bound") {
  Instance inst = make_tiny1();
  ConstraintConfig cc;
  cc.mu_ratio = 1.0;
  cc.mu_abs = 0.5;  // p2 -> B costs 2 vs status quo 1: over 1 + 0.5
  auto v = check_travel(zoning_with(inst, {{2, 2}}), inst, cc);
  CHECK(v.size() == 10);
  CHECK(v[0].bound == doctest::Approx(1.5));
  cc.mu_abs = 1.0;  // 2 <= min(2, 1 + 1): boundary-tight again
  CHECK(check_travel(zoning_with(inst, {{2, 2}}), inst, cc).empty());
}

TEST_CASE("contiguity tolerates a status-quo-discontiguous school") {
  // Path 1-2-3-4-5; school 1 holds {1,3} (two components in the status quo),
  // school 2 holds {2,4,5}.
  Instance inst;
  inst.level_set = LevelSet::of({1});
  for (SchoolId id : {1, 2}) {
    School s;
    s.id = id;
    s.level = 1;
    s.cap_min = 0;
    s.cap_max = 100;
    s.cap_desired = 10;
    inst.schools.push_back(s);
  }
  const SchoolId sq[5] = {1, 2, 1, 2, 2};
  long long next_student = 1;
  for (int i = 0; i < 5; ++i) {
    PlanningUnit u;
    u.id = i + 1;
    u.level = 1;
    u.n_students = 2;
    u.n_group = 0;
    u.sq_school = sq[i];
    inst.units.push_back(u);
    for (int k = 0; k < 2; ++k) {
      Student st;
      st.id = next_student++;
      st.level = 1;
      st.sq_school = sq[i];
      st.residence_units[1] = u.id;
      st.distances[1] = 1.0;
      st.distances[2] = 1.0;
      inst.students.push_back(st);
    }
  }
  inst.adjacency.assign(1, {});
  inst.adjacency[0].edges = {{1, 2, 1.0}, {2, 3, 1.0}, {3, 4, 1.0}, {4, 5, 1.0}};
  inst.finalize();
  inst.set_candidates(eliminate_candidates(inst, ConstraintConfig{}));

  CHECK(inst.school_sq_components[inst.school_index(1)] == 2);
  CHECK(inst.school_sq_components[inst.school_index(2)] == 2);
  // The status quo's own component counts are the bound, so it passes.
  CHECK(check_contiguity(inst.sq_zoning, inst, 1).empty());
  // School 1 = {1,3,5}: three components exceeds its recorded two.
  Zoning z = inst.sq_zoning;
  z.school_by_unit[4] = inst.school_index(1);  // unit 5 -> school 1
  auto v = check_contiguity(z, inst, 1);
  REQUIRE(v.size() == 1);
  CHECK(v[0].entity == 1);
  CHECK(v[0].measured == 3);
  CHECK(v[0].bound == 2);
}

TEST_CASE("feasibility is monotone in mu") {
  Instance inst = make_tiny1();
  // p3 -> A is travel-tight at mu = 1; it must stay feasible for larger mu
  // and become infeasible for smaller mu.
  Zoning z = zoning_with(inst, {{3, 1}});
  for (double mu : {1.0, 1.5, 3.0}) {
    ConstraintConfig cc;
    cc.mu_ratio = mu;
    CHECK(check_travel(z, inst, cc).empty());
  }
  ConstraintConfig tight;
  tight.mu_ratio = 0.5;
  CHECK_FALSE(check_travel(z, inst, tight).empty());
}

TEST_CASE("FeasibilityReport serializes text and rows") {
  Instance inst = make_tiny1();
  auto cfg = config_with(inst, {Objective::distance});
  auto rep = check_feasible(zoning_with(inst, {{1, 2}}), inst, cfg);
  CHECK_FALSE(rep.ok);
  CHECK(rep.to_text().find("travel") != std::string::npos);
  auto rows = rep.to_rows();
  REQUIRE(!rows.empty());
  CHECK(rows[0][0] == "travel");
  CHECK(rows[0].size() == 4);
}
