#include <doctest.h>

#include <cmath>

#include <nlohmann/json.hpp>

#include "rezone/eval.hpp"
#include "rezone/synth.hpp"
#include "testutil.hpp"

using namespace rezone;
using testutil::config_with;
using testutil::make_feeder_fixture;
using testutil::make_tiny1;
using testutil::TempDir;
using testutil::zoning_with;

namespace {

// Instance with one level and the given (n_students, n_group, sq_school)
// units; every student sits 1 mile from every school.
Instance flat_instance(const std::vector<std::tuple<long long, long long, SchoolId>>& units,
                       const std::vector<SchoolId>& school_ids) {
  Instance inst;
  inst.level_set = LevelSet::of({1});
  for (SchoolId id : school_ids) {
    School s;
    s.id = id;
    s.level = 1;
    s.cap_min = 0;
    s.cap_max = 1000;
    s.cap_desired = 10;
    inst.schools.push_back(s);
  }
  long long next_student = 1;
  for (std::size_t i = 0; i < units.size(); ++i) {
    auto [n, g, sq] = units[i];
    PlanningUnit u;
    u.id = static_cast<UnitId>(i + 1);
    u.level = 1;
    u.n_students = n;
    u.n_group = g;
    u.sq_school = sq;
    inst.units.push_back(u);
    for (long long k = 0; k < n; ++k) {
      Student st;
      st.id = next_student++;
      st.level = 1;
      st.sq_school = sq;
      st.in_group = k < g;
      st.residence_units[1] = u.id;
      for (SchoolId sid : school_ids) st.distances[sid] = 1.0;
      inst.students.push_back(st);
    }
  }
  inst.adjacency.assign(1, {});
  for (std::size_t i = 1; i < units.size(); ++i)
    inst.adjacency[0].edges.push_back(
        {static_cast<UnitId>(i), static_cast<UnitId>(i + 1), 1.0});
  inst.finalize();
  inst.set_candidates(eliminate_candidates(inst, ConstraintConfig{}));
  return inst;
}

}  // namespace

TEST_CASE("evaluate reproduces the TINY-1 hand-computed metrics") {
  Instance inst = make_tiny1();
  auto cfg = config_with(inst, {Objective::balance});
  auto report = eval::evaluate(inst.sq_zoning, inst, cfg);
  const auto& m = report.at(1);
  CHECK(m.avg_driving_miles == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(m.dissimilarity_defined);
  // 1/2 * (|10/12 - 10/28| + |2/12 - 18/28|) = 10/21
  CHECK(m.district_dissimilarity == doctest::Approx(10.0 / 21.0).epsilon(1e-9));
  CHECK(m.rezoned_students == 0);
  CHECK(m.rezoned_group_students == 0);
  CHECK(m.rezoned_units == 0);
  CHECK_FALSE(m.feeder_count.has_value());  // single level
}

TEST_CASE("evaluate counts rezoned entities for p2 -> B") {
  Instance inst = make_tiny1();
  auto cfg = config_with(inst, {Objective::balance});
  auto report = eval::evaluate(zoning_with(inst, {{2, 2}}), inst, cfg);
  const auto& m = report.at(1);
  CHECK(m.rezoned_students == 10);
  CHECK(m.rezoned_group_students == 6);
  CHECK(m.rezoned_units == 1);
  CHECK(m.pct_students == doctest::Approx(25.0));
  CHECK(m.pct_group_students == doctest::Approx(50.0));
  CHECK(m.pct_units == doctest::Approx(25.0));
}

TEST_CASE("dissimilarity is invariant under splitting schools into equal halves") {
  Instance whole = flat_instance(
      {{10, 6, 1}, {10, 6, 1}, {10, 0, 2}, {10, 0, 2}}, {1, 2});
  Instance halves = flat_instance(
      {{10, 6, 1}, {10, 6, 3}, {10, 0, 2}, {10, 0, 4}}, {1, 2, 3, 4});
  bool d1 = false, d2 = false;
  double a = eval::district_dissimilarity(whole.sq_zoning, whole, 1, d1);
  double b = eval::district_dissimilarity(halves.sq_zoning, halves, 1, d2);
  REQUIRE(d1);
  REQUIRE(d2);
  CHECK(a == doctest::Approx(b).epsilon(1e-12));
}

TEST_CASE("dissimilarity extremes: proportional 0, fully separated 1") {
  Instance proportional = flat_instance(
      {{10, 3, 1}, {10, 3, 1}, {10, 3, 2}, {10, 3, 2}}, {1, 2});
  bool defined = false;
  CHECK(eval::district_dissimilarity(proportional.sq_zoning, proportional, 1, defined) ==
        doctest::Approx(0.0));
  CHECK(defined);

  Instance separated = flat_instance(
      {{10, 10, 1}, {10, 10, 1}, {10, 0, 2}, {10, 0, 2}}, {1, 2});
  CHECK(eval::district_dissimilarity(separated.sq_zoning, separated, 1, defined) ==
        doctest::Approx(1.0));
}

TEST_CASE("dissimilarity is undefined without group students") {
  Instance inst = flat_instance({{10, 0, 1}, {10, 0, 2}}, {1, 2});
  bool defined = true;
  eval::district_dissimilarity(inst.sq_zoning, inst, 1, defined);
  CHECK_FALSE(defined);
  auto report = eval::evaluate(inst.sq_zoning, inst, config_with(inst, {}));
  CHECK_FALSE(report.at(1).dissimilarity_defined);
}

TEST_CASE("evaluate(SQ) reproduces the recorded status-quo school counts") {
  synth::SynthParams sp;
  sp.rows = 6;
  sp.cols = 5;
  sp.levels = {1, 2};
  sp.schools_per_level = {3, 2};
  sp.seed = 77;
  Instance inst = synth::generate(sp);
  auto counts = objectives::school_counts(inst.sq_zoning, inst);
  for (int sc = 0; sc < inst.n_schools(); ++sc) {
    CHECK(counts.enrolled[sc] == inst.schools[sc].sq_enrolled);
    CHECK(counts.group[sc] == inst.schools[sc].sq_group);
  }
}

TEST_CASE("zoning and geojson exports are byte-deterministic") {
  synth::SynthParams sp;
  sp.rows = 4;
  sp.cols = 4;
  sp.levels = {1};
  sp.schools_per_level = {2};
  sp.seed = 9;
  Instance inst = synth::generate(sp);
  TempDir dir;
  eval::export_zoning_csv(inst.sq_zoning, inst, dir.file("a.csv"));
  eval::export_zoning_csv(inst.sq_zoning, inst, dir.file("b.csv"));
  CHECK(testutil::read_bytes(dir.file("a.csv")) == testutil::read_bytes(dir.file("b.csv")));
  eval::export_geojson(inst.sq_zoning, inst, dir.file("a.geojson"));
  eval::export_geojson(inst.sq_zoning, inst, dir.file("b.geojson"));
  CHECK(testutil::read_bytes(dir.file("a.geojson")) ==
        testutil::read_bytes(dir.file("b.geojson")));
}

TEST_CASE("zoning csv carries the changed flag") {
  Instance inst = make_tiny1();
  TempDir dir;
  eval::export_zoning_csv(zoning_with(inst, {{2, 2}}), inst, dir.file("z.csv"));
  std::string bytes = testutil::read_bytes(dir.file("z.csv"));
  CHECK(bytes.find("2,1,2,1,true") != std::string::npos);  // p2 changed
  CHECK(bytes.find("1,1,1,1,false") != std::string::npos);
}

TEST_CASE("metrics JSON carries per-level values and round-trips") {
  Instance inst = make_tiny1();
  auto cfg = config_with(inst, {Objective::balance});
  auto report = eval::evaluate(zoning_with(inst, {{2, 2}}), inst, cfg);
  auto doc = nlohmann::json::parse(eval::metrics_json(report));
  auto level = doc.at("levels").at("1");
  CHECK(level.at("rezoned_students").get<long long>() == 10);
  CHECK(level.at("rezoned_units_pct").get<double>() == doctest::Approx(25.0));
  CHECK(level.at("feeder_count").is_null());
  CHECK(level.at("avg_driving_miles").get<double>() > 0);
}

TEST_CASE("compare_runs: zero variance across identical runs") {
  Instance inst = make_tiny1();
  auto cfg = config_with(inst, {Objective::balance});
  Zoning z = zoning_with(inst, {{2, 2}});
  std::vector<eval::RunForComparison> runs(5, {&z, 0.3, false});
  auto table = eval::compare_runs(runs, inst, cfg);
  for (const auto& row : table.rows) {
    CHECK(row.se == doctest::Approx(0.0));
    CHECK(row.n == 5);
  }
  const auto* obj = table.find(1, "objective");
  REQUIRE(obj);
  CHECK(obj->mean == doctest::Approx(0.3));
}

TEST_CASE("compare_runs reports a proven-optimal run alone") {
  Instance inst = make_tiny1();
  auto cfg = config_with(inst, {Objective::balance});
  Zoning sq = inst.sq_zoning;
  Zoning best = zoning_with(inst, {{2, 2}});
  std::vector<eval::RunForComparison> runs = {
      {&sq, 0.4, false}, {&best, 0.3, true}, {&sq, 0.4, false}};
  auto table = eval::compare_runs(runs, inst, cfg);
  const auto* obj = table.find(1, "objective");
  REQUIRE(obj);
  CHECK(obj->from_optimal);
  CHECK(obj->n == 1);
  CHECK(obj->mean == doctest::Approx(0.3));
  CHECK(obj->se == 0.0);
}

TEST_CASE("compare_runs emits one sub-table per level") {
  Instance inst = make_feeder_fixture(true);
  auto cfg = config_with(inst, {Objective::feeder});
  Zoning z = inst.sq_zoning;
  std::vector<eval::RunForComparison> runs = {{&z, 2.0, false}, {&z, 2.0, false}};
  auto table = eval::compare_runs(runs, inst, cfg);
  CHECK(table.find(1, "avg_driving_miles") != nullptr);
  CHECK(table.find(2, "avg_driving_miles") != nullptr);
  CHECK(table.find(1, "feeder_count") != nullptr);
  CHECK(table.find(2, "feeder_count") == nullptr);  // top level has none
  // Text rendering groups by level.
  std::string text = eval::comparison_text(table);
  CHECK(text.find("level 1") != std::string::npos);
  CHECK(text.find("level 2") != std::string::npos);
  TempDir dir;
  eval::write_comparison_csv(table, dir.file("cmp.csv"));
  CHECK(testutil::read_bytes(dir.file("cmp.csv")).find("avg_driving_miles") !=
        std::string::npos);
}
