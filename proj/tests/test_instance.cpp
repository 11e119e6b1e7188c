#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

#include "rezone/constraints.hpp"
#include "rezone/instance.hpp"
#include "rezone/ses.hpp"
#include "testutil.hpp"

using namespace rezone;
using testutil::make_tiny1;
using testutil::TempDir;

namespace {

std::set<SchoolId> candidate_ids(const Instance& inst, UnitId unit) {
  std::set<SchoolId> out;
  for (int sc : inst.candidates.by_unit[inst.unit_index(unit)])
    out.insert(inst.schools[sc].id);
  return out;
}

const char* kTiny1Schools =
    "school_id,level,cap_min,cap_max,cap_desired,site_unit\n"
    "1,1,5,35,20,1\n"
    "2,1,5,35,20,4\n";

std::string tiny1_units() {
  return "unit_id,level,sq_school,n_students,n_group\n"
         "1,1,1,10,4\n"
         "2,1,1,10,6\n"
         "3,1,2,10,2\n"
         "4,1,2,10,0\n";
}

std::string tiny1_students() {
  std::string s = "student_id,level,sq_school,in_group,unit_l1,unit_l2,unit_l3\n";
  const long long group[4] = {4, 6, 2, 0};
  const int sq[4] = {1, 1, 2, 2};
  for (int p = 0; p < 4; ++p)
    for (int i = 0; i < 10; ++i) {
      int id = p * 10 + i + 1;
      s += std::to_string(id) + ",1," + std::to_string(sq[p]) + "," +
           (i < group[p] ? "1" : "0") + "," + std::to_string(p + 1) + ",,\n";
    }
  return s;
}

std::string tiny1_distances() {
  std::string s = "student_id,school_id,miles\n";
  const double da[4] = {1, 1, 2, 3};
  const double db[4] = {3, 2, 1, 1};
  for (int p = 0; p < 4; ++p)
    for (int i = 0; i < 10; ++i) {
      int id = p * 10 + i + 1;
      s += std::to_string(id) + ",1," + std::to_string(static_cast<int>(da[p])) + "\n";
      s += std::to_string(id) + ",2," + std::to_string(static_cast<int>(db[p])) + "\n";
    }
  return s;
}

const char* kTiny1Adjacency =
    "level,unit_a,unit_b,shared_boundary_len\n"
    "1,1,2,1\n"
    "1,2,3,1\n"
    "1,3,4,1\n";

void write_tiny1_csvs(const TempDir& dir) {
  testutil::write_text(dir.file("schools.csv"), kTiny1Schools);
  testutil::write_text(dir.file("units.csv"), tiny1_units());
  testutil::write_text(dir.file("students.csv"), tiny1_students());
  testutil::write_text(dir.file("distances.csv"), tiny1_distances());
  testutil::write_text(dir.file("adjacency.csv"), kTiny1Adjacency);
}

}  // namespace

TEST_CASE("load_instance ingests the TINY-1 fixture files") {
  TempDir dir;
  write_tiny1_csvs(dir);
  ConstraintConfig cc;
  Instance inst = load_instance(InstancePaths::in_dir(dir.path()), cc);

  CHECK(inst.units.size() == 4);
  CHECK(inst.schools.size() == 2);
  CHECK(inst.students.size() == 40);
  CHECK(inst.level_set.levels == std::vector<LevelId>{1});
  CHECK(inst.level_students[0] == 40);
  CHECK(inst.level_group[0] == 12);

  // Status-quo constants derived from the unit rosters.
  const School& a = inst.schools[inst.school_index(1)];
  const School& b = inst.schools[inst.school_index(2)];
  CHECK(a.sq_enrolled == 20);
  CHECK(a.sq_group == 10);
  CHECK(b.sq_enrolled == 20);
  CHECK(b.sq_group == 2);
  CHECK(inst.school_sq_components[inst.school_index(1)] == 1);
  CHECK(inst.school_sq_components[inst.school_index(2)] == 1);

  // Candidate sets under mu = 1.
  CHECK(candidate_ids(inst, 1) == std::set<SchoolId>{1});
  CHECK(candidate_ids(inst, 2) == std::set<SchoolId>{1, 2});
  CHECK(candidate_ids(inst, 3) == std::set<SchoolId>{1, 2});
  CHECK(candidate_ids(inst, 4) == std::set<SchoolId>{2});
}

TEST_CASE("load_instance rejects unknown school references naming file and id") {
  TempDir dir;
  write_tiny1_csvs(dir);
  testutil::write_text(dir.file("units.csv"),
                       "unit_id,level,sq_school,n_students,n_group\n"
                       "1,1,1,10,4\n"
                       "2,1,99,10,6\n"
                       "3,1,2,10,2\n"
                       "4,1,2,10,0\n");
  ConstraintConfig cc;
  try {
    load_instance(InstancePaths::in_dir(dir.path()), cc);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    std::string msg = e.what();
    CHECK(msg.find("units.csv") != std::string::npos);
    CHECK(msg.find("99") != std::string::npos);
  }
}

TEST_CASE("load_instance rejects empty students file against nonempty units") {
  TempDir dir;
  write_tiny1_csvs(dir);
  testutil::write_text(dir.file("students.csv"),
                       "student_id,level,sq_school,in_group,unit_l1,unit_l2,unit_l3\n");
  testutil::write_text(dir.file("distances.csv"), "student_id,school_id,miles\n");
  ConstraintConfig cc;
  CHECK_THROWS_WITH_AS(load_instance(InstancePaths::in_dir(dir.path()), cc),
                       doctest::Contains("declares 10 students but 0 reside"),
                       DataError);
}

TEST_CASE("load_instance rejects negative distances with file and field context") {
  TempDir dir;
  write_tiny1_csvs(dir);
  std::string d = tiny1_distances();
  d += "40,1,-1\n";
  // duplicate row overrides are fine; negative is not
  testutil::write_text(dir.file("distances.csv"), d);
  ConstraintConfig cc;
  CHECK_THROWS_WITH_AS(load_instance(InstancePaths::in_dir(dir.path()), cc),
                       doctest::Contains("nonnegative"), DataError);
}

TEST_CASE("load_instance reports missing files") {
  TempDir dir;
  write_tiny1_csvs(dir);
  std::filesystem::remove(dir.file("adjacency.csv"));
  ConstraintConfig cc;
  CHECK_THROWS_WITH_AS(load_instance(InstancePaths::in_dir(dir.path()), cc),
                       doctest::Contains("adjacency.csv"), DataError);
}

TEST_CASE("load_instance rejects a student without a residence unit at own level") {
  TempDir dir;
  write_tiny1_csvs(dir);
  std::string s = tiny1_students();
  s += "41,1,2,0,,,\n";  // blank unit_l1
  testutil::write_text(dir.file("students.csv"), s);
  ConstraintConfig cc;
  CHECK_THROWS_WITH_AS(load_instance(InstancePaths::in_dir(dir.path()), cc),
                       doctest::Contains("no residence unit"), DataError);
}

TEST_CASE("save_instance round-trips TINY-1 byte-identically") {
  Instance inst = make_tiny1();
  TempDir d1, d2;
  save_instance(inst, d1.path());
  ConstraintConfig cc;
  Instance again = load_instance(InstancePaths::in_dir(d1.path()), cc);
  save_instance(again, d2.path());
  for (const char* f :
       {"schools.csv", "units.csv", "students.csv", "distances.csv", "adjacency.csv"})
    CHECK(testutil::read_bytes(d1.file(f)) == testutil::read_bytes(d2.file(f)));
}

TEST_CASE("load_instance can derive capacity bounds from serviceable capacity") {
  TempDir dir;
  write_tiny1_csvs(dir);
  // cap_max column now carries the raw serviceable capacity.
  testutil::write_text(dir.file("schools.csv"),
                       "school_id,level,cap_min,cap_max,cap_desired,site_unit\n"
                       "1,1,0,16,16,1\n"   // serviceable 16 < enrolled 20
                       "2,1,0,30,25,4\n");  // serviceable 30 > enrolled 20
  ConstraintConfig cc;
  LoadOptions opts;
  opts.derive_capacity_bounds = true;
  Instance inst = load_instance(InstancePaths::in_dir(dir.path()), cc, opts);
  const School& a = inst.schools[inst.school_index(1)];
  const School& b = inst.schools[inst.school_index(2)];
  CHECK(a.cap_max == 20);  // max(20, 16)
  CHECK(a.cap_min == 13);  // floor(0.85 * min(20, 16)) = floor(13.6)
  CHECK(b.cap_max == 30);  // max(20, 30)
  CHECK(b.cap_min == 17);  // floor(0.85 * 20)
  // The status quo stays feasible by construction.
  CHECK(rezone::constraints::check_capacity(inst.sq_zoning, inst).empty());
}

TEST_CASE("eliminate_candidates: mu = 0 forces the status quo") {
  Instance inst = make_tiny1();
  ConstraintConfig cc;
  cc.mu_ratio = 0.0;
  CandidateSets cs = eliminate_candidates(inst, cc);
  for (int u = 0; u < inst.n_units(); ++u) {
    REQUIRE(cs.by_unit[u].size() == 1);
    CHECK(cs.by_unit[u][0] == inst.sq_zoning.school_by_unit[u]);
  }
}

TEST_CASE("eliminate_candidates honors the absolute bound") {
  Instance inst = make_tiny1();
  ConstraintConfig cc;
  cc.mu_ratio = 1.0;
  cc.mu_abs = 0.5;  // p2: B costs 2 vs sq 1; 2 > 1 + 0.5, so B drops out
  CandidateSets cs = eliminate_candidates(inst, cc);
  inst.set_candidates(cs);
  CHECK(candidate_ids(inst, 2) == std::set<SchoolId>{1});
  CHECK(candidate_ids(inst, 3) == std::set<SchoolId>{2});
}

TEST_CASE("eliminate_candidates is monotone in mu") {
  Instance inst = make_tiny1();
  double mus[] = {0.0, 0.3, 0.5, 0.8, 1.0, 1.5, 2.5};
  CandidateSets prev;
  bool first = true;
  for (double mu : mus) {
    ConstraintConfig cc;
    cc.mu_ratio = mu;
    CandidateSets cs = eliminate_candidates(inst, cc);
    if (!first) {
      for (int u = 0; u < inst.n_units(); ++u) {
        for (int sc : prev.by_unit[u]) {
          CHECK(std::find(cs.by_unit[u].begin(), cs.by_unit[u].end(), sc) !=
                cs.by_unit[u].end());
        }
      }
    }
    prev = cs;
    first = false;
  }
}

TEST_CASE("prune_weak_edges drops the min-length edge at degree >= 3") {
  // Star center 1 over 2,3,4 plus ring edges so no endpoint has degree 1.
  AdjacencyGraph g;
  g.edges = {{1, 2, 5.0}, {1, 3, 1.0}, {1, 4, 7.0}, {2, 3, 10.0}, {3, 4, 10.0}};
  AdjacencyGraph pruned = prune_weak_edges(g);
  REQUIRE(pruned.edges.size() == 4);
  for (const auto& e : pruned.edges) CHECK_FALSE((e.a == 1 && e.b == 3));
}

TEST_CASE("prune_weak_edges keeps paths unchanged (all degrees <= 2)") {
  AdjacencyGraph g;
  g.edges = {{1, 2, 1.0}, {2, 3, 0.1}, {3, 4, 5.0}};
  AdjacencyGraph pruned = prune_weak_edges(g);
  CHECK(pruned.edges.size() == 3);
}

TEST_CASE("prune_weak_edges never isolates a degree-1 neighbor") {
  // Pure star: every leaf would be isolated, so nothing is removed.
  AdjacencyGraph g;
  g.edges = {{1, 2, 5.0}, {1, 3, 1.0}, {1, 4, 7.0}};
  AdjacencyGraph pruned = prune_weak_edges(g);
  CHECK(pruned.edges.size() == 3);
}

TEST_CASE("prune_weak_edges requires boundary lengths") {
  AdjacencyGraph g;
  g.edges = {{1, 2, 1.0}, {2, 3, std::nullopt}};
  CHECK_THROWS_AS(prune_weak_edges(g), DataError);
}

TEST_CASE("prune_weak_edges property: degrees never increase, no isolation") {
  // Deterministic pseudo-random graphs.
  std::uint64_t state = 12345;
  auto next = [&] {
    state = state * 6364136223846793005ull + 1442695040888963407ull;
    return state >> 33;
  };
  for (int trial = 0; trial < 20; ++trial) {
    int n = 5 + static_cast<int>(next() % 10);
    AdjacencyGraph g;
    std::set<std::pair<UnitId, UnitId>> seen;
    for (int e = 0; e < 2 * n; ++e) {
      UnitId a = 1 + static_cast<UnitId>(next() % n);
      UnitId b = 1 + static_cast<UnitId>(next() % n);
      if (a == b) continue;
      if (a > b) std::swap(a, b);
      if (!seen.insert({a, b}).second) continue;
      g.edges.push_back({a, b, static_cast<double>(next() % 100) / 10.0});
    }
    std::map<UnitId, int> deg_before, deg_after;
    for (const auto& e : g.edges) {
      deg_before[e.a]++;
      deg_before[e.b]++;
    }
    AdjacencyGraph pruned = prune_weak_edges(g);
    for (const auto& e : pruned.edges) {
      deg_after[e.a]++;
      deg_after[e.b]++;
    }
    for (const auto& [id, d] : deg_before) {
      CHECK(deg_after[id] <= d);
      CHECK(deg_after[id] >= 1);  // no isolated vertex
    }
  }
}

namespace {

PlanningUnit rect_unit(UnitId id, SchoolId sq, double x0, double x1, double y0,
                       double y1, long long n = 10, long long g = 2) {
  PlanningUnit u;
  u.id = id;
  u.level = 1;
  u.n_students = n;
  u.n_group = g;
  u.sq_school = sq;
  Polygon poly;
  poly.rings.push_back({{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}});
  UnitGeometry geom;
  geom.polygons.push_back(poly);
  geom.recompute_measures();
  u.geometry = geom;
  return u;
}

}  // namespace

TEST_CASE("merge_units_greedy merges two squares into a 2x1 rectangle") {
  std::vector<PlanningUnit> units = {rect_unit(1, 7, 0, 1, 0, 1, 10, 3),
                                     rect_unit(2, 7, 1, 2, 0, 1, 5, 1)};
  AdjacencyGraph g;
  g.edges = {{1, 2, 1.0}};
  MergeResult r = merge_units_greedy(units, g, 1);
  REQUIRE(r.units.size() == 1);
  CHECK(r.reached_target);
  CHECK(r.units[0].n_students == 15);
  CHECK(r.units[0].n_group == 4);
  CHECK(r.units[0].geometry->area == doctest::Approx(2.0));
  CHECK(r.units[0].geometry->perimeter == doctest::Approx(6.0));
  CHECK(r.graph.edges.empty());
}

TEST_CASE("merge_units_greedy leaves an at-target input unchanged") {
  // TINY-1 units carry no geometry; the short-circuit must not demand it.
  Instance inst = make_tiny1();
  MergeResult r = merge_units_greedy(inst.units, inst.adjacency[0], 4);
  CHECK(r.units.size() == 4);
  CHECK(r.reached_target);
  CHECK(r.merged_into.empty());
}

TEST_CASE("merge_units_greedy absorbs a sliver into the higher-scoring side") {
  // square(1) | sliver(2) | wide rect(3); merged scores 0.7789 vs 0.6749,
  // so the sliver joins the square.
  std::vector<PlanningUnit> units = {rect_unit(1, 7, 0, 1, 0, 1, 10, 0),
                                     rect_unit(2, 7, 1, 1.2, 0, 1, 3, 1),
                                     rect_unit(3, 7, 1.2, 3.2, 0, 1, 20, 5)};
  AdjacencyGraph g;
  g.edges = {{1, 2, 1.0}, {2, 3, 1.0}};
  MergeResult r = merge_units_greedy(units, g, 2);
  REQUIRE(r.units.size() == 2);
  CHECK(r.reached_target);
  REQUIRE(r.merged_into.count(2));
  CHECK(r.merged_into.at(2) == 1);
  const PlanningUnit* merged = nullptr;
  for (const auto& u : r.units)
    if (u.id == 1) merged = &u;
  REQUIRE(merged);
  CHECK(merged->n_students == 13);
  CHECK(merged->n_group == 1);
  CHECK(merged->geometry->area == doctest::Approx(1.2));
  CHECK(merged->geometry->perimeter == doctest::Approx(4.4));
  REQUIRE(r.graph.edges.size() == 1);
  CHECK(r.graph.edges[0].a == 1);
  CHECK(r.graph.edges[0].b == 3);
}

TEST_CASE("merge_units_greedy respects sq_school and flags unreachable targets") {
  std::vector<PlanningUnit> units = {rect_unit(1, 7, 0, 1, 0, 1),
                                     rect_unit(2, 8, 1, 2, 0, 1)};
  AdjacencyGraph g;
  g.edges = {{1, 2, 1.0}};
  MergeResult r = merge_units_greedy(units, g, 1);
  CHECK(r.units.size() == 2);
  CHECK_FALSE(r.reached_target);
}

TEST_CASE("merge_units_greedy conserves student and group totals") {
  std::uint64_t state = 99;
  auto next = [&] {
    state = state * 6364136223846793005ull + 1442695040888963407ull;
    return state >> 33;
  };
  for (int trial = 0; trial < 5; ++trial) {
    // Random 3x3 grid of unit squares, two schools in vertical halves.
    std::vector<PlanningUnit> units;
    AdjacencyGraph g;
    long long total_n = 0, total_g = 0;
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) {
        long long n = 1 + static_cast<long long>(next() % 20);
        long long gg = static_cast<long long>(next() % (n + 1));
        units.push_back(rect_unit(r * 3 + c + 1, c < 2 ? 1 : 2, c, c + 1, r, r + 1, n, gg));
        total_n += n;
        total_g += gg;
      }
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) {
        int id = r * 3 + c + 1;
        if (c + 1 < 3) g.edges.push_back({id, id + 1, 1.0});
        if (r + 1 < 3) g.edges.push_back({id, id + 3, 1.0});
      }
    std::size_t target = 3 + next() % 4;
    MergeResult res = merge_units_greedy(units, g, target);
    long long sum_n = 0, sum_g = 0;
    for (const auto& u : res.units) {
      sum_n += u.n_students;
      sum_g += u.n_group;
    }
    CHECK(sum_n == total_n);
    CHECK(sum_g == total_g);
  }
}

TEST_CASE("classify_ses: three identical rows tie-break by id") {
  std::vector<ses::BlockGroup> rows = {{5, 1, 1, 1, 1, 1},
                                       {7, 1, 1, 1, 1, 1},
                                       {9, 1, 1, 1, 1, 1}};
  auto cls = ses::classify(rows);
  REQUIRE(cls.rows.size() == 3);
  CHECK(cls.rows[0].id == 5);
  CHECK(cls.rows[0].tercile == ses::Tercile::lower);
  CHECK(cls.rows[0].lower_ses);
  CHECK(cls.rows[1].tercile == ses::Tercile::medium);
  CHECK_FALSE(cls.rows[1].lower_ses);
  CHECK(cls.rows[2].tercile == ses::Tercile::higher);
  CHECK_FALSE(cls.rows[2].lower_ses);
}

TEST_CASE("classify_ses: lowest income row is lower-SES via the income index") {
  // Row 1 has the lowest income but four very high variables: composite
  // label "higher", flagged lower-SES through the income-only index.
  std::vector<ses::BlockGroup> rows = {
      {1, 10, 100, 100, 100, 100}, {2, 20, 10, 10, 10, 10}, {3, 30, 20, 20, 20, 20},
      {4, 40, 30, 30, 30, 30},     {5, 50, 40, 40, 40, 40}, {6, 60, 50, 50, 50, 50}};
  auto cls = ses::classify(rows);
  REQUIRE(cls.rows.size() == 6);
  CHECK(cls.rows[0].tercile == ses::Tercile::higher);
  CHECK(cls.rows[0].lower_ses);
  CHECK(cls.rows[1].tercile == ses::Tercile::lower);
  CHECK(cls.rows[1].lower_ses);
  CHECK(cls.rows[2].tercile == ses::Tercile::lower);
  CHECK(cls.rows[2].lower_ses);
  CHECK_FALSE(cls.rows[3].lower_ses);
  CHECK_FALSE(cls.rows[4].lower_ses);
  CHECK_FALSE(cls.rows[5].lower_ses);
}

TEST_CASE("classify_ses: monotone 9-row table puts ids 1-3 in every bottom third") {
  std::vector<ses::BlockGroup> rows;
  for (int i = 1; i <= 9; ++i)
    rows.push_back({i, 10.0 * i, 5.0 * i, 7.0 * i, 3.0 * i, 2.0 * i});
  auto cls = ses::classify(rows);
  for (int i = 0; i < 9; ++i) {
    CHECK(cls.rows[i].lower_ses == (i < 3));
    ses::Tercile expect = i < 3 ? ses::Tercile::lower
                                : (i < 6 ? ses::Tercile::medium : ses::Tercile::higher);
    CHECK(cls.rows[i].tercile == expect);
  }
}

TEST_CASE("classify_ses rejects tables with fewer than 3 rows") {
  std::vector<ses::BlockGroup> rows = {{1, 1, 1, 1, 1, 1}, {2, 2, 2, 2, 2, 2}};
  CHECK_THROWS_AS(ses::classify(rows), DataError);
}

TEST_CASE("classify_ses rejects rows with missing values at read time") {
  TempDir dir;
  testutil::write_text(
      dir.file("bg.csv"),
      "bg_id,median_income,home_ownership,educ_attainment,english_prof,dual_parent\n"
      "1,10,0.5,0.3,0.9,0.6\n"
      "2,,0.5,0.3,0.9,0.6\n"
      "3,30,0.5,0.3,0.9,0.6\n");
  CHECK_THROWS_WITH_AS(ses::read_csv(dir.file("bg.csv")),
                       doctest::Contains("missing value"), DataError);
}

TEST_CASE("classify_ses property: union set contains the composite bottom third") {
  std::uint64_t state = 4242;
  auto next = [&] {
    state = state * 6364136223846793005ull + 1442695040888963407ull;
    return state >> 33;
  };
  for (int trial = 0; trial < 20; ++trial) {
    int n = 3 + static_cast<int>(next() % 15);
    std::vector<ses::BlockGroup> rows;
    for (int i = 0; i < n; ++i)
      rows.push_back({i + 1, static_cast<double>(next() % 1000),
                      static_cast<double>(next() % 100) / 100.0,
                      static_cast<double>(next() % 100) / 100.0,
                      static_cast<double>(next() % 100) / 100.0,
                      static_cast<double>(next() % 100) / 100.0});
    auto cls = ses::classify(rows);
    for (const auto& r : cls.rows)
      if (r.tercile == ses::Tercile::lower) CHECK(r.lower_ses);
  }
}
