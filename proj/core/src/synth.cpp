#include "rezone/synth.hpp"

#include <algorithm>
#include <cmath>
#include <queue>

#include "rezone/instance.hpp"

namespace rezone::synth {

void SynthParams::validate() const {
  if (rows < 2 || cols < 2) throw DataError("grid must be at least 2x2");
  if (levels.empty() || schools_per_level.size() != levels.size())
    throw DataError("schools_per_level must match levels");
  LevelSet::of(levels);
  for (LevelId l : levels)
    if (l < 1 || l > 3) throw DataError("synthetic levels must lie in {1,2,3}");
  long long cells = static_cast<long long>(rows) * cols;
  for (int k : schools_per_level) {
    if (k < 1) throw DataError("each level needs at least one school");
    if (k > cells) throw DataError("more schools than units at a level");
  }
  if (students_min < 1 || students_max < students_min)
    throw DataError("invalid students-per-unit range");
  if (group_fraction < 0 || group_fraction > 1)
    throw DataError("group_fraction must be in [0,1]");
  if (clustering < 0 || clustering > 1) throw DataError("clustering must be in [0,1]");
  if (sq_distortion < 0) throw DataError("sq_distortion must be nonnegative");
  if (cap_slack_low <= 0 || cap_slack_high < 1)
    throw DataError("capacity slack band must satisfy 0 < low, 1 <= high");
}

namespace {

// splitmix64; same generator the solver uses, seeded independently.
struct Rng {
  std::uint64_t state;
  explicit Rng(std::uint64_t seed) : state(seed ? seed : 0x9e3779b97f4a7c15ull) {}
  std::uint64_t next() {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }
  double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  long long range(long long lo, long long hi) {  // inclusive
    return lo + static_cast<long long>(next() % static_cast<std::uint64_t>(hi - lo + 1));
  }
};

// Spread k sites over the grid: a near-square block layout, one site per
// block center. Deterministic and seed-independent, so two-school layouts
// split the grid along the vertical midline.
std::vector<std::pair<int, int>> school_sites(int rows, int cols, int k) {
  int bc = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(k))));
  int br = (k + bc - 1) / bc;
  std::vector<std::pair<int, int>> sites;
  int placed = 0;
  for (int i = 0; i < br && placed < k; ++i) {
    for (int j = 0; j < bc && placed < k; ++j) {
      int r = static_cast<int>((i + 0.5) * rows / br);
      int c = static_cast<int>((j + 0.5) * cols / bc);
      sites.emplace_back(std::min(r, rows - 1), std::min(c, cols - 1));
      ++placed;
    }
  }
  // Collapse accidental duplicates on tiny grids.
  std::sort(sites.begin(), sites.end());
  sites.erase(std::unique(sites.begin(), sites.end()), sites.end());
  int cell = 0;
  while (static_cast<int>(sites.size()) < k) {
    int r = cell / cols, c = cell % cols;
    if (std::find(sites.begin(), sites.end(), std::pair(r, c)) == sites.end())
      sites.emplace_back(r, c);
    ++cell;
  }
  return sites;
}

}  // namespace

Instance generate(const SynthParams& params) {
  params.validate();
  Rng rng(params.seed);
  int rows = params.rows, cols = params.cols;
  long long cells = static_cast<long long>(rows) * cols;
  int n_levels = static_cast<int>(params.levels.size());

  auto unit_id = [&](int li, int cell) {
    return static_cast<UnitId>((li + 1) * 100000 + cell + 1);
  };
  auto school_id = [&](int li, int k) {
    return static_cast<SchoolId>((li + 1) * 1000 + k + 1);
  };

  // Students per cell and group membership are drawn once and shared across
  // levels (the same geography at every level).
  std::vector<long long> cell_students(cells);
  for (long long c = 0; c < cells; ++c)
    cell_students[c] = rng.range(params.students_min, params.students_max);

  // Group probability per cell: (1 - chi) * q + chi * (left half concentrated).
  std::vector<double> group_p(cells);
  double q = params.group_fraction;
  double left_fraction = static_cast<double>(cols / 2) / static_cast<double>(cols);
  for (long long c = 0; c < cells; ++c) {
    int col = static_cast<int>(c % cols);
    double concentrated =
        (col < cols / 2 && left_fraction > 0) ? std::min(1.0, q / left_fraction) : 0.0;
    group_p[c] = (1.0 - params.clustering) * q + params.clustering * concentrated;
  }
  std::vector<std::vector<bool>> cell_group(cells);
  for (long long c = 0; c < cells; ++c) {
    cell_group[c].resize(cell_students[c]);
    for (long long i = 0; i < cell_students[c]; ++i)
      cell_group[c][i] = rng.uniform01() < group_p[c];
  }

  Instance inst;
  inst.level_set = LevelSet::of(params.levels);
  inst.adjacency.assign(n_levels, {});

  std::vector<std::vector<int>> sq_school_of_cell(n_levels);  // local school idx

  for (int li = 0; li < n_levels; ++li) {
    int k = params.schools_per_level[li];
    auto sites = school_sites(rows, cols, k);

    // Contiguous region growth balanced by enrollment: the lightest school
    // claims its nearest unclaimed frontier cell.
    std::vector<int> owner(cells, -1);
    std::vector<long long> load(k, 0);
    using Frontier = std::pair<double, int>;  // (distance to site, cell)
    std::vector<std::priority_queue<Frontier, std::vector<Frontier>, std::greater<>>>
        frontier(k);
    // Stale-boundary model: the status quo was drawn for a district that no
    // longer exists. Region growth aims at displaced sites with a little
    // boundary jitter, while the true travel distances below use the real
    // sites.
    auto hash01 = [&](std::uint64_t a, std::uint64_t b) {
      std::uint64_t h = params.seed ^ (0x9e3779b97f4a7c15ull * (a + 1)) ^
                        (0xbf58476d1ce4e5b9ull * (b + 1)) ^
                        (0x94d049bb133111ebull * (li + 1));
      h ^= h >> 30;
      h *= 0xbf58476d1ce4e5b9ull;
      h ^= h >> 27;
      return static_cast<double>(h >> 11) * 0x1.0p-53;
    };
    std::vector<std::pair<double, double>> grown_sites;
    for (int s = 0; s < k; ++s) {
      double mag = params.sq_distortion * 0.25 * (rows + cols) / 2.0;
      double angle = hash01(9000 + s, 17) * 6.283185307179586;
      double gr = std::clamp(sites[s].first + mag * std::sin(angle), 0.0,
                             static_cast<double>(rows - 1));
      double gc = std::clamp(sites[s].second + mag * std::cos(angle), 0.0,
                             static_cast<double>(cols - 1));
      grown_sites.emplace_back(gr, gc);
    }
    auto grown_priority = [&](int s, int cell) {
      double dr = (cell / cols - grown_sites[s].first);
      double dc = (cell % cols - grown_sites[s].second);
      double jitter = 1.0 + 0.5 * params.sq_distortion * hash01(cell, 31 + s);
      return std::sqrt(dr * dr + dc * dc) * jitter;
    };
    for (int s = 0; s < k; ++s) {
      int cell = sites[s].first * cols + sites[s].second;
      frontier[s].push({grown_priority(s, cell), cell});
    }
    long long claimed = 0;
    while (claimed < cells) {
      int s = -1;
      for (int t = 0; t < k; ++t) {
        if (frontier[t].empty()) continue;
        if (s < 0 || load[t] < load[s]) s = t;
      }
      if (s < 0) break;  // all frontiers empty (unreachable with a connected grid)
      int cell = -1;
      while (!frontier[s].empty()) {
        auto [d, c] = frontier[s].top();
        frontier[s].pop();
        if (owner[c] < 0) {
          cell = c;
          break;
        }
      }
      if (cell < 0) continue;
      owner[cell] = s;
      load[s] += cell_students[cell];
      ++claimed;
      int r = cell / cols, c = cell % cols;
      const int dr[4] = {-1, 1, 0, 0}, dc[4] = {0, 0, -1, 1};
      for (int d = 0; d < 4; ++d) {
        int nr = r + dr[d], nc = c + dc[d];
        if (nr < 0 || nr >= rows || nc < 0 || nc >= cols) continue;
        int ncell = nr * cols + nc;
        if (owner[ncell] < 0) frontier[s].push({grown_priority(s, ncell), ncell});
      }
    }
    sq_school_of_cell[li] = owner;

    // Schools with capacity bands around status-quo enrollment.
    long long level_total = 0;
    for (long long c = 0; c < cells; ++c) level_total += cell_students[c];
    long long desired_avg = level_total / k;
    for (int s = 0; s < k; ++s) {
      School sch;
      sch.id = school_id(li, s);
      sch.level = params.levels[li];
      long long site_cell = sites[s].first * cols + sites[s].second;
      sch.site_unit = unit_id(li, static_cast<int>(site_cell));
      sch.cap_min = std::max<long long>(
          1, static_cast<long long>(std::floor(params.cap_slack_low *
                                               static_cast<double>(load[s]))));
      sch.cap_max = static_cast<long long>(
          std::ceil(params.cap_slack_high * static_cast<double>(load[s])));
      sch.cap_desired = std::clamp(desired_avg, sch.cap_min, sch.cap_max);
      inst.schools.push_back(sch);
    }

    // Units, geometry (unit squares), adjacency with unit boundary lengths.
    for (long long c = 0; c < cells; ++c) {
      PlanningUnit u;
      u.id = unit_id(li, static_cast<int>(c));
      u.level = params.levels[li];
      u.sq_school = school_id(li, owner[c]);
      long long g = 0;
      for (bool b : cell_group[c])
        if (b) ++g;
      u.n_students = cell_students[c];
      u.n_group = g;
      double x = static_cast<double>(c % cols), y = static_cast<double>(c / cols);
      Polygon poly;
      poly.rings.push_back({{x, y}, {x + 1, y}, {x + 1, y + 1}, {x, y + 1}});
      UnitGeometry geom;
      geom.polygons.push_back(poly);
      geom.recompute_measures();
      u.geometry = geom;
      u.centroid = Point{x + 0.5, y + 0.5};
      inst.units.push_back(u);
    }
    for (int r = 0; r < rows; ++r) {
      for (int c = 0; c < cols; ++c) {
        int cell = r * cols + c;
        if (c + 1 < cols)
          inst.adjacency[li].edges.push_back(
              {unit_id(li, cell), unit_id(li, cell + 1), 1.0});
        if (r + 1 < rows)
          inst.adjacency[li].edges.push_back(
              {unit_id(li, cell), unit_id(li, cell + cols), 1.0});
      }
    }
  }

  // Students at the lowest level of each cell... every level hosts its own
  // cohort; residence is the same cell id at every level >= the student's.
  const double kRoadFactor = 1.3;
  long long next_student = 1;
  for (int li = 0; li < n_levels; ++li) {
    int k = params.schools_per_level[li];
    auto sites = school_sites(rows, cols, k);
    for (long long c = 0; c < cells; ++c) {
      double x = static_cast<double>(c % cols) + 0.5;
      double y = static_cast<double>(c / cols) + 0.5;
      // Unit-centroid distances, shared by every resident of the cell.
      // Floored at half a cell so a school's own site cell never yields a
      // zero status-quo distance (the travel ratio needs positive sums).
      std::unordered_map<SchoolId, double> cell_dist;
      for (int s = 0; s < k; ++s) {
        double sx = sites[s].second + 0.5, sy = sites[s].first + 0.5;
        cell_dist[school_id(li, s)] =
            kRoadFactor * std::max(0.5, std::hypot(x - sx, y - sy));
      }
      for (long long i = 0; i < cell_students[c]; ++i) {
        Student st;
        st.id = next_student++;
        st.level = params.levels[li];
        st.in_group = cell_group[c][i];
        for (int lj = li; lj < n_levels; ++lj)
          st.residence_units[params.levels[lj]] = unit_id(lj, static_cast<int>(c));
        st.sq_school = school_id(li, sq_school_of_cell[li][c]);
        st.distances = cell_dist;
        inst.students.push_back(std::move(st));
      }
    }
  }

  inst.finalize();
  inst.set_candidates(eliminate_candidates(inst, ConstraintConfig{}));
  return inst;
}

}  // namespace rezone::synth
