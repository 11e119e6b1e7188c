#include "rezone/instance.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <set>

#include <nlohmann/json.hpp>

#include "rezone/csv.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace rezone {

InstancePaths InstancePaths::in_dir(const std::string& dir) {
  InstancePaths p;
  p.schools = (fs::path(dir) / "schools.csv").string();
  p.units = (fs::path(dir) / "units.csv").string();
  p.students = (fs::path(dir) / "students.csv").string();
  p.distances = (fs::path(dir) / "distances.csv").string();
  p.adjacency = (fs::path(dir) / "adjacency.csv").string();
  auto gj = fs::path(dir) / "units.geojson";
  if (fs::exists(gj)) p.geojson = gj.string();
  return p;
}

namespace {

Ring parse_ring(const json& coords) {
  Ring r;
  for (const auto& pt : coords) r.push_back({pt.at(0).get<double>(), pt.at(1).get<double>()});
  // GeoJSON rings repeat the first point at the end; we keep rings open.
  if (r.size() >= 2 && r.front() == r.back()) r.pop_back();
  return r;
}

void load_geojson(const std::string& path, std::vector<PlanningUnit>& units) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open file: " + path);
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw DataError(path + ": invalid GeoJSON: " + e.what());
  }
  std::map<UnitId, PlanningUnit*> by_id;
  for (auto& u : units) by_id[u.id] = &u;
  if (!doc.contains("features")) throw DataError(path + ": not a FeatureCollection");
  for (const auto& feat : doc["features"]) {
    if (!feat.contains("properties") || !feat["properties"].contains("unit_id"))
      throw DataError(path + ": feature missing properties.unit_id");
    UnitId uid = feat["properties"]["unit_id"].get<UnitId>();
    auto it = by_id.find(uid);
    if (it == by_id.end())
      throw DataError(path + ": geometry for unknown unit id " + std::to_string(uid));
    const auto& geom = feat.at("geometry");
    std::string type = geom.at("type").get<std::string>();
    UnitGeometry g;
    if (type == "Polygon") {
      Polygon poly;
      for (const auto& ring : geom.at("coordinates")) poly.rings.push_back(parse_ring(ring));
      g.polygons.push_back(std::move(poly));
    } else if (type == "MultiPolygon") {
      for (const auto& pj : geom.at("coordinates")) {
        Polygon poly;
        for (const auto& ring : pj) poly.rings.push_back(parse_ring(ring));
        g.polygons.push_back(std::move(poly));
      }
    } else {
      throw DataError(path + ": unsupported geometry type '" + type + "' for unit " +
                      std::to_string(uid));
    }
    g.recompute_measures();
    // Area-weighted centroid over outer rings.
    double cx = 0, cy = 0, atot = 0;
    for (const auto& poly : g.polygons) {
      const Ring& outer = poly.rings.at(0);
      double a = ring_area(outer);
      double px = 0, py = 0;
      std::size_t n = outer.size();
      for (std::size_t i = 0; i < n; ++i) {
        const Point& p = outer[i];
        const Point& q = outer[(i + 1) % n];
        double cross = p[0] * q[1] - q[0] * p[1];
        px += (p[0] + q[0]) * cross;
        py += (p[1] + q[1]) * cross;
      }
      if (a != 0) {
        cx += px / 6.0;
        cy += py / 6.0;
        atot += a;
      }
    }
    if (atot != 0) it->second->centroid = Point{cx / atot, cy / atot};
    it->second->geometry = std::move(g);
  }
}

}  // namespace

Instance load_instance(const InstancePaths& paths, const ConstraintConfig& config,
                       const LoadOptions& options) {
  config.validate();
  Instance inst;

  // schools.csv
  {
    csv::Table t = csv::read_file(paths.schools);
    int c_id = t.require_col("school_id");
    int c_level = t.require_col("level");
    int c_min = t.require_col("cap_min");
    int c_max = t.require_col("cap_max");
    int c_des = t.require_col("cap_desired");
    int c_site = t.require_col("site_unit");
    std::set<LevelId> levels;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
      School s;
      s.id = static_cast<SchoolId>(t.get_int(r, c_id, "school_id"));
      s.level = static_cast<LevelId>(t.get_int(r, c_level, "level"));
      s.cap_min = t.get_int(r, c_min, "cap_min");
      s.cap_max = t.get_int(r, c_max, "cap_max");
      s.cap_desired = t.get_int(r, c_des, "cap_desired");
      if (!t.empty_field(r, c_site))
        s.site_unit = static_cast<UnitId>(t.get_int(r, c_site, "site_unit"));
      if (s.cap_min < 0 || s.cap_min > s.cap_desired || s.cap_desired > s.cap_max)
        throw DataError(t.path, t.file_line(r), "cap_min",
                        "capacities must satisfy 0 <= min <= desired <= max");
      levels.insert(s.level);
      inst.schools.push_back(s);
    }
    if (inst.schools.empty()) throw DataError(t.path + ": no schools");
    inst.level_set = LevelSet::of({levels.begin(), levels.end()});
  }

  // units.csv
  {
    csv::Table t = csv::read_file(paths.units);
    int c_id = t.require_col("unit_id");
    int c_level = t.require_col("level");
    int c_sq = t.require_col("sq_school");
    int c_n = t.require_col("n_students");
    int c_g = t.require_col("n_group");
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
      PlanningUnit u;
      u.id = static_cast<UnitId>(t.get_int(r, c_id, "unit_id"));
      u.level = static_cast<LevelId>(t.get_int(r, c_level, "level"));
      u.sq_school = static_cast<SchoolId>(t.get_int(r, c_sq, "sq_school"));
      u.n_students = t.get_int(r, c_n, "n_students");
      u.n_group = t.get_int(r, c_g, "n_group");
      if (u.n_students < 0 || u.n_group < 0)
        throw DataError(t.path, t.file_line(r), "n_students", "counts must be nonnegative");
      bool known = false;
      for (const auto& s : inst.schools) known = known || s.id == u.sq_school;
      if (!known)
        throw DataError(t.path, t.file_line(r), "sq_school",
                        "unknown school id " + std::to_string(u.sq_school));
      inst.units.push_back(u);
    }
  }

  // students.csv
  {
    csv::Table t = csv::read_file(paths.students);
    int c_id = t.require_col("student_id");
    int c_level = t.require_col("level");
    int c_sq = t.require_col("sq_school");
    int c_g = t.require_col("in_group");
    int c_u[3] = {t.require_col("unit_l1"), t.require_col("unit_l2"),
                  t.require_col("unit_l3")};
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
      Student s;
      s.id = t.get_int(r, c_id, "student_id");
      s.level = static_cast<LevelId>(t.get_int(r, c_level, "level"));
      s.sq_school = static_cast<SchoolId>(t.get_int(r, c_sq, "sq_school"));
      s.in_group = t.get_bool(r, c_g, "in_group");
      for (LevelId l = 1; l <= 3; ++l) {
        if (inst.level_set.index_of(l) < 0 || l < s.level) {
          // Inapplicable level: must be blank.
          if (!t.empty_field(r, c_u[l - 1]))
            throw DataError(t.path, t.file_line(r), "unit_l" + std::to_string(l),
                            "must be blank for a level-" + std::to_string(s.level) +
                                " student");
          continue;
        }
        if (t.empty_field(r, c_u[l - 1]))
          throw DataError(t.path, t.file_line(r), "unit_l" + std::to_string(l),
                          "student has no residence unit at level " + std::to_string(l));
        s.residence_units[l] = static_cast<UnitId>(
            t.get_int(r, c_u[l - 1], "unit_l" + std::to_string(l)));
      }
      if (!s.residence_units.count(s.level))
        throw DataError(t.path, t.file_line(r), "unit_l" + std::to_string(s.level),
                        "student has no residence unit at own level");
      inst.students.push_back(std::move(s));
    }
  }

  // distances.csv
  {
    csv::Table t = csv::read_file(paths.distances);
    int c_n = t.require_col("student_id");
    int c_s = t.require_col("school_id");
    int c_m = t.require_col("miles");
    std::map<StudentId, Student*> by_id;
    for (auto& s : inst.students) by_id[s.id] = &s;
    std::set<SchoolId> school_ids;
    for (const auto& s : inst.schools) school_ids.insert(s.id);
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
      StudentId n = t.get_int(r, c_n, "student_id");
      SchoolId sc = static_cast<SchoolId>(t.get_int(r, c_s, "school_id"));
      double miles = t.get_double(r, c_m, "miles");
      auto it = by_id.find(n);
      if (it == by_id.end())
        throw DataError(t.path, t.file_line(r), "student_id",
                        "unknown student id " + std::to_string(n));
      if (!school_ids.count(sc))
        throw DataError(t.path, t.file_line(r), "school_id",
                        "unknown school id " + std::to_string(sc));
      if (miles < 0)
        throw DataError(t.path, t.file_line(r), "miles", "distance must be nonnegative");
      it->second->distances[sc] = miles;
    }
  }

  // adjacency.csv
  {
    csv::Table t = csv::read_file(paths.adjacency);
    int c_l = t.require_col("level");
    int c_a = t.require_col("unit_a");
    int c_b = t.require_col("unit_b");
    int c_len = t.require_col("shared_boundary_len");
    inst.adjacency.assign(inst.level_set.count(), {});
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
      LevelId l = static_cast<LevelId>(t.get_int(r, c_l, "level"));
      int li = inst.level_set.index_of(l);
      if (li < 0)
        throw DataError(t.path, t.file_line(r), "level",
                        "unknown level " + std::to_string(l));
      AdjacencyGraph::Edge e;
      e.a = static_cast<UnitId>(t.get_int(r, c_a, "unit_a"));
      e.b = static_cast<UnitId>(t.get_int(r, c_b, "unit_b"));
      if (e.a > e.b) std::swap(e.a, e.b);
      if (!t.empty_field(r, c_len)) {
        double len = t.get_double(r, c_len, "shared_boundary_len");
        if (len < 0)
          throw DataError(t.path, t.file_line(r), "shared_boundary_len",
                          "length must be nonnegative");
        e.boundary_len = len;
      }
      inst.adjacency[li].edges.push_back(e);
    }
    for (auto& g : inst.adjacency)
      std::sort(g.edges.begin(), g.edges.end(), [](const auto& x, const auto& y) {
        return std::pair(x.a, x.b) < std::pair(y.a, y.b);
      });
  }

  if (paths.geojson) load_geojson(*paths.geojson, inst.units);

  if (options.derive_capacity_bounds) {
    // cap_max column carried the raw serviceable capacity; derive the bounds
    // from it and the status-quo enrollment.
    std::map<SchoolId, long long> sq;
    for (const auto& u : inst.units) sq[u.sq_school] += u.n_students;
    for (auto& s : inst.schools) {
      long long serviceable = s.cap_max;
      long long enrolled = sq.count(s.id) ? sq[s.id] : 0;
      s.cap_max = std::max(enrolled, serviceable);
      s.cap_min = static_cast<long long>(std::floor(0.85 * static_cast<double>(
                                                        std::min(enrolled, serviceable))));
      s.cap_desired = std::clamp(s.cap_desired, s.cap_min, s.cap_max);
    }
  }

  inst.finalize();
  inst.set_candidates(eliminate_candidates(inst, config));
  return inst;
}

CandidateSets eliminate_candidates(const Instance& inst, const ConstraintConfig& config) {
  config.validate();
  CandidateSets cs;
  cs.by_unit.assign(inst.units.size(), {});
  for (int u = 0; u < inst.n_units(); ++u) {
    int li = inst.unit_level[u];
    int sq = inst.sq_zoning.school_by_unit[u];
    for (int sc : inst.schools_at_level[li]) {
      if (sc == sq) {
        cs.by_unit[u].push_back(sc);  // always admissible
        continue;
      }
      SchoolId sid = inst.schools[sc].id;
      bool ok = true;
      for (int si : inst.unit_students[u]) {
        const Student& st = inst.students[si];
        double base = st.distance_to(st.sq_school);
        double d = st.distance_to(sid);
        if (d > (1.0 + config.mu_ratio) * base ||
            (config.mu_abs && d > base + *config.mu_abs)) {
          ok = false;
          break;
        }
      }
      if (ok) cs.by_unit[u].push_back(sc);
    }
    std::sort(cs.by_unit[u].begin(), cs.by_unit[u].end());
  }
  return cs;
}

AdjacencyGraph prune_weak_edges(const AdjacencyGraph& graph) {
  for (const auto& e : graph.edges)
    if (!e.boundary_len)
      throw DataError("prune_weak_edges requires shared_boundary_len on every edge (missing on " +
                      std::to_string(e.a) + "-" + std::to_string(e.b) + ")");

  // id -> list of (neighbor id, edge index); removal tracked by flags.
  std::map<UnitId, std::vector<std::pair<UnitId, std::size_t>>> inc;
  for (std::size_t i = 0; i < graph.edges.size(); ++i) {
    inc[graph.edges[i].a].emplace_back(graph.edges[i].b, i);
    inc[graph.edges[i].b].emplace_back(graph.edges[i].a, i);
  }
  std::vector<char> removed(graph.edges.size(), 0);
  std::map<UnitId, int> degree;
  for (const auto& [id, nbrs] : inc) degree[id] = static_cast<int>(nbrs.size());

  for (const auto& [id, nbrs] : inc) {  // ascending unit id
    if (degree[id] < 3) continue;
    std::size_t best = std::numeric_limits<std::size_t>::max();
    UnitId best_nbr = 0;
    double best_len = 0;
    for (const auto& [nbr, ei] : nbrs) {
      if (removed[ei]) continue;
      double len = *graph.edges[ei].boundary_len;
      if (best == std::numeric_limits<std::size_t>::max() || len < best_len ||
          (len == best_len && nbr < best_nbr)) {
        best = ei;
        best_nbr = nbr;
        best_len = len;
      }
    }
    if (best == std::numeric_limits<std::size_t>::max()) continue;
    if (degree[best_nbr] <= 1) continue;  // would isolate the neighbor
    removed[best] = 1;
    --degree[id];
    --degree[best_nbr];
  }

  AdjacencyGraph out;
  for (std::size_t i = 0; i < graph.edges.size(); ++i)
    if (!removed[i]) out.edges.push_back(graph.edges[i]);
  return out;
}

namespace {

struct MergeNode {
  PlanningUnit unit;
  bool alive = true;
  // neighbor unit id -> shared boundary length
  std::map<UnitId, double> nbrs;
  double score() const {
    return compactness_score(unit.geometry->area, unit.geometry->perimeter);
  }
};

}  // namespace

MergeResult merge_units_greedy(std::vector<PlanningUnit> units, AdjacencyGraph graph,
                               std::size_t target_count) {
  if (units.size() <= target_count) {
    // Already at (or below) target; geometry is never consulted.
    MergeResult result;
    result.units = std::move(units);
    result.graph = std::move(graph);
    return result;
  }
  for (const auto& u : units)
    if (!u.geometry)
      throw DataError("merge_units_greedy requires geometry on every unit (missing on " +
                      std::to_string(u.id) + ")");
  for (const auto& e : graph.edges)
    if (!e.boundary_len)
      throw DataError("merge_units_greedy requires shared_boundary_len on every edge (missing on " +
                      std::to_string(e.a) + "-" + std::to_string(e.b) + ")");

  std::map<UnitId, MergeNode> nodes;
  for (auto& u : units) {
    MergeNode n;
    n.unit = std::move(u);
    nodes.emplace(n.unit.id, std::move(n));
  }
  for (const auto& e : graph.edges) {
    if (!nodes.count(e.a) || !nodes.count(e.b))
      throw DataError("adjacency references unknown unit id");
    nodes[e.a].nbrs[e.b] = *e.boundary_len;
    nodes[e.b].nbrs[e.a] = *e.boundary_len;
  }

  MergeResult result;
  std::size_t alive = nodes.size();

  auto merged_area = [&](const MergeNode& a, const MergeNode& b) {
    return a.unit.geometry->area + b.unit.geometry->area;
  };
  auto merged_perimeter = [&](const MergeNode& a, const MergeNode& b, double shared) {
    return a.unit.geometry->perimeter + b.unit.geometry->perimeter - 2.0 * shared;
  };

  while (alive > target_count) {
    // Candidates in ascending (score, id) order; first with a legal partner wins.
    std::vector<std::pair<double, UnitId>> order;
    for (const auto& [id, n] : nodes)
      if (n.alive) order.emplace_back(n.score(), id);
    std::sort(order.begin(), order.end());

    UnitId victim = 0, partner = 0;
    bool found = false;
    for (const auto& [score, id] : order) {
      const MergeNode& v = nodes[id];
      double best_score = -1;
      UnitId best_partner = 0;
      for (const auto& [nbr, shared] : v.nbrs) {
        const MergeNode& w = nodes[nbr];
        if (!w.alive || w.unit.sq_school != v.unit.sq_school) continue;
        double s = compactness_score(merged_area(v, w), merged_perimeter(v, w, shared));
        if (s > best_score || (s == best_score && nbr < best_partner)) {
          best_score = s;
          best_partner = nbr;
        }
      }
      if (best_score >= 0) {
        victim = id;
        partner = best_partner;
        found = true;
        break;
      }
    }
    if (!found) {
      result.reached_target = false;
      break;
    }

    MergeNode& v = nodes[victim];
    MergeNode& w = nodes[partner];
    double shared = v.nbrs.at(partner);
    double area = merged_area(v, w);
    double perim = merged_perimeter(v, w, shared);
    for (auto& poly : v.unit.geometry->polygons)
      w.unit.geometry->polygons.push_back(std::move(poly));
    w.unit.geometry->area = area;
    w.unit.geometry->perimeter = perim;
    w.unit.n_students += v.unit.n_students;
    w.unit.n_group += v.unit.n_group;
    w.unit.centroid.reset();  // stale; downstream recomputes from geometry if needed

    // Rewire victim's edges onto the partner, summing parallel boundary lengths.
    for (const auto& [nbr, len] : v.nbrs) {
      if (nbr == partner) continue;
      MergeNode& x = nodes[nbr];
      x.nbrs.erase(victim);
      w.nbrs[nbr] += len;  // inserts 0 then adds when previously non-adjacent
      x.nbrs[partner] = w.nbrs[nbr];
    }
    w.nbrs.erase(victim);
    v.alive = false;
    v.nbrs.clear();
    --alive;
    result.merged_into[victim] = partner;
  }

  // Collapse absorption chains (a -> b -> c becomes a -> c).
  for (auto& [from, to] : result.merged_into) {
    UnitId t = to;
    while (result.merged_into.count(t)) t = result.merged_into[t];
    to = t;
  }

  for (auto& [id, n] : nodes) {
    if (!n.alive) continue;
    result.units.push_back(std::move(n.unit));
    for (const auto& [nbr, len] : n.nbrs) {
      if (id < nbr)
        result.graph.edges.push_back({id, nbr, len});
    }
  }
  std::sort(result.graph.edges.begin(), result.graph.edges.end(),
            [](const auto& x, const auto& y) {
              return std::pair(x.a, x.b) < std::pair(y.a, y.b);
            });
  return result;
}

namespace {

json geometry_to_json(const UnitGeometry& g) {
  auto ring_json = [](const Ring& r) {
    json arr = json::array();
    for (const Point& p : r) arr.push_back({p[0], p[1]});
    if (!r.empty()) arr.push_back({r.front()[0], r.front()[1]});  // close the ring
    return arr;
  };
  if (g.polygons.size() == 1) {
    json coords = json::array();
    for (const Ring& r : g.polygons[0].rings) coords.push_back(ring_json(r));
    return json{{"type", "Polygon"}, {"coordinates", coords}};
  }
  json coords = json::array();
  for (const Polygon& poly : g.polygons) {
    json pj = json::array();
    for (const Ring& r : poly.rings) pj.push_back(ring_json(r));
    coords.push_back(pj);
  }
  return json{{"type", "MultiPolygon"}, {"coordinates", coords}};
}

}  // namespace

void save_instance(const Instance& inst, const std::string& dir) {
  fs::create_directories(dir);
  {
    std::vector<std::vector<std::string>> rows;
    for (const auto& s : inst.schools)
      rows.push_back({std::to_string(s.id), std::to_string(s.level),
                      std::to_string(s.cap_min), std::to_string(s.cap_max),
                      std::to_string(s.cap_desired),
                      s.site_unit ? std::to_string(*s.site_unit) : ""});
    csv::write_file((fs::path(dir) / "schools.csv").string(),
                    {"school_id", "level", "cap_min", "cap_max", "cap_desired", "site_unit"},
                    rows);
  }
  {
    std::vector<std::vector<std::string>> rows;
    for (const auto& u : inst.units)
      rows.push_back({std::to_string(u.id), std::to_string(u.level),
                      std::to_string(u.sq_school), std::to_string(u.n_students),
                      std::to_string(u.n_group)});
    csv::write_file((fs::path(dir) / "units.csv").string(),
                    {"unit_id", "level", "sq_school", "n_students", "n_group"}, rows);
  }
  {
    std::vector<std::vector<std::string>> rows;
    for (const auto& st : inst.students) {
      std::array<std::string, 3> u;
      for (LevelId l = 1; l <= 3; ++l) {
        auto it = st.residence_units.find(l);
        u[l - 1] = it == st.residence_units.end() ? "" : std::to_string(it->second);
      }
      rows.push_back({std::to_string(st.id), std::to_string(st.level),
                      std::to_string(st.sq_school), st.in_group ? "1" : "0", u[0], u[1],
                      u[2]});
    }
    csv::write_file((fs::path(dir) / "students.csv").string(),
                    {"student_id", "level", "sq_school", "in_group", "unit_l1", "unit_l2",
                     "unit_l3"},
                    rows);
  }
  {
    std::vector<std::vector<std::string>> rows;
    for (const auto& st : inst.students) {
      std::vector<std::pair<SchoolId, double>> ds(st.distances.begin(), st.distances.end());
      std::sort(ds.begin(), ds.end());
      for (const auto& [sc, miles] : ds)
        rows.push_back({std::to_string(st.id), std::to_string(sc),
                        csv::format_double(miles)});
    }
    csv::write_file((fs::path(dir) / "distances.csv").string(),
                    {"student_id", "school_id", "miles"}, rows);
  }
  {
    std::vector<std::vector<std::string>> rows;
    for (int li = 0; li < inst.level_set.count(); ++li)
      for (const auto& e : inst.adjacency[li].edges)
        rows.push_back({std::to_string(inst.level_set.levels[li]), std::to_string(e.a),
                        std::to_string(e.b),
                        e.boundary_len ? csv::format_double(*e.boundary_len) : ""});
    csv::write_file((fs::path(dir) / "adjacency.csv").string(),
                    {"level", "unit_a", "unit_b", "shared_boundary_len"}, rows);
  }
  bool any_geometry = false;
  for (const auto& u : inst.units) any_geometry = any_geometry || u.geometry.has_value();
  if (any_geometry) {
    json features = json::array();
    for (const auto& u : inst.units) {
      if (!u.geometry) continue;
      features.push_back({{"type", "Feature"},
                          {"properties", {{"unit_id", u.id}, {"level", u.level}}},
                          {"geometry", geometry_to_json(*u.geometry)}});
    }
    json doc = {{"type", "FeatureCollection"}, {"features", features}};
    std::ofstream out(fs::path(dir) / "units.geojson", std::ios::binary);
    out << doc.dump() << '\n';
    if (!out) throw DataError("write failed: units.geojson");
  }
}

}  // namespace rezone
