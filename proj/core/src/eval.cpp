#include "rezone/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <nlohmann/json.hpp>

#include "rezone/csv.hpp"

using nlohmann::json;

namespace rezone::eval {

namespace {

double pct2(long long part, long long total) {
  if (total == 0) return 0.0;
  double pct = 100.0 * static_cast<double>(part) / static_cast<double>(total);
  return std::round(pct * 100.0) / 100.0;  // Table-style 2 decimals
}

}  // namespace

const LevelMetrics& MetricsReport::at(LevelId level) const {
  for (const auto& m : levels)
    if (m.level == level) return m;
  throw ModelError("no metrics for level " + std::to_string(level));
}

double district_dissimilarity(const Zoning& z, const Instance& inst, LevelId level,
                              bool& defined) {
  int li = inst.level_index(level);
  long long G = inst.level_group[li];
  long long N = inst.level_students[li];
  if (G == 0 || G == N) {
    defined = false;
    return std::numeric_limits<double>::quiet_NaN();
  }
  defined = true;
  auto counts = objectives::school_counts(z, inst);
  double sum = 0;
  for (int sc : inst.schools_at_level[li]) {
    double g = static_cast<double>(counts.group[sc]);
    double o = static_cast<double>(counts.enrolled[sc]);
    sum += std::abs(g / static_cast<double>(G) -
                    (o - g) / static_cast<double>(N - G));
  }
  return sum / 2.0;
}

MetricsReport evaluate(const Zoning& z, const Instance& inst,
                       const ObjectiveConfig& config) {
  if (z.school_by_unit.size() != inst.units.size())
    throw ModelError("zoning does not assign every unit");
  MetricsReport report;
  for (int li = 0; li < inst.level_set.count(); ++li) {
    LevelId level = inst.level_set.levels[li];
    LevelMetrics m;
    m.level = level;
    m.total_students = inst.level_students[li];
    m.total_group_students = inst.level_group[li];
    m.total_units = static_cast<long long>(inst.units_at_level[li].size());

    double miles = 0;
    long long n_students = 0;
    for (int u : inst.units_at_level[li]) {
      SchoolId assigned = inst.schools[z.school_by_unit[u]].id;
      bool changed = z.school_by_unit[u] != inst.sq_zoning.school_by_unit[u];
      if (changed) ++m.rezoned_units;
      for (int si : inst.unit_students[u]) {
        const Student& st = inst.students[si];
        miles += st.distance_to(assigned);
        ++n_students;
        if (assigned != st.sq_school) {
          ++m.rezoned_students;
          if (st.in_group) ++m.rezoned_group_students;
        }
      }
    }
    m.avg_driving_miles = n_students > 0 ? miles / static_cast<double>(n_students) : 0.0;
    m.district_dissimilarity =
        district_dissimilarity(z, inst, level, m.dissimilarity_defined);
    if (li + 1 < inst.level_set.count())
      m.feeder_count = objectives::feeder_patterns(z, inst, level,
                                                   config.constraints.epsilon,
                                                   config.weights)
                           .count;
    m.pct_students = pct2(m.rezoned_students, m.total_students);
    m.pct_group_students = pct2(m.rezoned_group_students, m.total_group_students);
    m.pct_units = pct2(m.rezoned_units, m.total_units);
    report.levels.push_back(m);
  }
  return report;
}

void export_zoning_csv(const Zoning& z, const Instance& inst, const std::string& path) {
  std::vector<std::vector<std::string>> rows;
  for (int u = 0; u < inst.n_units(); ++u) {
    SchoolId assigned = inst.schools[z.school_by_unit[u]].id;
    SchoolId sq = inst.schools[inst.sq_zoning.school_by_unit[u]].id;
    rows.push_back({std::to_string(inst.units[u].id), std::to_string(inst.units[u].level),
                    std::to_string(assigned), std::to_string(sq),
                    assigned != sq ? "true" : "false"});
  }
  csv::write_file(path, {"unit_id", "level", "school_id", "sq_school_id", "changed"},
                  rows);
}

void export_geojson(const Zoning& z, const Instance& inst, const std::string& path) {
  json features = json::array();
  for (int u = 0; u < inst.n_units(); ++u) {
    const PlanningUnit& pu = inst.units[u];
    if (!pu.geometry)
      throw ModelError("unit " + std::to_string(pu.id) +
                       " has no geometry; cannot export GeoJSON");
    SchoolId assigned = inst.schools[z.school_by_unit[u]].id;
    SchoolId sq = inst.schools[inst.sq_zoning.school_by_unit[u]].id;

    auto ring_json = [](const Ring& r) {
      json arr = json::array();
      for (const Point& p : r) arr.push_back({p[0], p[1]});
      if (!r.empty()) arr.push_back({r.front()[0], r.front()[1]});
      return arr;
    };
    json geom;
    if (pu.geometry->polygons.size() == 1) {
      json coords = json::array();
      for (const Ring& r : pu.geometry->polygons[0].rings) coords.push_back(ring_json(r));
      geom = {{"type", "Polygon"}, {"coordinates", coords}};
    } else {
      json coords = json::array();
      for (const Polygon& poly : pu.geometry->polygons) {
        json pj = json::array();
        for (const Ring& r : poly.rings) pj.push_back(ring_json(r));
        coords.push_back(pj);
      }
      geom = {{"type", "MultiPolygon"}, {"coordinates", coords}};
    }
    features.push_back({{"type", "Feature"},
                        {"properties",
                         {{"unit_id", pu.id},
                          {"level", pu.level},
                          {"school", assigned},
                          {"sq_school", sq},
                          {"changed", assigned != sq}}},
                        {"geometry", geom}});
  }
  json doc = {{"type", "FeatureCollection"}, {"features", features}};
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write file: " + path);
  out << doc.dump() << '\n';
  if (!out) throw DataError("write failed: " + path);
}

std::string metrics_json(const MetricsReport& report) {
  json levels = json::object();
  for (const auto& m : report.levels) {
    json j;
    j["avg_driving_miles"] = m.avg_driving_miles;
    if (m.dissimilarity_defined)
      j["district_dissimilarity"] = m.district_dissimilarity;
    else
      j["district_dissimilarity"] = nullptr;
    j["dissimilarity_defined"] = m.dissimilarity_defined;
    if (m.feeder_count)
      j["feeder_count"] = *m.feeder_count;
    else
      j["feeder_count"] = nullptr;
    j["rezoned_students"] = m.rezoned_students;
    j["rezoned_students_pct"] = m.pct_students;
    j["rezoned_group_students"] = m.rezoned_group_students;
    j["rezoned_group_students_pct"] = m.pct_group_students;
    j["rezoned_units"] = m.rezoned_units;
    j["rezoned_units_pct"] = m.pct_units;
    j["total_students"] = m.total_students;
    j["total_group_students"] = m.total_group_students;
    j["total_units"] = m.total_units;
    levels[std::to_string(m.level)] = j;
  }
  return json{{"levels", levels}}.dump(2) + "\n";
}

void write_metrics_json(const MetricsReport& report, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write file: " + path);
  out << metrics_json(report);
  if (!out) throw DataError("write failed: " + path);
}

namespace {

struct MetricAccessor {
  const char* name;
  bool (*defined)(const LevelMetrics&);
  double (*get)(const LevelMetrics&);
};

const MetricAccessor kMetricAccessors[] = {
    {"avg_driving_miles", [](const LevelMetrics&) { return true; },
     [](const LevelMetrics& m) { return m.avg_driving_miles; }},
    {"district_dissimilarity",
     [](const LevelMetrics& m) { return m.dissimilarity_defined; },
     [](const LevelMetrics& m) { return m.district_dissimilarity; }},
    {"feeder_count", [](const LevelMetrics& m) { return m.feeder_count.has_value(); },
     [](const LevelMetrics& m) { return static_cast<double>(*m.feeder_count); }},
    {"rezoned_students", [](const LevelMetrics&) { return true; },
     [](const LevelMetrics& m) { return static_cast<double>(m.rezoned_students); }},
    {"rezoned_group_students", [](const LevelMetrics&) { return true; },
     [](const LevelMetrics& m) { return static_cast<double>(m.rezoned_group_students); }},
    {"rezoned_units", [](const LevelMetrics&) { return true; },
     [](const LevelMetrics& m) { return static_cast<double>(m.rezoned_units); }},
    {"objective", nullptr, nullptr},  // handled separately
};

}  // namespace

const ComparisonTable::Row* ComparisonTable::find(LevelId level,
                                                  const std::string& metric) const {
  for (const auto& r : rows)
    if (r.level == level && r.metric == metric) return &r;
  return nullptr;
}

ComparisonTable compare_runs(const std::vector<RunForComparison>& runs,
                             const Instance& inst, const ObjectiveConfig& config) {
  ComparisonTable table;
  if (runs.empty()) return table;

  // An optimal run stands for the experiment (Table-2 convention).
  std::vector<const RunForComparison*> used;
  for (const auto& r : runs)
    if (r.proven_optimal) {
      used.push_back(&r);
      break;
    }
  bool from_optimal = !used.empty();
  if (!from_optimal)
    for (const auto& r : runs) used.push_back(&r);
  table.single_sample = used.size() == 1 && !from_optimal;

  std::vector<MetricsReport> reports;
  reports.reserve(used.size());
  for (const auto* r : used) reports.push_back(evaluate(*r->zoning, inst, config));

  auto mean_se = [&](const std::vector<double>& xs, double& mean, double& se) {
    double n = static_cast<double>(xs.size());
    mean = 0;
    for (double x : xs) mean += x;
    mean /= n;
    se = 0;
    if (xs.size() > 1) {
      double var = 0;
      for (double x : xs) var += (x - mean) * (x - mean);
      var /= (n - 1);
      se = std::sqrt(var / n);
    }
  };

  for (LevelId level : inst.level_set.levels) {
    for (const auto& acc : kMetricAccessors) {
      std::vector<double> xs;
      if (std::string(acc.name) == "objective") {
        for (const auto* r : used) xs.push_back(r->objective);
      } else {
        bool any_undefined = false;
        for (const auto& rep : reports) {
          const LevelMetrics& m = rep.at(level);
          if (!acc.defined(m)) {
            any_undefined = true;
            break;
          }
          xs.push_back(acc.get(m));
        }
        if (any_undefined) continue;
      }
      ComparisonTable::Row row;
      row.level = level;
      row.metric = acc.name;
      row.n = static_cast<int>(xs.size());
      row.from_optimal = from_optimal;
      mean_se(xs, row.mean, row.se);
      table.rows.push_back(row);
    }
  }
  return table;
}

void write_comparison_csv(const ComparisonTable& table, const std::string& path) {
  std::vector<std::vector<std::string>> rows;
  for (const auto& r : table.rows)
    rows.push_back({std::to_string(r.level), r.metric, csv::format_double(r.mean),
                    csv::format_double(r.se), std::to_string(r.n),
                    r.from_optimal ? "1" : "0"});
  csv::write_file(path, {"level", "metric", "mean", "se", "n_runs", "optimal"}, rows);
}

std::string comparison_text(const ComparisonTable& table) {
  std::ostringstream os;
  LevelId current = -1;
  for (const auto& r : table.rows) {
    if (r.level != current) {
      current = r.level;
      os << "level " << current << "\n";
    }
    os << "  " << std::left << std::setw(26) << r.metric << std::right << std::fixed
       << std::setprecision(4) << std::setw(12) << r.mean;
    if (r.from_optimal)
      os << "   (optimal)";
    else
      os << "   (" << std::setprecision(4) << r.se << ")";
    os << "\n";
    os.unsetf(std::ios::fixed);
  }
  return os.str();
}

}  // namespace rezone::eval
