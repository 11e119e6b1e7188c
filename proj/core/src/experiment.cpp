#include "rezone/experiment.hpp"

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "rezone/calibration.hpp"
#include "rezone/constraints.hpp"
#include "rezone/csv.hpp"
#include "rezone/eval.hpp"
#include "rezone/instance.hpp"

namespace fs = std::filesystem;

namespace rezone::experiment {

const char* preset_name(Preset p) {
  switch (p) {
    case Preset::none: return "none";
    case Preset::SQ: return "SQ";
    case Preset::S_TR: return "S-TR";
    case Preset::S_DB: return "S-DB";
    case Preset::S_C: return "S-C";
    case Preset::S_FP: return "S-FP";
    case Preset::M_NW: return "M-NW";
    case Preset::M_SW: return "M-SW";
  }
  return "?";
}

Preset parse_preset(const std::string& name) {
  for (Preset p : {Preset::none, Preset::SQ, Preset::S_TR, Preset::S_DB, Preset::S_C,
                   Preset::S_FP, Preset::M_NW, Preset::M_SW})
    if (name == preset_name(p)) return p;
  throw DataError("unknown preset '" + name + "'");
}

ExperimentConfig preset_config(Preset p) {
  ExperimentConfig c;
  c.preset = p;
  c.name = preset_name(p);
  switch (p) {
    case Preset::none:
    case Preset::SQ:
      break;
    case Preset::S_TR:
      c.objectives = {Objective::distance};
      break;
    case Preset::S_DB:
      c.objectives = {Objective::balance};
      c.constraints.enforce_dissimilarity_bound = true;
      break;
    case Preset::S_C:
      c.objectives = {Objective::compact};
      break;
    case Preset::S_FP:
      c.objectives = {Objective::feeder};
      break;
    case Preset::M_NW:
    case Preset::M_SW:
      c.objectives = {Objective::distance, Objective::balance, Objective::compact,
                      Objective::feeder};
      c.constraints.enforce_dissimilarity_bound = true;
      c.calibration_mode = CalibrationMode::compute;
      if (p == Preset::M_SW) c.weight_mode = WeightMode::survey_file;
      break;
  }
  return c;
}

void ExperimentConfig::validate() const {
  constraints.validate();
  solver.validate();
  if (weight_mode == WeightMode::survey_file && weights_file.empty())
    throw DataError("weights mode 'survey-file' requires a weights file");
  if (calibration_mode == CalibrationMode::from_file && calibration_file.empty())
    throw DataError("calibration mode 'from-file' requires a calibration file");
  if (seeds.empty()) throw DataError("at least one seed is required");
}

namespace {

struct ConfigLine {
  std::string section, key, value;
  int line = 0;
};

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::istringstream is(v);
  std::string tok;
  while (std::getline(is, tok, ',')) {
    tok = trim(tok);
    if (!tok.empty()) out.push_back(tok);
  }
  return out;
}

bool parse_bool(const std::string& v, const std::string& file, int line,
                const std::string& key) {
  if (v == "true" || v == "1" || v == "on") return true;
  if (v == "false" || v == "0" || v == "off") return false;
  throw DataError(file, line, key, "expected a boolean, got '" + v + "'");
}

double parse_num(const std::string& v, const std::string& file, int line,
                 const std::string& key) {
  try {
    std::size_t pos = 0;
    double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw DataError(file, line, key, "expected a number, got '" + v + "'");
  }
}

long long parse_ll(const std::string& v, const std::string& file, int line,
                   const std::string& key) {
  try {
    std::size_t pos = 0;
    long long d = std::stoll(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw DataError(file, line, key, "expected an integer, got '" + v + "'");
  }
}

}  // namespace

ExperimentConfig parse_config_text(const std::string& text, const std::string& name) {
  std::vector<ConfigLine> lines;
  {
    std::istringstream is(text);
    std::string raw;
    std::string section;
    int line_no = 0;
    while (std::getline(is, raw)) {
      ++line_no;
      std::string line = raw;
      std::size_t hash = line.find('#');
      if (hash != std::string::npos) line = line.substr(0, hash);
      line = trim(line);
      if (line.empty()) continue;
      if (line.front() == '[') {
        if (line.back() != ']')
          throw DataError(name, line_no, "", "malformed section header '" + raw + "'");
        section = trim(line.substr(1, line.size() - 2));
        continue;
      }
      std::size_t eq = line.find('=');
      if (eq == std::string::npos)
        throw DataError(name, line_no, "", "expected key = value, got '" + raw + "'");
      ConfigLine cl;
      cl.section = section;
      cl.key = trim(line.substr(0, eq));
      cl.value = trim(line.substr(eq + 1));
      cl.line = line_no;
      if (cl.key.empty()) throw DataError(name, line_no, "", "empty key");
      lines.push_back(std::move(cl));
    }
  }

  // The preset, when present, supplies the baseline; later keys override.
  ExperimentConfig cfg;
  bool preset_seen = false;
  for (const auto& cl : lines) {
    if (cl.section.empty() && cl.key == "preset") {
      if (preset_seen) throw DataError(name, cl.line, "preset", "given twice");
      Preset p;
      try {
        p = parse_preset(cl.value);
      } catch (const DataError& e) {
        throw DataError(name, cl.line, "preset", e.what());
      }
      cfg = preset_config(p);
      preset_seen = true;
    }
  }

  for (const auto& cl : lines) {
    const std::string& s = cl.section;
    const std::string& k = cl.key;
    const std::string& v = cl.value;
    int ln = cl.line;
    if (s.empty()) {
      if (k == "preset") continue;  // handled above
      if (k == "name") {
        cfg.name = v;
        continue;
      }
      throw DataError(name, ln, k, "unknown top-level key");
    }
    if (s == "objectives") {
      if (k == "selected") {
        cfg.objectives.clear();
        for (const auto& tok : split_list(v)) {
          try {
            cfg.objectives.insert(parse_objective(tok));
          } catch (const DataError& e) {
            throw DataError(name, ln, k, e.what());
          }
        }
        continue;
      }
      throw DataError(name, ln, k, "unknown key in [objectives]");
    }
    if (s == "constraints") {
      if (k == "mu_ratio") cfg.constraints.mu_ratio = parse_num(v, name, ln, k);
      else if (k == "mu_abs") {
        if (v.empty()) cfg.constraints.mu_abs.reset();
        else cfg.constraints.mu_abs = parse_num(v, name, ln, k);
      } else if (k == "lambda") cfg.constraints.lambda = parse_num(v, name, ln, k);
      else if (k == "epsilon") cfg.constraints.epsilon = parse_ll(v, name, ln, k);
      else if (k == "travel") cfg.constraints.enforce_travel = parse_bool(v, name, ln, k);
      else if (k == "capacity")
        cfg.constraints.enforce_capacity = parse_bool(v, name, ln, k);
      else if (k == "contiguity")
        cfg.constraints.enforce_contiguity = parse_bool(v, name, ln, k);
      else if (k == "dissimilarity_bound")
        cfg.constraints.enforce_dissimilarity_bound = parse_bool(v, name, ln, k);
      else if (k == "feeder_no_increase")
        cfg.constraints.enforce_feeder_no_increase = parse_bool(v, name, ln, k);
      else if (k == "derive_capacity_bounds")
        cfg.derive_capacity_bounds = parse_bool(v, name, ln, k);
      else throw DataError(name, ln, k, "unknown key in [constraints]");
      continue;
    }
    if (s == "weights") {
      if (k == "mode") {
        if (v == "uniform") cfg.weight_mode = WeightMode::uniform;
        else if (v == "survey-file") cfg.weight_mode = WeightMode::survey_file;
        else throw DataError(name, ln, k, "expected uniform|survey-file, got '" + v + "'");
      } else if (k == "file") cfg.weights_file = v;
      else throw DataError(name, ln, k, "unknown key in [weights]");
      continue;
    }
    if (s == "calibration") {
      if (k == "mode") {
        if (v == "unit") cfg.calibration_mode = CalibrationMode::unit;
        else if (v == "compute") cfg.calibration_mode = CalibrationMode::compute;
        else if (v == "from-file") cfg.calibration_mode = CalibrationMode::from_file;
        else
          throw DataError(name, ln, k, "expected unit|compute|from-file, got '" + v + "'");
      } else if (k == "file") cfg.calibration_file = v;
      else throw DataError(name, ln, k, "unknown key in [calibration]");
      continue;
    }
    if (s == "solver") {
      if (k == "seeds") {
        cfg.seeds.clear();
        for (const auto& tok : split_list(v))
          cfg.seeds.push_back(static_cast<std::uint64_t>(parse_ll(tok, name, ln, k)));
      } else if (k == "seed_count") {
        long long n = parse_ll(v, name, ln, k);
        if (n < 1) throw DataError(name, ln, k, "must be positive");
        cfg.seeds.clear();
        for (long long i = 1; i <= n; ++i)
          cfg.seeds.push_back(static_cast<std::uint64_t>(i));
      } else if (k == "time_limit") cfg.solver.time_limit = parse_num(v, name, ln, k);
      else if (k == "max_iterations")
        cfg.solver.max_iterations = parse_ll(v, name, ln, k);
      else if (k == "cooling_rate") cfg.solver.cooling_rate = parse_num(v, name, ln, k);
      else if (k == "initial_temperature") {
        if (v.empty()) cfg.solver.initial_temperature.reset();
        else cfg.solver.initial_temperature = parse_num(v, name, ln, k);
      } else if (k == "move_reassign") {
        double p = parse_num(v, name, ln, k);
        cfg.solver.move_mix.reassign = p;
        cfg.solver.move_mix.swap = 1.0 - p;
      } else throw DataError(name, ln, k, "unknown key in [solver]");
      continue;
    }
    if (s == "output") {
      if (k == "geojson") cfg.write_geojson = parse_bool(v, name, ln, k);
      else if (k == "trace") cfg.write_trace = parse_bool(v, name, ln, k);
      else throw DataError(name, ln, k, "unknown key in [output]");
      continue;
    }
    throw DataError(name, ln, k, "unknown section [" + s + "]");
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config file: " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return parse_config_text(os.str(), path);
}

std::uint64_t fnv1a64_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open file for hashing: " + path);
  std::uint64_t h = 0xcbf29ce484222325ull;
  char buf[4096];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ull;
    }
    if (!in) break;
  }
  return h;
}

namespace {

std::string resolve_path(const std::string& file, const std::string& data_dir) {
  fs::path p(file);
  if (p.is_absolute()) return file;
  return (fs::path(data_dir) / p).string();
}

void write_manifest(const std::string& out_dir, std::vector<std::string> rel_paths) {
  std::sort(rel_paths.begin(), rel_paths.end());
  std::ofstream out(fs::path(out_dir) / "manifest.txt", std::ios::binary);
  if (!out) throw DataError("cannot write manifest");
  char hex[17];
  for (const auto& rel : rel_paths) {
    std::uint64_t h = fnv1a64_file((fs::path(out_dir) / rel).string());
    std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(h));
    out << "fnv1a64:" << hex << "  " << rel << "\n";
  }
}

}  // namespace

RunOutcome run(const ExperimentConfig& config, const std::string& data_dir,
               const std::string& out_dir, bool quiet) {
  config.validate();
  fs::create_directories(out_dir);
  std::vector<std::string> artifacts;

  LoadOptions opts;
  opts.derive_capacity_bounds = config.derive_capacity_bounds;
  Instance inst = load_instance(InstancePaths::in_dir(data_dir), config.constraints, opts);

  ObjectiveConfig ocfg;
  ocfg.selected = config.objectives;
  ocfg.constraints = config.constraints;
  if (config.weight_mode == WeightMode::survey_file) {
    ocfg.weights = SchoolWeights::load_csv(resolve_path(config.weights_file, data_dir));
    ocfg.weights.validate(inst);
  } else {
    ocfg.weights = SchoolWeights::uniform();
  }

  switch (config.calibration_mode) {
    case CalibrationMode::unit:
      ocfg.calibrations = Calibrations::unit(inst.level_set, ocfg.selected);
      break;
    case CalibrationMode::from_file:
      ocfg.calibrations =
          calibration::load_table_csv(resolve_path(config.calibration_file, data_dir));
      break;
    case CalibrationMode::compute: {
      SolverParams cal_params = config.solver;
      cal_params.seed = config.seeds.front();
      auto cal = calibration::calibrate(inst, ocfg.selected, cal_params);
      ocfg.calibrations = cal.to_calibrations();
      calibration::write_table_csv(cal, (fs::path(out_dir) / "calibration.csv").string());
      artifacts.push_back("calibration.csv");
      if (!quiet) std::cout << calibration::table_text(cal);
      break;
    }
  }

  bool evaluation_only = config.preset == Preset::SQ || config.objectives.empty();
  if (evaluation_only) {
    auto metrics = eval::evaluate(inst.sq_zoning, inst, ocfg);
    eval::write_metrics_json(metrics, (fs::path(out_dir) / "metrics.json").string());
    artifacts.push_back("metrics.json");
    write_manifest(out_dir, artifacts);
    if (!quiet) std::cout << "evaluated status quo; metrics.json written\n";
    return {0, "ok"};
  }

  auto batch = solver::batch_solve(inst, ocfg, config.seeds, config.solver);

  int failures = 0;
  for (const auto& run : batch.runs) {
    if (!run.result) {
      ++failures;
      if (!quiet)
        std::cerr << "seed " << run.seed << " failed: " << run.error << "\n";
      continue;
    }
    // Safety net: never emit an infeasible zoning.
    auto report = constraints::check_feasible(run.result->best_zoning, inst, ocfg);
    if (!report.ok)
      return {3, "internal error: seed " + std::to_string(run.seed) +
                     " produced an infeasible zoning:\n" + report.to_text()};

    std::string seed_dir = "seed_" + std::to_string(run.seed);
    fs::create_directories(fs::path(out_dir) / seed_dir);
    std::string zoning_rel = seed_dir + "/zoning.csv";
    eval::export_zoning_csv(run.result->best_zoning, inst,
                            (fs::path(out_dir) / zoning_rel).string());
    artifacts.push_back(zoning_rel);
    auto metrics = eval::evaluate(run.result->best_zoning, inst, ocfg);
    std::string metrics_rel = seed_dir + "/metrics.json";
    eval::write_metrics_json(metrics, (fs::path(out_dir) / metrics_rel).string());
    artifacts.push_back(metrics_rel);
    if (config.write_geojson) {
      std::string gj_rel = seed_dir + "/zoning.geojson";
      eval::export_geojson(run.result->best_zoning, inst,
                           (fs::path(out_dir) / gj_rel).string());
      artifacts.push_back(gj_rel);
    }
    if (config.write_trace) {
      std::string tr_rel = seed_dir + "/trace.log";
      solver::write_trace_log(*run.result, (fs::path(out_dir) / tr_rel).string());
      artifacts.push_back(tr_rel);
    }
  }

  if (failures == static_cast<int>(batch.runs.size()))
    return {3, "all runs failed; first error: " + batch.runs.front().error};

  eval::write_comparison_csv(batch.metrics, (fs::path(out_dir) / "comparison.csv").string());
  artifacts.push_back("comparison.csv");
  {
    std::ofstream out(fs::path(out_dir) / "comparison.txt", std::ios::binary);
    out << eval::comparison_text(batch.metrics);
    artifacts.push_back("comparison.txt");
  }
  write_manifest(out_dir, artifacts);

  if (!quiet) {
    std::cout << config.name << ": " << batch.runs.size() - failures << "/"
              << batch.runs.size() << " runs ok, objective mean " << batch.objective_mean
              << " (se " << batch.objective_se << ")\n"
              << eval::comparison_text(batch.metrics);
  }
  if (failures > 0)
    return {3, std::to_string(failures) + " run(s) failed"};
  return {0, "ok"};
}

RunOutcome run_config_file(const std::string& config_path, const std::string& data_dir,
                           const std::string& out_dir, bool quiet,
                           std::optional<int> override_seed_count,
                           std::optional<double> override_time_limit) {
  ExperimentConfig cfg;
  try {
    cfg = parse_config_file(config_path);
    if (override_seed_count) {
      if (*override_seed_count < 1) throw DataError("--seeds must be positive");
      cfg.seeds.clear();
      for (int i = 1; i <= *override_seed_count; ++i)
        cfg.seeds.push_back(static_cast<std::uint64_t>(i));
    }
    if (override_time_limit) {
      if (*override_time_limit <= 0) throw DataError("--time-limit must be positive");
      cfg.solver.time_limit = *override_time_limit;
    }
    cfg.validate();
  } catch (const std::exception& e) {
    return {1, std::string("config error: ") + e.what()};
  }
  try {
    return run(cfg, data_dir, out_dir, quiet);
  } catch (const DataError& e) {
    return {2, std::string("data error: ") + e.what()};
  } catch (const std::exception& e) {
    return {3, std::string("error: ") + e.what()};
  }
}

}  // namespace rezone::experiment
