#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "rezone/experiment.hpp"
#include "rezone/instance.hpp"
#include "rezone/ses.hpp"
#include "rezone/synth.hpp"
#include "rezone/weights.hpp"

int main(int argc, char** argv) {
  CLI::App app{"rezone - multi-level school attendance boundary optimizer"};
  app.require_subcommand(1);

  // run <config> --data <dir> --out <dir>
  std::string config_path, data_dir, out_dir;
  std::optional<int> seeds_override;
  std::optional<double> time_limit_override;
  bool quiet = false;
  auto* run = app.add_subcommand("run", "Run an experiment from a config file");
  run->add_option("config", config_path, "Experiment config file")->required();
  run->add_option("--data", data_dir, "Instance data directory")->required();
  run->add_option("--out", out_dir, "Output directory")->required();
  run->add_option("--seeds", seeds_override, "Override: run seeds 1..N");
  run->add_option("--time-limit", time_limit_override,
                  "Override: per-run time limit in seconds");
  run->add_flag("--quiet", quiet, "Suppress progress output");

  // synth --out <dir> [...]
  rezone::synth::SynthParams sp;
  std::string synth_out;
  std::vector<int> synth_schools;
  std::vector<int> synth_levels;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic district");
  synth->add_option("--out", synth_out, "Output data directory")->required();
  synth->add_option("--rows", sp.rows, "Grid rows");
  synth->add_option("--cols", sp.cols, "Grid cols");
  synth->add_option("--levels", synth_levels, "Level ids (default 1 2)");
  synth->add_option("--schools", synth_schools, "Schools per level (default 4 2)");
  synth->add_option("--students-min", sp.students_min, "Min students per unit");
  synth->add_option("--students-max", sp.students_max, "Max students per unit");
  synth->add_option("--group-fraction", sp.group_fraction, "District group share");
  synth->add_option("--clustering", sp.clustering, "Group clustering intensity [0,1]");
  synth->add_option("--seed", sp.seed, "Generator seed");

  // classify-ses --in blockgroups.csv --out ses.csv
  std::string ses_in, ses_out;
  auto* ses = app.add_subcommand("classify-ses", "Classify block groups by SES indices");
  ses->add_option("--in", ses_in, "blockgroups.csv")->required();
  ses->add_option("--out", ses_out, "Output classification CSV")->required();

  // derive-weights --survey survey.csv --demographics demographics.csv --out weights.csv
  std::string w_survey, w_demo, w_out;
  auto* dw = app.add_subcommand("derive-weights",
                                "Derive per-school objective weights from a survey");
  dw->add_option("--survey", w_survey, "survey.csv")->required();
  dw->add_option("--demographics", w_demo, "demographics.csv")->required();
  dw->add_option("--out", w_out, "Output weights CSV")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      auto outcome = rezone::experiment::run_config_file(
          config_path, data_dir, out_dir, quiet, seeds_override, time_limit_override);
      if (outcome.exit_code != 0) std::cerr << outcome.message << "\n";
      return outcome.exit_code;
    }
    if (*synth) {
      if (!synth_levels.empty()) sp.levels.assign(synth_levels.begin(), synth_levels.end());
      if (!synth_schools.empty()) sp.schools_per_level = synth_schools;
      auto inst = rezone::synth::generate(sp);
      rezone::save_instance(inst, synth_out);
      std::cout << "wrote " << inst.units.size() << " units, " << inst.schools.size()
                << " schools, " << inst.students.size() << " students to " << synth_out
                << "\n";
      return 0;
    }
    if (*ses) {
      auto rows = rezone::ses::read_csv(ses_in);
      auto cls = rezone::ses::classify(rows);
      rezone::ses::write_csv(cls, ses_out);
      long long lower = 0;
      for (const auto& r : cls.rows) lower += r.lower_ses ? 1 : 0;
      std::cout << cls.rows.size() << " block groups, " << lower << " lower-SES\n";
      return 0;
    }
    if (*dw) {
      auto survey = rezone::weights::read_survey_csv(w_survey);
      auto demo = rezone::weights::read_demographics_csv(w_demo);
      auto derived = rezone::weights::derive_weights(survey, demo);
      derived.weights.save_csv(w_out);
      for (const auto& note : derived.notes) std::cout << "note: " << note << "\n";
      std::cout << "wrote " << w_out << "\n";
      return 0;
    }
  } catch (const rezone::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
