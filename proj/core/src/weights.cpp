#include "rezone/weights.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "rezone/csv.hpp"

namespace rezone::weights {

void SchoolDemographics::validate() const {
  for (const auto& [school, races] : shares) {
    double sum = 0;
    for (const auto& [race, share] : races) {
      if (share < 0 || share > 1)
        throw DataError("demographic share out of [0,1] for school " +
                        std::to_string(school) + ", race '" + race + "'");
      sum += share;
    }
    if (std::abs(sum - 1.0) > 1e-9)
      throw DataError("demographic shares for school " + std::to_string(school) +
                      " sum to " + std::to_string(sum) + ", expected 1");
  }
}

namespace {

bool race_unspecified(const std::string& race) {
  return race.empty() || race == "unspecified";
}

}  // namespace

std::map<std::string, double> impute_race(const SurveyResponse& r,
                                          const SchoolDemographics& demo) {
  if (!race_unspecified(r.race)) return {{r.race, 1.0}};
  if (r.affiliations.empty())
    throw DataError("respondent " + std::to_string(r.id) + " has no affiliations");
  std::map<std::string, double> mean;
  for (SchoolId s : r.affiliations) {
    auto it = demo.shares.find(s);
    if (it == demo.shares.end())
      throw DataError("respondent " + std::to_string(r.id) +
                      " affiliated with unknown school id " + std::to_string(s));
    for (const auto& [race, share] : it->second) mean[race] += share;
  }
  for (auto& [race, share] : mean) share /= static_cast<double>(r.affiliations.size());
  return mean;
}

namespace {

// First-place preference mass over (distance, balance, feeder); ties split.
std::array<double, 3> preference_mass(const SurveyResponse& r, bool& tied) {
  int ranks[3] = {r.rank_distance, r.rank_balance, r.rank_feeder};
  int best = std::min({ranks[0], ranks[1], ranks[2]});
  int n_best = 0;
  for (int k : ranks)
    if (k == best) ++n_best;
  tied = n_best > 1;
  std::array<double, 3> mass{};
  for (int i = 0; i < 3; ++i)
    if (ranks[i] == best) mass[i] = 1.0 / static_cast<double>(n_best);
  return mass;
}

}  // namespace

DerivedWeights derive_weights(const std::vector<SurveyResponse>& responses,
                              const SchoolDemographics& demo) {
  demo.validate();
  DerivedWeights out;
  out.weights.set_survey_mode(true);

  struct Prepared {
    const SurveyResponse* resp;
    double multiplier;  // min(1, 3/#affiliations)
    std::map<std::string, double> race_share;
    std::array<double, 3> pref;
  };
  std::map<SchoolId, std::vector<const Prepared*>> by_school;
  std::vector<Prepared> prepared;
  prepared.reserve(responses.size());
  bool any_tie = false;
  for (const auto& r : responses) {
    if (r.affiliations.empty())
      throw DataError("respondent " + std::to_string(r.id) + " has no affiliations");
    Prepared p;
    p.resp = &r;
    p.multiplier = std::min(1.0, 3.0 / static_cast<double>(r.affiliations.size()));
    p.race_share = impute_race(r, demo);
    bool tied = false;
    p.pref = preference_mass(r, tied);
    any_tie = any_tie || tied;
    prepared.push_back(std::move(p));
  }
  for (const auto& p : prepared) {
    for (SchoolId s : p.resp->affiliations) by_school[s].push_back(&p);
  }
  if (any_tie)
    out.notes.push_back("tied first-place ranks split equally across objectives");

  // Every school in the demographics table gets a row; schools with no
  // respondents fall back to the uniform split.
  std::vector<SchoolId> school_ids;
  for (const auto& [s, _] : demo.shares) school_ids.push_back(s);
  for (const auto& [s, _] : by_school)
    if (!demo.shares.count(s))
      throw DataError("school " + std::to_string(s) +
                      " has respondents but no demographics row");

  for (SchoolId s : school_ids) {
    auto it = by_school.find(s);
    if (it == by_school.end() || it->second.empty()) {
      out.weights.set(s, Objective::distance, 1.0 / 3.0);
      out.weights.set(s, Objective::balance, 1.0 / 3.0);
      out.weights.set(s, Objective::feeder, 1.0 / 3.0);
      out.notes.push_back("school " + std::to_string(s) +
                          ": no respondents, uniform weights");
      continue;
    }
    const auto& resp = it->second;

    // Survey race shares at this school (affiliation-capped masses).
    std::map<std::string, double> sigma;
    double total_mass = 0;
    for (const Prepared* p : resp) {
      for (const auto& [race, share] : p->race_share)
        sigma[race] += p->multiplier * share;
      total_mass += p->multiplier;
    }
    for (auto& [race, v] : sigma) v /= total_mass;

    // District mass renormalized over the races present in the survey.
    const auto& district = demo.shares.at(s);
    double present_district_mass = 0;
    for (const auto& [race, share] : district)
      if (sigma.count(race) && sigma.at(race) > 0) present_district_mass += share;
    bool degenerate = present_district_mass <= 0;
    if (degenerate)
      out.notes.push_back("school " + std::to_string(s) +
                          ": no overlap between survey races and district shares; "
                          "reweighting skipped");
    bool missing_race = false;
    for (const auto& [race, share] : district)
      if (share > 0 && (!sigma.count(race) || sigma.at(race) <= 0)) missing_race = true;
    if (missing_race && !degenerate)
      out.notes.push_back("school " + std::to_string(s) +
                          ": races absent from the survey had their district mass "
                          "redistributed");

    std::array<double, 3> acc{};
    for (const Prepared* p : resp) {
      double factor = 1.0;
      if (!degenerate) {
        factor = 0.0;
        for (const auto& [race, share] : p->race_share) {
          auto sg = sigma.find(race);
          if (sg == sigma.end() || sg->second <= 0) continue;
          auto dt = district.find(race);
          double district_share = dt == district.end() ? 0.0 : dt->second;
          factor += share * (district_share / present_district_mass) / sg->second;
        }
      }
      double mass = p->multiplier * factor;
      for (int k = 0; k < 3; ++k) acc[k] += mass * p->pref[k];
    }
    // Reweighting preserves total mass, so dividing by the raw mass
    // normalizes the triple to 1.
    out.weights.set(s, Objective::distance, acc[0] / total_mass);
    out.weights.set(s, Objective::balance, acc[1] / total_mass);
    out.weights.set(s, Objective::feeder, acc[2] / total_mass);
  }
  return out;
}

std::vector<SurveyResponse> read_survey_csv(const std::string& path) {
  csv::Table t = csv::read_file(path);
  int c_id = t.require_col("respondent_id");
  int c_race = t.require_col("race");
  int c_aff = t.require_col("affiliations");
  int c_d = t.require_col("rank_distance");
  int c_b = t.require_col("rank_balance");
  int c_f = t.require_col("rank_feeder");
  std::vector<SurveyResponse> out;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    SurveyResponse s;
    s.id = t.get_int(r, c_id, "respondent_id");
    s.race = t.field(r, c_race);
    const std::string& aff = t.field(r, c_aff);
    std::istringstream is(aff);
    std::string tok;
    while (std::getline(is, tok, ';')) {
      if (tok.empty()) continue;
      try {
        s.affiliations.push_back(std::stoi(tok));
      } catch (const std::exception&) {
        throw DataError(t.path, t.file_line(r), "affiliations",
                        "not a school id: '" + tok + "'");
      }
    }
    if (s.affiliations.empty())
      throw DataError(t.path, t.file_line(r), "affiliations", "must be nonempty");
    s.rank_distance = static_cast<int>(t.get_int(r, c_d, "rank_distance"));
    s.rank_balance = static_cast<int>(t.get_int(r, c_b, "rank_balance"));
    s.rank_feeder = static_cast<int>(t.get_int(r, c_f, "rank_feeder"));
    out.push_back(std::move(s));
  }
  return out;
}

SchoolDemographics read_demographics_csv(const std::string& path) {
  csv::Table t = csv::read_file(path);
  int c_id = t.require_col("school_id");
  int c_race = t.require_col("race");
  int c_share = t.require_col("share");
  SchoolDemographics demo;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    SchoolId s = static_cast<SchoolId>(t.get_int(r, c_id, "school_id"));
    demo.shares[s][t.field(r, c_race)] = t.get_double(r, c_share, "share");
  }
  demo.validate();
  return demo;
}

}  // namespace rezone::weights
