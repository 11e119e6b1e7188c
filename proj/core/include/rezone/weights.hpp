#pragma once

#include <map>
#include <string>
#include <vector>

#include "rezone/objectives.hpp"
#include "rezone/types.hpp"

namespace rezone::weights {

struct SurveyResponse {
  long long id = 0;
  std::string race;  // empty or "unspecified": impute from affiliations
  std::vector<SchoolId> affiliations;
  // 1 = highest. Ties split the first-place mass equally.
  int rank_distance = 0;
  int rank_balance = 0;
  int rank_feeder = 0;
};

struct SchoolDemographics {
  // school -> race -> share; shares sum to 1 per school.
  std::map<SchoolId, std::map<std::string, double>> shares;

  void validate() const;  // throws DataError
};

/// Race-share vector for a respondent: one-hot for a declared race, the
/// unweighted mean of the affiliated schools' vectors otherwise.
std::map<std::string, double> impute_race(const SurveyResponse& r,
                                          const SchoolDemographics& demo);

struct DerivedWeights {
  SchoolWeights weights;           // survey mode, normalized per school
  std::vector<std::string> notes;  // degenerate cases worth surfacing
};

/// Per-school (distance, balance, feeder) weights: reweighted first-place
/// preference fractions among affiliated respondents. Respondents with more
/// than 3 affiliations are capped to a total influence of 3; race reweighting
/// corrects survey shares toward the school's district shares. Schools with
/// no respondents get (1/3, 1/3, 1/3).
DerivedWeights derive_weights(const std::vector<SurveyResponse>& responses,
                              const SchoolDemographics& demo);

std::vector<SurveyResponse> read_survey_csv(const std::string& path);
SchoolDemographics read_demographics_csv(const std::string& path);

}  // namespace rezone::weights
