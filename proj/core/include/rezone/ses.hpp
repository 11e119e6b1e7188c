#pragma once

#include <string>
#include <vector>

#include "rezone/types.hpp"

namespace rezone::ses {

struct BlockGroup {
  long long id = 0;
  double median_income = 0;
  double home_ownership = 0;
  double educ_attainment = 0;
  double english_prof = 0;
  double dual_parent = 0;
};

enum class Tercile { lower, medium, higher };
const char* tercile_name(Tercile t);

struct Classification {
  struct Row {
    long long id = 0;
    Tercile tercile = Tercile::medium;  // from the composite index
    bool lower_ses = false;             // union over the three indices
    double index_composite = 0;    // z-scored mean of all five z-scores
    double index_income = 0;       // income z-score
    double index_income_educ = 0;  // z-scored mean of income + educ z-scores
  };
  std::vector<Row> rows;  // sorted by id
};

/// Classify block groups. A block group is lower-SES iff it falls in the
/// bottom rank-based third of ANY of the three index distributions (ties
/// broken by ascending id); tercile labels come from the composite index.
/// Requires >= 3 rows. Zero-stdev variables z-score to 0.
Classification classify(const std::vector<BlockGroup>& block_groups);

std::vector<BlockGroup> read_csv(const std::string& path);
void write_csv(const Classification& c, const std::string& path);

}  // namespace rezone::ses
