#include "rezone/ses.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "rezone/csv.hpp"

namespace rezone::ses {

const char* tercile_name(Tercile t) {
  switch (t) {
    case Tercile::lower: return "lower";
    case Tercile::medium: return "medium";
    case Tercile::higher: return "higher";
  }
  return "?";
}

namespace {

// Population z-scores; all-zero when the variable is constant.
std::vector<double> z_scores(const std::vector<double>& v) {
  double n = static_cast<double>(v.size());
  double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
  double var = 0;
  for (double x : v) var += (x - mean) * (x - mean);
  double sd = std::sqrt(var / n);
  std::vector<double> out(v.size(), 0.0);
  if (sd > 0)
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = (v[i] - mean) / sd;
  return out;
}

// Ranks 0..n-1 ascending by (value, id).
std::vector<int> ranks_by(const std::vector<double>& index,
                          const std::vector<long long>& ids) {
  std::vector<int> order(index.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (index[a] != index[b]) return index[a] < index[b];
    return ids[a] < ids[b];
  });
  std::vector<int> rank(index.size());
  for (std::size_t r = 0; r < order.size(); ++r) rank[order[r]] = static_cast<int>(r);
  return rank;
}

int tercile_of(int rank, int n) { return (3 * rank) / n; }  // 0 = bottom third

}  // namespace

Classification classify(const std::vector<BlockGroup>& block_groups) {
  if (block_groups.size() < 3)
    throw DataError("SES classification needs at least 3 block groups, got " +
                    std::to_string(block_groups.size()));
  std::vector<BlockGroup> bg = block_groups;
  std::sort(bg.begin(), bg.end(),
            [](const BlockGroup& a, const BlockGroup& b) { return a.id < b.id; });
  for (std::size_t i = 1; i < bg.size(); ++i)
    if (bg[i].id == bg[i - 1].id)
      throw DataError("duplicate block group id " + std::to_string(bg[i].id));

  int n = static_cast<int>(bg.size());
  std::vector<long long> ids(n);
  std::array<std::vector<double>, 5> vars;
  for (auto& v : vars) v.resize(n);
  for (int i = 0; i < n; ++i) {
    ids[i] = bg[i].id;
    vars[0][i] = bg[i].median_income;
    vars[1][i] = bg[i].home_ownership;
    vars[2][i] = bg[i].educ_attainment;
    vars[3][i] = bg[i].english_prof;
    vars[4][i] = bg[i].dual_parent;
  }
  std::array<std::vector<double>, 5> zs;
  for (int k = 0; k < 5; ++k) zs[k] = z_scores(vars[k]);

  std::vector<double> composite(n), income_educ(n);
  for (int i = 0; i < n; ++i) {
    composite[i] = (zs[0][i] + zs[1][i] + zs[2][i] + zs[3][i] + zs[4][i]) / 5.0;
    income_educ[i] = (zs[0][i] + zs[2][i]) / 2.0;
  }
  composite = z_scores(composite);
  income_educ = z_scores(income_educ);
  const std::vector<double>& income = zs[0];

  auto r_comp = ranks_by(composite, ids);
  auto r_income = ranks_by(income, ids);
  auto r_ie = ranks_by(income_educ, ids);

  Classification out;
  for (int i = 0; i < n; ++i) {
    Classification::Row row;
    row.id = ids[i];
    row.index_composite = composite[i];
    row.index_income = income[i];
    row.index_income_educ = income_educ[i];
    int t = tercile_of(r_comp[i], n);
    row.tercile = t == 0 ? Tercile::lower : (t == 1 ? Tercile::medium : Tercile::higher);
    row.lower_ses = tercile_of(r_comp[i], n) == 0 || tercile_of(r_income[i], n) == 0 ||
                    tercile_of(r_ie[i], n) == 0;
    out.rows.push_back(row);
  }
  return out;
}

std::vector<BlockGroup> read_csv(const std::string& path) {
  csv::Table t = csv::read_file(path);
  int c_id = t.require_col("bg_id");
  const char* names[5] = {"median_income", "home_ownership", "educ_attainment",
                          "english_prof", "dual_parent"};
  int cols[5];
  for (int k = 0; k < 5; ++k) cols[k] = t.require_col(names[k]);
  std::vector<BlockGroup> out;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    for (int k = 0; k < 5; ++k)
      if (t.empty_field(r, cols[k]))
        throw DataError(t.path, t.file_line(r), names[k],
                        "missing value (rows with missing variables are rejected)");
    BlockGroup b;
    b.id = t.get_int(r, c_id, "bg_id");
    b.median_income = t.get_double(r, cols[0], names[0]);
    b.home_ownership = t.get_double(r, cols[1], names[1]);
    b.educ_attainment = t.get_double(r, cols[2], names[2]);
    b.english_prof = t.get_double(r, cols[3], names[3]);
    b.dual_parent = t.get_double(r, cols[4], names[4]);
    out.push_back(b);
  }
  return out;
}

void write_csv(const Classification& c, const std::string& path) {
  std::vector<std::vector<std::string>> rows;
  for (const auto& r : c.rows)
    rows.push_back({std::to_string(r.id), tercile_name(r.tercile),
                    r.lower_ses ? "1" : "0", csv::format_double(r.index_composite),
                    csv::format_double(r.index_income),
                    csv::format_double(r.index_income_educ)});
  csv::write_file(path,
                  {"bg_id", "tercile", "lower_ses", "index_composite", "index_income",
                   "index_income_educ"},
                  rows);
}

}  // namespace rezone::ses
