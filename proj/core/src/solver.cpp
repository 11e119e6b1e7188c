#include "rezone/solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#include "rezone/constraints.hpp"
#include "rezone/detail/search_state.hpp"

namespace rezone {

void MoveMix::validate() const {
  if (reassign < 0 || swap < 0 || std::abs(reassign + swap - 1.0) > 1e-9)
    throw DataError("move mix probabilities must be nonnegative and sum to 1");
}

void SolverParams::validate() const {
  if (time_limit <= 0) throw DataError("time_limit must be positive");
  if (max_iterations <= 0) throw DataError("max_iterations must be positive");
  if (cooling_rate <= 0 || cooling_rate > 1)
    throw DataError("cooling_rate must be in (0, 1]");
  if (initial_temperature && *initial_temperature <= 0)
    throw DataError("initial_temperature must be positive");
  move_mix.validate();
}

namespace solver {

namespace {

using solver_detail::SearchState;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Platform-independent deterministic draws from raw engine bits.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : state_(seed ? seed : 0x9e3779b97f4a7c15ull) {}

  std::uint64_t next() {  // splitmix64
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  std::size_t below(std::size_t n) {  // unbiased via rejection
    std::uint64_t lim = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t r;
    do {
      r = next();
    } while (r >= lim);
    return static_cast<std::size_t>(r % n);
  }

private:
  std::uint64_t state_;
};

struct MoveGen {
  const Instance& inst;
  const SearchState& state;
  std::vector<int> units_with_choice;     // >= 2 candidate schools
  std::vector<std::pair<int, int>> edges; // all same-level edges, concatenated

  MoveGen(const Instance& i, const SearchState& s) : inst(i), state(s) {
    for (int u = 0; u < inst.n_units(); ++u)
      if (inst.candidates.by_unit[u].size() >= 2) units_with_choice.push_back(u);
    for (const auto& level : inst.level_edges)
      edges.insert(edges.end(), level.begin(), level.end());
  }

  // One proposal; nullopt when the draw aborts (interior unit, uncut edge,
  // candidate mismatch). Aborted draws still consume an iteration.
  std::optional<SearchState::Move> propose(Rng& rng, const MoveMix& mix) {
    bool do_reassign = !units_with_choice.empty() &&
                       (edges.empty() || rng.uniform01() < mix.reassign);
    if (do_reassign) {
      int u = units_with_choice[rng.below(units_with_choice.size())];
      if (!state.unit_on_boundary(u)) return std::nullopt;
      int cur = state.zoning().school_by_unit[u];
      const auto& cand = inst.candidates.by_unit[u];
      // cur is always a member; draw among the others.
      std::size_t k = rng.below(cand.size() - 1);
      int target = -1;
      std::size_t seen = 0;
      for (int sc : cand) {
        if (sc == cur) continue;
        if (seen++ == k) {
          target = sc;
          break;
        }
      }
      if (target < 0) return std::nullopt;
      SearchState::Move m;
      m.kind = SearchState::Move::Kind::reassign;
      m.unit_a = u;
      m.school_a = target;
      return m;
    }
    if (edges.empty()) return std::nullopt;
    auto [a, b] = edges[rng.below(edges.size())];
    int sa = state.zoning().school_by_unit[a];
    int sb = state.zoning().school_by_unit[b];
    if (sa == sb) return std::nullopt;
    if (!inst.is_candidate(a, sb) || !inst.is_candidate(b, sa)) return std::nullopt;
    SearchState::Move m;
    m.kind = SearchState::Move::Kind::swap;
    m.unit_a = a;
    m.school_a = sb;
    m.unit_b = b;
    m.school_b = sa;
    return m;
  }
};

}  // namespace

SolveResult solve(const Instance& inst, const ObjectiveConfig& config,
                  const SolverParams& params) {
  params.validate();
  config.constraints.validate();
  config.weights.validate(inst);
  auto t0 = Clock::now();

  auto warm = constraints::check_feasible(inst.sq_zoning, inst, config);
  if (!warm.ok)
    throw ModelError("infeasible warm start:\n" + warm.to_text());

  SearchState state(inst, config);
  MoveGen gen(inst, state);
  Rng rng(params.seed);

  SolveResult result;
  result.best_zoning = state.zoning();
  double best_obj = state.objective();
  if (params.keep_trace) result.trace.push_back({0, best_obj, 0.0});

  // Auto temperature: median |delta| over sampled feasible moves accepted
  // with probability 1/2.
  double temperature;
  if (params.initial_temperature) {
    temperature = *params.initial_temperature;
  } else {
    std::vector<double> deltas;
    for (int attempt = 0; attempt < 5000 && deltas.size() < 1000; ++attempt) {
      auto m = gen.propose(rng, params.move_mix);
      if (!m) continue;
      auto d = state.evaluate_move(*m);
      if (d && std::abs(*d) > 0) deltas.push_back(std::abs(*d));
    }
    if (deltas.empty()) {
      temperature = 1.0;
    } else {
      std::nth_element(deltas.begin(), deltas.begin() + deltas.size() / 2, deltas.end());
      temperature = deltas[deltas.size() / 2] / std::log(2.0);
      if (temperature <= 0) temperature = 1.0;
    }
  }

  long long accepted = 0;
  long long iter = 0;
  for (; iter < params.max_iterations; ++iter) {
    if ((iter & 0xff) == 0 && seconds_since(t0) >= params.time_limit) break;
    auto m = gen.propose(rng, params.move_mix);
    if (!m) continue;
    auto delta = state.evaluate_move(*m);
    if (!delta) continue;
    bool accept = *delta <= 0;
    if (!accept) {
      double p = std::exp(-*delta / temperature);
      accept = rng.uniform01() < p;
    }
    if (!accept) continue;
    state.commit(*m);
    ++accepted;
    temperature *= params.cooling_rate;
    if (params.check_feasible_each_accept) {
      auto rep = constraints::check_feasible(state.zoning(), inst, config);
      if (!rep.ok)
        throw ModelError("internal error: accepted an infeasible state:\n" +
                         rep.to_text());
    }
    if (state.objective() < best_obj) {
      best_obj = state.objective();
      result.best_zoning = state.zoning();
      if (params.keep_trace)
        result.trace.push_back({iter + 1, best_obj, seconds_since(t0)});
    }
    // Reconcile double accumulation drift.
    if ((accepted & 0x3fff) == 0) state.reset(state.zoning());
  }

  result.iterations = iter;
  result.wall_seconds = seconds_since(t0);
  result.proven_optimal = false;
  result.best_breakdown = objectives::total_objective(result.best_zoning, inst, config);
  return result;
}

SolveResult enumerate_optimal(const Instance& inst, const ObjectiveConfig& config) {
  config.constraints.validate();
  config.weights.validate(inst);
  auto t0 = Clock::now();

  double space = 1;
  for (const auto& cand : inst.candidates.by_unit) {
    if (cand.empty()) throw ModelError("unit with empty candidate set");
    space *= static_cast<double>(cand.size());
    if (space > 1e7) {
      std::ostringstream os;
      os.precision(3);
      os << "assignment space too large to enumerate: ~" << std::scientific << space
         << " (guard 1e7)";
      throw ModelError(os.str());
    }
  }

  // Assign upper levels first so feeder tallies can build bottom-up later;
  // ties are resolved by an explicit lexicographic comparison, so the
  // enumeration order itself does not matter for the contract.
  std::vector<int> order;
  for (int li = inst.level_set.count() - 1; li >= 0; --li)
    for (int u : inst.units_at_level[li]) order.push_back(u);

  Zoning z = inst.sq_zoning;
  std::vector<long long> o(inst.schools.size(), 0);
  bool prune_capacity = config.constraints.enforce_capacity;

  Zoning best;
  double best_obj = 0;
  bool have_best = false;
  long long leaves = 0;
  long long feasible_undefined = 0;

  // School-id sequence in unit-id order for the lexicographic tie-break.
  auto lex_less = [&](const Zoning& a, const Zoning& b) {
    for (int u = 0; u < inst.n_units(); ++u) {
      SchoolId sa = inst.schools[a.school_by_unit[u]].id;
      SchoolId sb = inst.schools[b.school_by_unit[u]].id;
      if (sa != sb) return sa < sb;
    }
    return false;
  };

  auto leaf = [&]() {
    ++leaves;
    auto report = constraints::check_feasible(z, inst, config);
    if (!report.ok) return;
    double obj;
    try {
      obj = objectives::total_objective(z, inst, config).total;
    } catch (const ModelError&) {
      ++feasible_undefined;  // e.g. empty school in a ratio objective
      return;
    }
    if (!have_best || obj < best_obj || (obj == best_obj && lex_less(z, best))) {
      best = z;
      best_obj = obj;
      have_best = true;
    }
  };

  auto rec = [&](auto&& self, std::size_t depth) -> void {
    if (depth == order.size()) {
      leaf();
      return;
    }
    int u = order[depth];
    long long n = inst.units[u].n_students;
    for (int sc : inst.candidates.by_unit[u]) {
      z.school_by_unit[u] = sc;
      o[sc] += n;
      // Enrollment only grows along a branch, so a blown cap prunes it.
      if (!(prune_capacity && o[sc] > inst.schools[sc].cap_max)) self(self, depth + 1);
      o[sc] -= n;
    }
  };
  rec(rec, 0);

  if (!have_best) {
    if (feasible_undefined > 0)
      throw ModelError("objective undefined on every feasible zoning (" +
                       std::to_string(feasible_undefined) + " candidates)");
    throw ModelError("no feasible zoning in the candidate space");
  }

  SolveResult result;
  result.best_zoning = best;
  result.best_breakdown = objectives::total_objective(best, inst, config);
  result.iterations = leaves;
  result.wall_seconds = seconds_since(t0);
  result.proven_optimal = true;
  result.trace.push_back({leaves, best_obj, result.wall_seconds});
  return result;
}

namespace {

int resolve_threads(int threads) {
  if (threads > 0) return threads;
  if (const char* env = std::getenv("REZONE_THREADS")) {
    int v = std::atoi(env);
    if (v > 0) return v;
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

}  // namespace

BatchResult batch_solve(const Instance& inst, const ObjectiveConfig& config,
                        const std::vector<std::uint64_t>& seeds,
                        const SolverParams& params, int threads) {
  if (seeds.empty()) throw DataError("batch_solve needs at least one seed");
  BatchResult batch;
  batch.runs.resize(seeds.size());
  for (std::size_t i = 0; i < seeds.size(); ++i) batch.runs[i].seed = seeds[i];

  int n_threads = std::min<int>(resolve_threads(threads),
                                static_cast<int>(seeds.size()));
  auto work = [&](int tid) {
    for (std::size_t i = tid; i < seeds.size(); i += n_threads) {
      SolverParams p = params;
      p.seed = seeds[i];
      try {
        batch.runs[i].result = solve(inst, config, p);
      } catch (const std::exception& e) {
        batch.runs[i].error = e.what();
      }
    }
  };
  if (n_threads <= 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(work, t);
    for (auto& th : pool) th.join();
  }

  std::vector<eval::RunForComparison> ok_runs;
  std::vector<double> objectives;
  for (const auto& r : batch.runs) {
    if (!r.result) continue;
    ok_runs.push_back(
        {&r.result->best_zoning, r.result->best_breakdown.total, r.result->proven_optimal});
    objectives.push_back(r.result->best_breakdown.total);
  }
  if (!ok_runs.empty()) {
    batch.metrics = eval::compare_runs(ok_runs, inst, config);
    double n = static_cast<double>(objectives.size());
    for (double x : objectives) batch.objective_mean += x;
    batch.objective_mean /= n;
    if (objectives.size() > 1) {
      double var = 0;
      for (double x : objectives)
        var += (x - batch.objective_mean) * (x - batch.objective_mean);
      var /= (n - 1);
      batch.objective_se = std::sqrt(var / n);
    }
    batch.single_sample = objectives.size() == 1;
  }
  return batch;
}

void write_trace_log(const SolveResult& result, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write file: " + path);
  for (const auto& t : result.trace) out << t.wall_seconds << ' ' << t.objective << '\n';
  if (!out) throw DataError("write failed: " + path);
}

}  // namespace solver
}  // namespace rezone
