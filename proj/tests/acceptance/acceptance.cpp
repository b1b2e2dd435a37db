// Acceptance run: prints one PASS/FAIL line per criterion and exits nonzero
// if any criterion fails. Extra lines starting with "  " are diagnostics.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <random>
#include <set>
#include <string>

#include <mtpomdp/mtpomdp.hpp>

#include "support/models.hpp"
#include "support/oracles.hpp"

using namespace mtpomdp;

namespace {

int failures = 0;

void verdict(int id, const char* title, bool ok, const std::string& detail) {
  std::printf("[%s] %d %s: %s\n", ok ? "PASS" : "FAIL", id, title, detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

void note(const std::string& line) {
  std::printf("  %s\n", line.c_str());
  std::fflush(stdout);
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

SelectOptions exhaustive_select() {
  SelectOptions so;
  so.enable_pruning = false;
  so.enable_skip_tight = false;
  so.enable_ordered_discard = false;
  return so;
}

std::vector<std::vector<std::size_t>> nonempty_subsets(std::size_t n) {
  std::vector<std::vector<std::size_t>> out;
  for (unsigned mask = 1; mask < (1u << n); ++mask) {
    std::vector<std::size_t> u;
    for (std::size_t i = 0; i < n; ++i)
      if (mask >> i & 1u) u.push_back(i);
    out.push_back(std::move(u));
  }
  return out;
}

// Seeds of the small random family whose exhaustive oracle is affordable.
std::vector<std::uint64_t> feasible_seeds(std::size_t want) {
  std::vector<std::uint64_t> seeds;
  for (std::uint64_t s = 0; seeds.size() < want; ++s)
    if (models::oracle_feasible(models::family_instance(s))) seeds.push_back(s);
  return seeds;
}

void oracle_optimality(const std::vector<std::uint64_t>& seeds) {
  std::size_t bad = 0;
  double worst = 0.0;
  for (auto s : seeds) {
    const auto f = models::family_instance(s);
    const auto exact = solve_agent_fh(f.problem(), f.horizon, models::kOracleNodeCap * 4);
    PlannerOptions po;
    po.horizon = Horizon::finite(f.horizon);
    const auto rep = Planner(f.tasks, po).plan_step(f.beliefs);
    const double err = std::max({std::abs(rep.global.lower - exact.value), std::abs(rep.global.upper - exact.value),
                                 std::abs(exact.value_of(rep.action) - exact.value)});
    worst = std::max(worst, err);
    if (err > 1e-6) ++bad;
  }
  verdict(1, "oracle optimality", bad == 0,
          fmt("%zu instances, %zu mismatches, max error %.3g (tol 1e-6)", seeds.size(), bad, worst));
}

void tuple_bounds(const std::vector<std::uint64_t>& seeds) {
  std::size_t samples = 0, invalid = 0, pairs = 0, non_monotone = 0, loose = 0;
  std::size_t split_samples = 0, split_invalid = 0;
  double worst = 0.0;
  for (auto s : seeds) {
    const auto f = models::family_instance(s);
    const auto H = Horizon::finite(f.horizon);
    const ClientSolver solver(f.tasks);
    for (const auto& u : nonempty_subsets(f.tasks.size())) {
      const double ref = brute_force_limited(f.problem().subset(u), f.horizon, u.size());
      // Full tuple: all of u expanded.
      double prev_lo = -INFINITY, prev_hi = INFINITY;
      bool mono = true;
      for (int h = 1; h <= f.horizon; ++h) {
        const auto r = solve_truncated(solver, TaskTuple(u, {}), f.beliefs, h, H).root;
        ++samples;
        const double miss = std::max(r.lower - ref, ref - r.upper);
        worst = std::max(worst, miss);
        if (miss > 1e-9) ++invalid;
        if (r.lower < prev_lo - 1e-9 || r.upper > prev_hi + 1e-9) mono = false;
        if (h == f.horizon && r.width() > 1e-9) ++loose;
        prev_lo = r.lower;
        prev_hi = r.upper;
      }
      ++pairs;
      if (!mono) ++non_monotone;
      // Split tuples with latent tasks, reported only.
      for (unsigned cm = 1; cm + 1 < (1u << u.size()); ++cm) {
        std::vector<std::size_t> c, l;
        for (std::size_t j = 0; j < u.size(); ++j) (cm >> j & 1u ? c : l).push_back(u[j]);
        for (int h = 1; h <= f.horizon; ++h) {
          const auto r = solve_truncated(solver, TaskTuple(c, l), f.beliefs, h, H).root;
          ++split_samples;
          if (r.lower > ref + 1e-9 || r.upper < ref - 1e-9) ++split_invalid;
        }
      }
    }
  }
  verdict(2, "bound validity", samples >= 1000 && invalid == 0,
          fmt("%zu (instance, tuple, h) samples, %zu outside [lower, upper], max miss %.3g (tol 1e-9)", samples,
              invalid, std::max(worst, 0.0)));
  note(fmt("tuples with latent tasks: %zu samples, %zu not bracketing the subset oracle", split_samples,
           split_invalid));
  verdict(3, "bound monotonicity", pairs >= 200 && non_monotone == 0 && loose == 0,
          fmt("%zu (instance, tuple) pairs, %zu non-monotone, %zu wider than 1e-9 at h = H", pairs, non_monotone,
              loose));
}

void agent_level_bounds(const std::vector<std::uint64_t>& seeds) {
  std::size_t samples = 0, lower_bad = 0, upper_bad = 0, instances_bad = 0, fixed_bad = 0;
  double worst = 0.0;
  std::map<std::size_t, std::size_t> bad_by_k;
  for (auto s : seeds) {
    const auto f = models::family_instance(s);
    const auto H = Horizon::finite(f.horizon);
    const std::size_t n = f.tasks.size();
    const ClientSolver solver(f.tasks);
    bool instance_ok = true;
    for (std::size_t k : std::set<std::size_t>{1, 2, std::min<std::size_t>(n, f.horizon)}) {
      const double limited = brute_force_limited(f.problem(), f.horizon, k);
      // Best fixed attention set of size k with the rest idle.
      double fixed = -INFINITY;
      for (const auto& u : nonempty_subsets(n)) {
        if (u.size() != k) continue;
        double idle = 0.0;
        for (std::size_t i = 0; i < n; ++i)
          if (std::find(u.begin(), u.end(), i) == u.end()) idle += solver.noop(i, f.beliefs[i], H).interval.lower;
        fixed = std::max(fixed, solve_agent_fh(f.problem().subset(u), f.horizon).value + idle);
      }
      std::map<int, std::size_t> table;
      for (int h = 1; h <= f.horizon; ++h) table[h] = k;
      const auto cap = CapacityFn::table(table);
      for (int h = 1; h <= f.horizon; ++h) {
        auto tuples = initialize_tuples_multitask(n, h, H, cap);
        const auto sel = select_action(solver, f.beliefs, h, H, tuples, exhaustive_select());
        ++samples;
        if (sel.global.lower > limited + 1e-9) {
          ++lower_bad;
          instance_ok = false;
        }
        if (sel.global.upper < limited - 1e-9) {
          ++upper_bad;
          ++bad_by_k[k];
          instance_ok = false;
          worst = std::max(worst, limited - sel.global.upper);
        }
        if (sel.global.lower > fixed + 1e-9 || sel.global.upper < fixed - 1e-9) ++fixed_bad;
      }
    }
    if (!instance_ok) ++instances_bad;
  }
  verdict(4, "agent-level bounds", instances_bad == 0,
          fmt("%zu instances, %zu samples, %zu lower and %zu upper violations, max miss %.3g (tol 1e-9)",
              seeds.size(), samples, lower_bad, upper_bad, worst));
  for (auto [k, c] : bad_by_k) note(fmt("upper violations at k* = %zu: %zu", k, c));
  note(fmt("against the best fixed attention set of size k*: %zu violations", fixed_bad));
}

void efficiency() {
  constexpr int episodes = 5;
  std::uint64_t fh_nodes = 0, ah_nodes = 0;
  std::size_t reward_diff = 0;
  for (int e = 0; e < episodes; ++e) {
    const auto f = models::unit_family(e, 5);
    double reward[2];
    std::uint64_t* totals[2] = {&fh_nodes, &ah_nodes};
    int j = 0;
    for (auto mode : {PlannerMode::agent_fh, PlannerMode::multitask_ah}) {
      PlannerOptions po;
      po.mode = mode;
      po.horizon = Horizon::finite(6);
      po.node_budget = 50'000'000;
      const auto trace = plan_episode(Planner(f.tasks, po), f.beliefs, e);
      for (const auto& st : trace.steps) *totals[j] += st.report.nodes;
      reward[j++] = trace.total_reward;
    }
    if (std::abs(reward[0] - reward[1]) > 1e-9) ++reward_diff;
  }
  const double ratio = static_cast<double>(fh_nodes) / static_cast<double>(std::max<std::uint64_t>(ah_nodes, 1));
  verdict(5, "efficiency", ratio >= 2.0 && reward_diff == 0,
          fmt("%d episodes, agent-fh %llu nodes, multitask-ah %llu nodes, ratio %.2fx (floor 2x, target 10x %s), "
              "%zu reward mismatches",
              episodes, static_cast<unsigned long long>(fh_nodes), static_cast<unsigned long long>(ah_nodes), ratio,
              ratio >= 10.0 ? "met" : "missed", reward_diff));
}

void infinite_horizon() {
  constexpr int instances = 20;
  constexpr double eps_gap = 1e-4, epsilon = 1e-6;
  std::size_t unconverged = 0, off = 0;
  double worst = 0.0, widest = 0.0;
  for (int e = 0; e < instances; ++e) {
    const auto f = models::unit_family(e, 2, 1.0, 0.9, 0.7);
    PlannerOptions po;
    po.horizon = Horizon::infinite(epsilon);
    po.eps_gap = eps_gap;
    po.node_budget = 5'000'000;
    const auto rep = Planner(f.tasks, po).plan_step(f.beliefs);
    const double allowance = eps_gap + static_cast<double>(f.tasks.size()) * epsilon;
    if (rep.anytime || rep.global.width() > allowance) ++unconverged;
    const double ref = oracle::JointStateDp(f.tasks, 0.9).value({0, 0}, 20);
    const double mid = 0.5 * (rep.global.lower + rep.global.upper);
    worst = std::max(worst, std::abs(mid - ref));
    widest = std::max(widest, rep.global.width());
    if (std::abs(mid - ref) > 1e-3) ++off;
  }
  verdict(6, "infinite-horizon convergence", unconverged == 0 && off == 0,
          fmt("%d instances, %zu unconverged, widest %.3g, %zu off the depth-20 oracle, max diff %.3g (tol 1e-3)",
              instances, unconverged, widest, off, worst));
}

void pruning_safety() {
  constexpr std::uint64_t episodes = 100;
  std::size_t action_diff = 0, interval_diff = 0, steps = 0;
  for (std::uint64_t s = 0; s < episodes; ++s) {
    const auto f = models::family_instance(s);
    EnvConfig env;
    env.step_limit = f.horizon;
    PlannerOptions on;
    on.horizon = Horizon::finite(f.horizon);
    PlannerOptions off = on;
    off.enable_pruning = off.enable_skip_tight = off.enable_ordered_discard = false;
    const auto a = plan_episode(Planner(f.tasks, on), f.beliefs, s, env);
    const auto b = plan_episode(Planner(f.tasks, off), f.beliefs, s, env);
    if (a.steps.size() != b.steps.size()) {
      ++action_diff;
      continue;
    }
    for (std::size_t i = 0; i < a.steps.size(); ++i) {
      ++steps;
      if (a.steps[i].action != b.steps[i].action) ++action_diff;
      const auto &x = a.steps[i].report.global, &y = b.steps[i].report.global;
      if (std::abs(x.lower - y.lower) > 1e-9 || std::abs(x.upper - y.upper) > 1e-9) ++interval_diff;
    }
  }
  verdict(7, "pruning safety", action_diff == 0 && interval_diff == 0,
          fmt("%llu episodes, %zu steps, %zu action and %zu interval differences (tol 1e-9)",
              static_cast<unsigned long long>(episodes), steps, action_diff, interval_diff));
}

void client_checks() {
  std::mt19937_64 rng(8);
  std::size_t order_bad = 0, law_bad = 0, samples = 0, filter_samples = 0;
  double law_worst = 0.0;
  for (std::uint64_t s = 0; samples < 1000; ++s) {
    GeneratorConfig g;
    g.tasks = 1;
    g.states = 1 + rng() % 3;
    g.actions = 1 + rng() % 2;
    g.observations = 1 + rng() % 3;
    g.seed = s;
    const auto task = generate_random_instance(g).tasks[0];
    std::vector<double> w(g.states);
    for (auto& x : w) x = std::uniform_real_distribution<double>(0.01, 1.0)(rng);
    const auto b = Belief::normalized(w);
    const auto H = Horizon::finite(1 + static_cast<int>(rng() % 4));
    ++samples;
    if (noop_value(task, b, H).interval.upper > solve_optimal(task, b, H).interval.lower + 1e-12) ++order_bad;
    for (std::size_t slot = 0; slot < task.num_slots(); ++slot) {
      // sum_z P(z | b, a) * b'(. | z) must reproduce the one-step prediction.
      const auto predicted = predict(task, b.probs(), slot);
      std::vector<double> mix(g.states, 0.0);
      for (const auto& br : observation_branches(task, b, slot))
        for (std::size_t i = 0; i < g.states; ++i) mix[i] += br.likelihood * br.posterior.probs()[i];
      double err = 0.0;
      for (std::size_t i = 0; i < g.states; ++i) err = std::max(err, std::abs(mix[i] - predicted[i]));
      law_worst = std::max(law_worst, err);
      ++filter_samples;
      if (err > 1e-9) ++law_bad;
    }
  }

  const auto f = models::family_instance(3);
  const ClientSolver solver(f.tasks);
  const auto H = Horizon::finite(f.horizon);
  const auto first = solver.optimal(0, f.beliefs[0], H);
  const auto after_first = solver.stats().computations;
  const auto second = solver.optimal(0, f.beliefs[0], H);
  const auto stats = solver.stats();
  const bool cache_ok = after_first == 1 && stats.computations == 1 && stats.hits == 1 &&
                        first.interval.lower == second.interval.lower &&
                        first.interval.upper == second.interval.upper;

  verdict(8, "client-level checks", order_bad == 0 && law_bad == 0 && cache_ok,
          fmt("%zu noop-vs-optimal samples with %zu violations, %zu filter samples with max error %.3g (tol 1e-9), "
              "cache %s",
              samples, order_bad, filter_samples, law_worst, cache_ok ? "computes once and repeats exactly" : "broken"));
}

}  // namespace

int main() {
  const auto start = std::chrono::steady_clock::now();
  const auto seeds = feasible_seeds(200);
  oracle_optimality(seeds);
  tuple_bounds(seeds);
  agent_level_bounds(seeds);
  efficiency();
  infinite_horizon();
  pruning_safety();
  client_checks();
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::printf("%d of 8 criteria failed (%.1f s)\n", failures, secs);
  return failures == 0 ? 0 : 1;
}
