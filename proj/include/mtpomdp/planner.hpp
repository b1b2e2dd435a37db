#pragma once

// Adaptive-horizon planners. agent-AH searches a single tuple holding every
// task; multitask-AH splits the problem into all k*-subsets of tasks, expands
// only k of them per tuple at truncated horizon h, keeps global bounds over
// the tuples, prunes tuples that cannot hold the optimum, and promotes latent
// tasks into the expanded set when the capacity for h grows.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "agent_oracle.hpp"
#include "client_solver.hpp"
#include "pomdp.hpp"
#include "truncated_solver.hpp"

namespace mtpomdp {

enum class PlannerMode { agent_fh, agent_ah, multitask_fh, multitask_ah };

inline std::string to_string(PlannerMode m) {
  switch (m) {
    case PlannerMode::agent_fh: return "agent-fh";
    case PlannerMode::agent_ah: return "agent-ah";
    case PlannerMode::multitask_fh: return "multitask-fh";
    case PlannerMode::multitask_ah: return "multitask-ah";
  }
  return "?";
}

inline PlannerMode parse_mode(const std::string& s) {
  for (auto m : {PlannerMode::agent_fh, PlannerMode::agent_ah, PlannerMode::multitask_fh, PlannerMode::multitask_ah})
    if (to_string(m) == s) return m;
  throw UnsupportedConfiguration("unknown planner mode '" + s + "'");
}

/// Upper bound on the number of tasks attendable within h steps: one
/// non-no-op action per step.
inline std::size_t default_capacity(int h, std::size_t n) {
  if (h < 1) throw UnsupportedConfiguration("capacity horizon must be >= 1");
  return std::min(n, static_cast<std::size_t>(h));
}

/// Maximum number of tasks attendable within a horizon: the universal bound
/// min(N, h) or a user step table {horizon -> count}.
class CapacityFn {
 public:
  CapacityFn() = default;

  static CapacityFn universal() { return {}; }

  static CapacityFn table(std::map<int, std::size_t> entries) {
    std::size_t prev = 0;
    for (const auto& [h, k] : entries) {
      if (h < 1) throw UnsupportedConfiguration("capacity table keys must be >= 1");
      if (k < 1) throw UnsupportedConfiguration("capacity table values must be >= 1");
      if (k < prev) throw UnsupportedConfiguration("capacity table must be non-decreasing in the horizon");
      prev = k;
    }
    CapacityFn f;
    f.table_ = std::move(entries);
    return f;
  }

  bool is_universal() const noexcept { return table_.empty(); }

  /// Capacity within h steps, clamped to [1, n].
  std::size_t operator()(int h, std::size_t n) const {
    if (table_.empty()) return default_capacity(h, n);
    std::size_t k = 1;
    for (const auto& [key, v] : table_) {
      if (key > h) break;
      k = v;
    }
    return std::clamp<std::size_t>(k, 1, n);
  }

  /// k*: capacity within the full horizon (all tasks when infinite).
  std::size_t full(const Horizon& horizon, std::size_t n) const {
    return horizon.is_finite() ? (*this)(horizon.value(), n) : n;
  }

 private:
  std::map<int, std::size_t> table_;
};

struct TupleEntry {
  TaskTuple tuple;
  std::optional<ValueInterval> interval;  // tuple bounds plus outside no-op values
  std::optional<ValueInterval> tuple_interval;
  AgentAction best_action;
  double best_action_reward = 0.0;  // immediate agent reward of best_action
  std::vector<std::pair<AgentAction, ValueInterval>> action_intervals;  // outside values included
};

inline TupleEntry make_entry(TaskTuple t) {
  TupleEntry e;
  e.tuple = std::move(t);
  return e;
}

struct TupleSet {
  std::vector<TupleEntry> active;
  std::size_t pruned = 0;
  std::size_t k = 0;
  std::size_t k_star = 0;

  std::size_t size() const noexcept { return active.size(); }
};

inline TupleSet initialize_tuples_agent(std::size_t n) {
  if (n == 0) throw UnsupportedConfiguration("empty task set");
  std::vector<std::size_t> all(n);
  for (std::size_t i = 0; i < n; ++i) all[i] = i;
  TupleSet set;
  set.active.push_back(make_entry(TaskTuple(all, {})));
  set.k = set.k_star = n;
  return set;
}

namespace detail {

inline void for_each_combination(const std::vector<std::size_t>& pool, std::size_t k,
                                 const std::function<void(const std::vector<std::size_t>&,
                                                          const std::vector<std::size_t>&)>& visit) {
  const std::size_t n = pool.size();
  if (k > n) return;
  std::vector<std::size_t> idx(k);
  for (std::size_t i = 0; i < k; ++i) idx[i] = i;
  while (true) {
    std::vector<std::size_t> chosen, rest;
    std::vector<bool> in(n, false);
    for (auto i : idx) in[i] = true;
    for (std::size_t i = 0; i < n; ++i) (in[i] ? chosen : rest).push_back(pool[i]);
    visit(chosen, rest);
    // next lexicographic combination
    std::size_t i = k;
    while (i > 0 && idx[i - 1] == n - k + i - 1) --i;
    if (i == 0) return;
    ++idx[i - 1];
    for (std::size_t j = i; j < k; ++j) idx[j] = idx[j - 1] + 1;
  }
}

}  // namespace detail

/// All size-k* subsets of the tasks, each split into every (expanded, latent)
/// pair with |expanded| = k, in lexicographic order.
inline TupleSet initialize_tuples_multitask(std::size_t n, int h, const Horizon& horizon, const CapacityFn& capacity) {
  if (n == 0) throw UnsupportedConfiguration("empty task set");
  TupleSet set;
  set.k_star = capacity.full(horizon, n);
  set.k = std::min(capacity(h, n), set.k_star);
  std::vector<std::size_t> all(n);
  for (std::size_t i = 0; i < n; ++i) all[i] = i;
  std::set<TaskTuple> seen;
  detail::for_each_combination(all, set.k_star, [&](const auto& subset, const auto&) {
    detail::for_each_combination(subset, set.k, [&](const auto& expanded, const auto& latent) {
      TaskTuple t(expanded, latent);
      if (seen.insert(t).second) set.active.push_back(make_entry(t));
    });
  });
  return set;
}

/// Promotes one latent task into the expanded set, in every possible way,
/// whenever the capacity for h exceeds the current k. Children start with
/// unknown bounds; duplicates are merged.
inline TupleSet recompute_tuples(int h, const TupleSet& tuples, const CapacityFn& capacity, std::size_t n) {
  const std::size_t target = std::min(capacity(h, n), tuples.k_star);
  TupleSet out = tuples;
  while (out.k < target) {
    std::vector<TupleEntry> next;
    std::set<TaskTuple> seen;
    bool promoted = false;
    for (const auto& e : out.active) {
      if (e.tuple.latent.empty()) {
        if (seen.insert(e.tuple).second) next.push_back(e);
        continue;
      }
      for (auto p : e.tuple.latent) {
        auto expanded = e.tuple.expanded;
        expanded.push_back(p);
        std::vector<std::size_t> latent;
        for (auto q : e.tuple.latent)
          if (q != p) latent.push_back(q);
        TaskTuple child(expanded, latent);
        if (seen.insert(child).second) next.push_back(make_entry(child));
        promoted = true;
      }
    }
    out.active = std::move(next);
    ++out.k;
    if (!promoted) break;
  }
  return out;
}

struct SelectOptions {
  double eps_gap = 1e-6;
  bool enable_pruning = true;
  bool enable_skip_tight = true;
  bool enable_ordered_discard = true;
  TruncatedOptions truncated;
};

struct SelectResult {
  AgentAction action;
  ValueInterval global;
  std::size_t solved = 0;
  std::size_t skipped_tight = 0;
  std::size_t pruned = 0;
  SearchStats stats;
};

/// Solves every live tuple at truncated horizon h, refreshes the global
/// bounds and prunes tuples whose upper bound falls below the global lower
/// bound. `tuples` is updated in place.
inline SelectResult select_action(const ClientSolver& solver, const std::vector<Belief>& beliefs, int h,
                                  const Horizon& horizon, TupleSet& tuples, const SelectOptions& options) {
  if (tuples.active.empty()) throw UnsupportedConfiguration("select_action: no active tuples");
  const std::size_t n = solver.tasks().size();
  const double eps = options.eps_gap;

  std::vector<ValueInterval> idle(n);
  for (std::size_t q = 0; q < n; ++q) idle[q] = solver.noop(q, beliefs.at(q), horizon).interval;

  std::vector<std::size_t> order(tuples.active.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  auto stored_upper = [&](std::size_t i) {
    const auto& iv = tuples.active[i].interval;
    return iv ? iv->upper : std::numeric_limits<double>::infinity();
  };
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return stored_upper(a) > stored_upper(b); });

  SelectResult res;
  const double ninf = -std::numeric_limits<double>::infinity();
  res.global = {ninf, ninf};
  std::vector<bool> discard(tuples.active.size(), false);
  for (std::size_t pos = 0; pos < order.size(); ++pos) {
    auto& e = tuples.active[order[pos]];
    if (options.enable_ordered_discard && e.interval && res.global.lower > e.interval->upper + eps) {
      for (std::size_t rest = pos; rest < order.size(); ++rest) discard[order[rest]] = true;
      break;
    }
    const bool tight = e.tuple_interval && e.tuple_interval->width() <= 1e-12 * std::max(1.0, std::abs(e.tuple_interval->upper));
    if (options.enable_skip_tight && tight) {
      ++res.skipped_tight;
    } else {
      auto r = solve_truncated(solver, e.tuple, beliefs, h, horizon, options.truncated);
      ValueInterval outside{0.0, 0.0};
      const auto members = e.tuple.all_tasks();
      for (std::size_t q = 0; q < n; ++q)
        if (!std::binary_search(members.begin(), members.end(), q)) outside += idle[q];
      e.tuple_interval = r.root;
      e.interval = r.root + outside;
      e.action_intervals.clear();
      for (const auto& [a, iv] : r.action_intervals) e.action_intervals.emplace_back(a, iv + outside);
      e.best_action = extract_best_action(e.action_intervals, eps, r.action_rewards);
      e.best_action_reward = immediate_reward(solver.tasks(), beliefs, e.best_action);
      res.stats += r.stats;
      ++res.solved;
    }
    res.global.lower = std::max(res.global.lower, e.interval->lower);
    res.global.upper = std::max(res.global.upper, e.interval->upper);
  }

  // Best tuple: upper within eps of the global upper, then the largest lower,
  // the larger immediate reward and the smaller action. Chosen before pruning
  // so that inconsistent bounds cannot remove every candidate.
  auto better = [](const TupleEntry& x, const TupleEntry& y) {
    if (strictly_greater(x.interval->lower, y.interval->lower)) return true;
    if (strictly_greater(y.interval->lower, x.interval->lower)) return false;
    if (strictly_greater(x.best_action_reward, y.best_action_reward)) return true;
    if (strictly_greater(y.best_action_reward, x.best_action_reward)) return false;
    return x.best_action < y.best_action;
  };
  const TupleEntry* best = nullptr;
  for (const auto& e : tuples.active) {
    if (!e.interval || e.interval->upper < res.global.upper - eps) continue;
    if (!best || better(e, *best)) best = &e;
  }
  res.action = best->best_action;

  std::vector<TupleEntry> kept;
  for (std::size_t i = 0; i < tuples.active.size(); ++i) {
    auto& e = tuples.active[i];
    const bool dominated = e.interval && e.interval->upper < res.global.lower - eps;
    if ((options.enable_ordered_discard && discard[i]) || (options.enable_pruning && dominated)) {
      ++res.pruned;
      continue;
    }
    kept.push_back(std::move(e));
  }
  tuples.active = std::move(kept);
  tuples.pruned += res.pruned;

  return res;
}

struct IterationRecord {
  int h = 0;
  std::size_t k = 0;
  ValueInterval global;
  std::size_t tuples_active = 0;
};

struct PlannerReport {
  PlannerMode mode = PlannerMode::multitask_ah;
  AgentAction action;
  ValueInterval global;
  int h_final = 0;
  std::size_t tuples_solved = 0;
  std::size_t tuples_pruned = 0;
  std::size_t tuples_skipped_tight = 0;
  std::size_t tuples_active = 0;
  std::uint64_t nodes = 0;
  std::uint64_t cache_hits = 0;
  double wall_ms = 0.0;
  bool anytime = false;  // stopped by timeout or budget before convergence
  std::vector<IterationRecord> iterations;
};

struct PlannerOptions {
  PlannerMode mode = PlannerMode::multitask_ah;
  int h0 = 1;
  Horizon horizon = Horizon::finite(1);
  double eps_gap = 1e-6;
  CapacityFn capacity;
  std::optional<std::chrono::milliseconds> timeout;
  std::uint64_t node_budget = kDefaultNodeBudget;
  bool enable_pruning = true;
  bool enable_skip_tight = true;
  bool enable_ordered_discard = true;
  double fringe_upper_shift = 0.0;  // test hook
};

/// Online planner over a fixed task list. The client-value cache lives as
/// long as the planner; tuple sets are rebuilt on every plan_step.
class Planner {
 public:
  Planner(std::vector<ClientPomdp> tasks, PlannerOptions options)
      : options_(std::move(options)), solver_(std::move(tasks), options_.node_budget) {
    if (solver_.tasks().empty()) throw UnsupportedConfiguration("empty task set");
    const double gamma = solver_.task(0).discount();
    for (const auto& t : solver_.tasks())
      if (t.discount() != gamma) throw ModelError("all tasks must share the discount");
    options_.horizon.validate(gamma);
    if (options_.h0 < 1) throw UnsupportedConfiguration("h0 must be >= 1");
    if (options_.horizon.is_finite() && options_.h0 > options_.horizon.value())
      throw UnsupportedConfiguration("h0 exceeds the horizon");
    const bool fixed = options_.mode == PlannerMode::agent_fh || options_.mode == PlannerMode::multitask_fh;
    if (fixed && !options_.horizon.is_finite())
      throw UnsupportedConfiguration(to_string(options_.mode) + " requires a finite horizon");
  }

  const PlannerOptions& options() const noexcept { return options_; }
  const ClientSolver& client_solver() const noexcept { return solver_; }
  std::size_t num_tasks() const noexcept { return solver_.tasks().size(); }
  double discount() const { return solver_.task(0).discount(); }

  PlannerReport plan_step(const std::vector<Belief>& beliefs) const {
    if (beliefs.size() != num_tasks()) throw ModelError("plan_step: one belief per task required");
    const auto start = std::chrono::steady_clock::now();
    const auto hits_before = solver_.stats().hits;
    PlannerReport report;
    report.mode = options_.mode;
    switch (options_.mode) {
      case PlannerMode::agent_fh: run_oracle(beliefs, report); break;
      case PlannerMode::multitask_fh: run_fixed_tuples(beliefs, report); break;
      case PlannerMode::agent_ah:
      case PlannerMode::multitask_ah: run_adaptive(beliefs, report, start); break;
    }
    report.cache_hits = solver_.stats().hits - hits_before;
    report.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    return report;
  }

 private:
  SelectOptions select_options() const {
    SelectOptions s;
    s.eps_gap = options_.eps_gap;
    s.enable_pruning = options_.enable_pruning;
    s.enable_skip_tight = options_.enable_skip_tight;
    s.enable_ordered_discard = options_.enable_ordered_discard;
    s.truncated.node_budget = options_.node_budget;
    s.truncated.fringe_upper_shift = options_.fringe_upper_shift;
    return s;
  }

  void run_oracle(const std::vector<Belief>& beliefs, PlannerReport& report) const {
    AgentProblem problem{solver_.tasks(), beliefs, discount()};
    const auto sol = solve_agent_fh(problem, options_.horizon.value(), options_.node_budget);
    report.action = sol.best_action;
    report.global = ValueInterval::exact(sol.value);
    report.h_final = options_.horizon.value();
    report.nodes = sol.nodes_expanded;
    report.iterations.push_back({report.h_final, num_tasks(), report.global, 0});
  }

  void absorb(const SelectResult& sel, const TupleSet& tuples, int h, PlannerReport& report) const {
    report.action = sel.action;
    report.global = sel.global;
    report.h_final = h;
    report.tuples_solved += sel.solved;
    report.tuples_pruned += sel.pruned;
    report.tuples_skipped_tight += sel.skipped_tight;
    report.tuples_active = tuples.size();
    report.nodes += sel.stats.nodes_expanded;
    report.iterations.push_back({h, tuples.k, sel.global, tuples.size()});
  }

  void run_fixed_tuples(const std::vector<Belief>& beliefs, PlannerReport& report) const {
    const int H = options_.horizon.value();
    TupleSet tuples = initialize_tuples_multitask(num_tasks(), H, options_.horizon, options_.capacity);
    const auto sel = select_action(solver_, beliefs, H, options_.horizon, tuples, select_options());
    absorb(sel, tuples, H, report);
  }

  bool forced_converged(int h) const {
    if (options_.horizon.is_finite()) return h >= options_.horizon.value();
    double rmax = 0.0;
    for (const auto& t : solver_.tasks()) rmax = std::max(rmax, t.reward_bound());
    const double gamma = discount();
    return std::pow(gamma, h) * static_cast<double>(num_tasks()) * rmax / (1.0 - gamma) <= options_.eps_gap;
  }

  void run_adaptive(const std::vector<Belief>& beliefs, PlannerReport& report,
                    std::chrono::steady_clock::time_point start) const {
    const bool agent = options_.mode == PlannerMode::agent_ah;
    const std::size_t n = num_tasks();
    int h = options_.h0;
    TupleSet tuples = agent ? initialize_tuples_agent(n)
                            : initialize_tuples_multitask(n, h, options_.horizon, options_.capacity);
    auto sel_opts = select_options();
    while (true) {
      SelectResult sel;
      try {
        sel = select_action(solver_, beliefs, h, options_.horizon, tuples, sel_opts);
      } catch (const BudgetExceeded&) {
        if (report.iterations.empty()) throw;
        report.anytime = true;
        return;
      } catch (const DeadlineReached&) {
        report.anytime = true;
        return;
      }
      absorb(sel, tuples, h, report);
      if (sel.global.width() <= options_.eps_gap || forced_converged(h)) return;
      if (options_.timeout) {
        // The first iteration always completes; later ones may be cut short.
        const auto deadline = start + *options_.timeout;
        if (std::chrono::steady_clock::now() >= deadline) {
          report.anytime = true;
          return;
        }
        sel_opts.truncated.deadline = deadline;
      }
      ++h;
      if (!agent) tuples = recompute_tuples(h, tuples, options_.capacity, n);
    }
  }

  PlannerOptions options_;
  ClientSolver solver_;
};

}  // namespace mtpomdp
