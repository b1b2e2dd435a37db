#pragma once

// Exhaustive fixed-horizon solver for the combined (agent) POMDP. It expands
// every joint action and every positive-likelihood joint observation down to
// the horizon with no pruning or bounding, and is exponential by design: it
// is the reference every optimality test compares against.

#include <algorithm>
#include <bit>
#include <cstdint>
#include <limits>
#include <utility>
#include <vector>

#include "client_solver.hpp"
#include "pomdp.hpp"

namespace mtpomdp {

struct AgentProblem {
  std::vector<ClientPomdp> tasks;
  std::vector<Belief> beliefs;
  double discount = 1.0;

  std::size_t size() const noexcept { return tasks.size(); }

  void validate() const {
    if (tasks.empty()) throw ModelError("agent problem has no tasks");
    if (beliefs.size() != tasks.size()) throw ModelError("agent problem: one belief per task required");
    for (std::size_t i = 0; i < tasks.size(); ++i) {
      if (tasks[i].discount() != discount)
        throw ModelError("agent problem: task " + std::to_string(i) + " discount differs from the shared discount");
      if (beliefs[i].size() != tasks[i].num_states())
        throw ModelError("agent problem: belief " + std::to_string(i) + " has wrong dimension");
    }
  }

  /// Sub-problem over the given task positions (in the given order).
  AgentProblem subset(const std::vector<std::size_t>& positions) const {
    AgentProblem out;
    out.discount = discount;
    for (auto p : positions) {
      out.tasks.push_back(tasks.at(p));
      out.beliefs.push_back(beliefs.at(p));
    }
    return out;
  }
};

/// All-noop first, then (task, action) in index order: 1 + sum_i |A_i| actions.
inline std::vector<AgentAction> enumerate_actions(const AgentProblem& problem) {
  std::vector<AgentAction> out{AgentAction::all_noop()};
  for (std::size_t t = 0; t < problem.tasks.size(); ++t)
    for (std::size_t a = 0; a < problem.tasks[t].num_actions(); ++a) out.push_back({t, a});
  return out;
}

/// Expected one-step agent reward of `a`: the acted task's action reward plus
/// the no-op rewards of every other task.
inline double immediate_reward(const std::vector<ClientPomdp>& tasks, const std::vector<Belief>& beliefs,
                               const AgentAction& a) {
  double r = 0.0;
  for (std::size_t i = 0; i < tasks.size(); ++i) r += expected_reward(tasks[i], beliefs[i], a.slot_for(i, tasks[i]));
  return r;
}

/// Upper estimate of the belief nodes of a full tree of the given depth,
/// ignoring zero-likelihood pruning. Saturates at uint64 max.
inline std::uint64_t estimate_agent_nodes(const AgentProblem& problem, int horizon) {
  constexpr auto kMax = std::numeric_limits<std::uint64_t>::max();
  std::uint64_t branching = enumerate_actions(problem).size();
  for (const auto& t : problem.tasks) {
    if (branching > kMax / t.num_observations()) return kMax;
    branching *= t.num_observations();
  }
  std::uint64_t level = 1, total = 1;
  for (int d = 0; d < horizon; ++d) {
    if (level > kMax / branching) return kMax;
    level *= branching;
    if (total > kMax - level) return kMax;
    total += level;
  }
  return total;
}

struct AgentSolution {
  double value = 0.0;
  AgentAction best_action;
  std::vector<std::pair<AgentAction, double>> action_values;  // root Q-values, enumeration order
  std::uint64_t nodes_expanded = 0;

  double value_of(const AgentAction& a) const {
    for (const auto& [act, v] : action_values)
      if (act == a) return v;
    return -std::numeric_limits<double>::infinity();
  }
};

/// Joint observation outcome: one posterior per task plus the joint likelihood.
struct JointBranch {
  double likelihood;
  std::vector<Belief> beliefs;
};

/// Cross product of per-task observation branches under `action`, restricted
/// to `positions`; tasks not listed keep their belief. Joint likelihood is the
/// product of per-task likelihoods.
inline std::vector<JointBranch> joint_branches(const std::vector<ClientPomdp>& tasks,
                                               const std::vector<Belief>& beliefs, const AgentAction& action,
                                               const std::vector<std::size_t>& positions) {
  std::vector<JointBranch> out{{1.0, beliefs}};
  for (auto i : positions) {
    const auto branches = observation_branches(tasks[i], beliefs[i], action.slot_for(i, tasks[i]));
    std::vector<JointBranch> next;
    next.reserve(out.size() * branches.size());
    for (const auto& partial : out) {
      for (const auto& br : branches) {
        JointBranch j{partial.likelihood * br.likelihood, partial.beliefs};
        j.beliefs[i] = br.posterior;
        next.push_back(std::move(j));
      }
    }
    out = std::move(next);
  }
  return out;
}

namespace detail {

/// Naive expectimax; `max_touched` limits the number of distinct tasks that
/// may receive a non-no-op action along each root-to-leaf branch.
class AgentExpectimax {
 public:
  AgentExpectimax(const AgentProblem& problem, int horizon, std::size_t max_touched, std::uint64_t budget)
      : problem_(problem), horizon_(horizon), max_touched_(max_touched), budget_(budget) {
    problem_.validate();
    if (problem_.size() > 64) throw UnsupportedConfiguration("oracle supports at most 64 tasks");
    actions_ = enumerate_actions(problem_);
    // Evaluate in (task, action) order with all-noop last, so the first
    // action of a full tie wins.
    std::rotate(actions_.begin(), actions_.begin() + 1, actions_.end());
    for (std::size_t i = 0; i < problem_.size(); ++i) all_positions_.push_back(i);
  }

  AgentSolution solve() {
    if (horizon_ < 1) throw UnsupportedConfiguration("oracle horizon must be >= 1");
    AgentSolution sol;
    nodes_ = 1;
    sol.value = -std::numeric_limits<double>::infinity();
    std::vector<std::pair<AgentAction, double>> q_values;
    double best_reward = 0.0;
    for (const auto& a : actions_) {
      if (!allowed(a, 0)) continue;
      const double q = q_value(problem_.beliefs, a, horizon_, touch(0, a));
      const double r = immediate_reward(problem_.tasks, problem_.beliefs, a);
      q_values.emplace_back(a, q);
      // Value ties go to the larger immediate reward, so an undiscounted
      // receding-horizon agent does not postpone work forever.
      if (strictly_greater(q, sol.value) || (!strictly_greater(sol.value, q) && strictly_greater(r, best_reward))) {
        sol.value = std::max(sol.value, q);
        sol.best_action = a;
        best_reward = r;
      }
    }
    // Report in enumeration order (all-noop first).
    for (const auto& a : enumerate_actions(problem_))
      for (const auto& [act, v] : q_values)
        if (act == a) sol.action_values.emplace_back(act, v);
    sol.nodes_expanded = nodes_;
    return sol;
  }

 private:
  std::uint64_t touch(std::uint64_t mask, const AgentAction& a) const {
    return a.is_all_noop() ? mask : (mask | (std::uint64_t{1} << a.task));
  }

  bool allowed(const AgentAction& a, std::uint64_t mask) const {
    if (a.is_all_noop() || (mask >> a.task) & 1U) return true;
    return static_cast<std::size_t>(std::popcount(mask)) < max_touched_;
  }

  double q_value(const std::vector<Belief>& beliefs, const AgentAction& a, int steps, std::uint64_t mask) {
    double q = immediate_reward(problem_.tasks, beliefs, a);
    if (steps == 1) return q;
    double future = 0.0;
    for (const auto& br : joint_branches(problem_.tasks, beliefs, a, all_positions_)) {
      if (++nodes_ > budget_)
        throw BudgetExceeded("agent oracle node budget of " + std::to_string(budget_) + " exceeded (estimated " +
                                 std::to_string(estimate_agent_nodes(problem_, horizon_)) + " nodes)",
                             estimate_agent_nodes(problem_, horizon_));
      future += br.likelihood * value(br.beliefs, steps - 1, mask);
    }
    return q + problem_.discount * future;
  }

  double value(const std::vector<Belief>& beliefs, int steps, std::uint64_t mask) {
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& a : actions_) {
      if (!allowed(a, mask)) continue;
      best = std::max(best, q_value(beliefs, a, steps, touch(mask, a)));
    }
    return best;
  }

  const AgentProblem& problem_;
  int horizon_;
  std::size_t max_touched_;
  std::uint64_t budget_;
  std::uint64_t nodes_ = 0;
  std::vector<AgentAction> actions_;
  std::vector<std::size_t> all_positions_;
};

}  // namespace detail

/// Exact finite-horizon value of the agent POMDP by full expectimax.
inline AgentSolution solve_agent_fh(const AgentProblem& problem, int horizon,
                                    std::uint64_t node_budget = kDefaultNodeBudget) {
  return detail::AgentExpectimax(problem, horizon, problem.size(), node_budget).solve();
}

/// Exhaustive value when at most `k` distinct tasks may be acted on along
/// every root-to-leaf branch. k = 0 yields the all-noop trajectory value.
inline double brute_force_limited(const AgentProblem& problem, int horizon, std::size_t k,
                                  std::uint64_t node_budget = kDefaultNodeBudget) {
  if (k > problem.size()) throw UnsupportedConfiguration("task budget k exceeds the number of tasks");
  return detail::AgentExpectimax(problem, horizon, k, node_budget).solve().value;
}

}  // namespace mtpomdp
