#pragma once

// Truncated belief-tree search for one task tuple. The tree branches over the
// expanded tasks only, advances latent tasks by no-op prediction, and bounds
// every fringe node with
//
//   lower = max_p [ V*_p + sum_{q != p} V^n_q ]      (one task served, rest idle)
//   upper = sum_p V*_p                               (all tasks served in parallel)
//
// over all tasks of the tuple for the remaining horizon. Lowers and uppers are
// then backed up separately with the Bellman recursion.

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "agent_oracle.hpp"
#include "client_solver.hpp"
#include "pomdp.hpp"

namespace mtpomdp {

/// A sub-problem: `expanded` tasks are searched in the tree, `latent` tasks
/// only idle and enter through the fringe bounds. Both sets are sorted.
struct TaskTuple {
  std::vector<std::size_t> expanded;
  std::vector<std::size_t> latent;

  TaskTuple() = default;
  TaskTuple(std::vector<std::size_t> c, std::vector<std::size_t> l) : expanded(std::move(c)), latent(std::move(l)) {
    std::sort(expanded.begin(), expanded.end());
    std::sort(latent.begin(), latent.end());
    if (expanded.empty()) throw ModelError("task tuple needs at least one expanded task");
    for (auto t : expanded)
      if (std::binary_search(latent.begin(), latent.end(), t))
        throw ModelError("task " + std::to_string(t) + " is both expanded and latent");
  }

  std::vector<std::size_t> all_tasks() const {
    std::vector<std::size_t> u = expanded;
    u.insert(u.end(), latent.begin(), latent.end());
    std::sort(u.begin(), u.end());
    return u;
  }

  std::size_t size() const noexcept { return expanded.size() + latent.size(); }

  auto operator<=>(const TaskTuple&) const = default;
};

inline std::string to_string(const TaskTuple& t) {
  auto list = [](const std::vector<std::size_t>& v) {
    std::string s = "{";
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
    return s + "}";
  };
  return "(" + list(t.expanded) + "," + list(t.latent) + ")";
}

struct TruncatedOptions {
  std::uint64_t node_budget = kDefaultNodeBudget;
  bool keep_tree = false;
  /// Test hook: added to every fringe upper bound. Must stay 0 outside tests.
  double fringe_upper_shift = 0.0;
  std::optional<std::chrono::steady_clock::time_point> deadline;
};

struct SearchStats {
  std::uint64_t nodes_expanded = 0;
  std::uint64_t fringe_nodes = 0;
  std::uint64_t cache_hits = 0;

  SearchStats& operator+=(const SearchStats& o) {
    nodes_expanded += o.nodes_expanded;
    fringe_nodes += o.fringe_nodes;
    cache_hits += o.cache_hits;
    return *this;
  }
};

struct BoundedNode;

struct ActionEdge {
  AgentAction action;
  double reward = 0.0;
  ValueInterval q;
  std::vector<std::pair<double, std::unique_ptr<BoundedNode>>> outcomes;  // (likelihood, child)
};

/// Node of an explicitly kept truncated tree. `beliefs` is indexed by global
/// task index; only entries of the tuple's tasks are meaningful.
struct BoundedNode {
  int depth = 0;
  std::vector<Belief> beliefs;
  ValueInterval value;
  AgentAction best_action_upper;
  std::vector<ActionEdge> edges;  // empty at the fringe

  bool is_fringe() const noexcept { return edges.empty(); }
};

struct TruncatedResult {
  ValueInterval root;
  std::vector<std::pair<AgentAction, ValueInterval>> action_intervals;  // enumeration order, all-noop first
  std::vector<double> action_rewards;  // immediate expected reward over the tuple, parallel to action_intervals
  SearchStats stats;
  std::unique_ptr<BoundedNode> tree;  // only with TruncatedOptions::keep_tree
};

/// Fringe bounds over every task of the tuple. `beliefs` is indexed by global
/// task index. Infinite client intervals contribute their conservative side.
inline ValueInterval compute_fringe_bounds(const ClientSolver& solver, const TaskTuple& tuple,
                                           const std::vector<Belief>& beliefs, const Horizon& remaining) {
  const auto members = tuple.all_tasks();
  std::vector<ValueInterval> opt, idle;
  opt.reserve(members.size());
  idle.reserve(members.size());
  double idle_lower_sum = 0.0;
  double upper = 0.0;
  for (auto t : members) {
    opt.push_back(solver.optimal(t, beliefs.at(t), remaining).interval);
    idle.push_back(solver.noop(t, beliefs.at(t), remaining).interval);
    idle_lower_sum += idle.back().lower;
    upper += opt.back().upper;
  }
  double lower = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < members.size(); ++i)
    lower = std::max(lower, opt[i].lower + (idle_lower_sum - idle[i].lower));
  return {lower, upper};
}

/// Maximal upper bound wins; among actions whose upper is within `tie_band`
/// of the maximum, the larger lower bound wins, then the larger immediate
/// expected reward (when `rewards` is given, parallel to `intervals`), then
/// the smaller (task, action) with all-noop last. A zero band means exact
/// ties only.
inline AgentAction extract_best_action(const std::vector<std::pair<AgentAction, ValueInterval>>& intervals,
                                       double tie_band = 0.0, const std::vector<double>& rewards = {}) {
  if (intervals.empty()) throw ModelError("extract_best_action: empty action map");
  if (!rewards.empty() && rewards.size() != intervals.size())
    throw ModelError("extract_best_action: reward list does not match the action map");
  double max_upper = -std::numeric_limits<double>::infinity();
  for (const auto& [a, v] : intervals) max_upper = std::max(max_upper, v.upper);
  const double band = std::max(tie_band, 1e-12 * std::max(1.0, std::abs(max_upper)));

  auto reward_of = [&](std::size_t i) { return rewards.empty() ? 0.0 : rewards[i]; };
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < intervals.size(); ++i) {
    const auto& [a, v] = intervals[i];
    if (v.upper < max_upper - band) continue;
    if (!best) {
      best = i;
      continue;
    }
    const auto& [ba, bv] = intervals[*best];
    if (strictly_greater(v.lower, bv.lower)) {
      best = i;
    } else if (!strictly_greater(bv.lower, v.lower)) {
      if (strictly_greater(reward_of(i), reward_of(*best)) ||
          (!strictly_greater(reward_of(*best), reward_of(i)) && a < ba))
        best = i;
    }
  }
  return intervals[*best].first;
}

namespace detail {

class TruncatedSearch {
 public:
  TruncatedSearch(const ClientSolver& solver, const TaskTuple& tuple, int h, const Horizon& total,
                  const TruncatedOptions& options)
      : solver_(solver), tuple_(tuple), h_(h), total_(total), options_(options) {
    gamma_ = solver_.tasks().empty() ? 1.0 : solver_.task(0).discount();
    horizon_exhausted_ = total_.is_finite() && total_.value() == h_;
    actions_.push_back(AgentAction::all_noop());
    for (auto t : tuple_.expanded)
      for (std::size_t a = 0; a < solver_.task(t).num_actions(); ++a) actions_.push_back({t, a});
  }

  TruncatedResult run(const std::vector<Belief>& beliefs) {
    TruncatedResult result;
    const auto hits_before = solver_.stats().hits;
    std::unique_ptr<BoundedNode> root_node;
    if (options_.keep_tree) root_node = std::make_unique<BoundedNode>();
    nodes_ = 1;
    result.root = expand(beliefs, 0, root_node.get(), &result);
    result.stats.nodes_expanded = nodes_;
    result.stats.fringe_nodes = fringe_;
    result.stats.cache_hits = solver_.stats().hits - hits_before;
    result.tree = std::move(root_node);
    return result;
  }

 private:
  ValueInterval expand(const std::vector<Belief>& beliefs, int depth, BoundedNode* node, TruncatedResult* root) {
    if (node) {
      node->depth = depth;
      node->beliefs = beliefs;
    }
    if (depth == h_) {
      ++fringe_;
      ValueInterval v = compute_fringe_bounds(solver_, tuple_, beliefs, total_.after(h_));
      v.upper += options_.fringe_upper_shift;
      if (node) node->value = v;
      return v;
    }

    // Latent tasks idle: their rewards accrue and their beliefs are predicted
    // through the no-op chain without observation branching.
    double latent_reward = 0.0;
    std::vector<Belief> base = beliefs;
    for (auto l : tuple_.latent) {
      const auto& task = solver_.task(l);
      latent_reward += expected_reward(task, beliefs[l], task.noop());
      base[l] = belief_predict_noop(task, beliefs[l], 1);
    }

    ValueInterval best{-std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
    for (const auto& a : actions_) {
      double reward = latent_reward;
      for (auto c : tuple_.expanded) reward += expected_reward(solver_.task(c), beliefs[c], a.slot_for(c, solver_.task(c)));

      ActionEdge* edge = nullptr;
      if (node) {
        node->edges.push_back(ActionEdge{a, reward, {}, {}});
        edge = &node->edges.back();
      }
      ValueInterval future{0.0, 0.0};
      // Children at an exhausted horizon are worth exactly zero.
      const bool leaf = depth + 1 == h_ && horizon_exhausted_ && !node;
      for (auto& br : leaf ? std::vector<JointBranch>{} : joint_branches(solver_.tasks(), base, a, tuple_.expanded)) {
        if (++nodes_ > options_.node_budget)
          throw BudgetExceeded("truncated search node budget of " + std::to_string(options_.node_budget) +
                                   " exceeded for tuple " + to_string(tuple_),
                               nodes_);
        if (options_.deadline && (nodes_ & 1023U) == 0 && std::chrono::steady_clock::now() >= *options_.deadline)
          throw DeadlineReached("planning deadline reached in tuple " + to_string(tuple_));
        std::unique_ptr<BoundedNode> child;
        if (node) child = std::make_unique<BoundedNode>();
        const ValueInterval cv = expand(br.beliefs, depth + 1, child.get(), nullptr);
        future.lower += br.likelihood * cv.lower;
        future.upper += br.likelihood * cv.upper;
        if (edge) edge->outcomes.emplace_back(br.likelihood, std::move(child));
      }
      const ValueInterval q{reward + gamma_ * future.lower, reward + gamma_ * future.upper};
      if (edge) edge->q = q;
      if (root) {
        root->action_intervals.emplace_back(a, q);
        root->action_rewards.push_back(reward);
      }
      best.lower = std::max(best.lower, q.lower);
      best.upper = std::max(best.upper, q.upper);
    }
    if (node) {
      node->value = best;
      std::vector<std::pair<AgentAction, ValueInterval>> qs;
      std::vector<double> rs;
      for (const auto& e : node->edges) {
        qs.emplace_back(e.action, e.q);
        rs.push_back(e.reward);
      }
      node->best_action_upper = extract_best_action(qs, 0.0, rs);
    }
    return best;
  }

  const ClientSolver& solver_;
  const TaskTuple& tuple_;
  int h_;
  Horizon total_;
  TruncatedOptions options_;
  double gamma_ = 1.0;
  bool horizon_exhausted_ = false;
  std::vector<AgentAction> actions_;
  std::uint64_t nodes_ = 0;
  std::uint64_t fringe_ = 0;
};

}  // namespace detail

/// Bounded value of `tuple` from `beliefs` (indexed by global task index) with
/// the tree truncated at depth h and fringe bounds for the rest of `total`.
inline TruncatedResult solve_truncated(const ClientSolver& solver, const TaskTuple& tuple,
                                       const std::vector<Belief>& beliefs, int h, const Horizon& total,
                                       const TruncatedOptions& options = {}) {
  if (h < 1) throw UnsupportedConfiguration("truncated horizon must be >= 1");
  if (total.is_finite() && h > total.value())
    throw UnsupportedConfiguration("truncated horizon " + std::to_string(h) + " exceeds horizon " +
                                   std::to_string(total.value()));
  for (auto t : tuple.all_tasks())
    if (t >= solver.tasks().size() || t >= beliefs.size())
      throw ModelError("tuple references unknown task " + std::to_string(t));
  return detail::TruncatedSearch(solver, tuple, h, total, options).run(beliefs);
}

}  // namespace mtpomdp
