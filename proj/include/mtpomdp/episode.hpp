#pragma once

// Online loop: plan, execute in the simulator, filter beliefs, repeat.

#include <cstdint>
#include <string>
#include <vector>

#include "planner.hpp"
#include "sim_env.hpp"

namespace mtpomdp {

struct StepRecord {
  int step = 0;
  AgentAction action;
  std::vector<std::size_t> observations;
  std::vector<double> rewards;
  PlannerReport report;
};

struct EpisodeTrace {
  std::vector<StepRecord> steps;
  double total_reward = 0.0;  // discounted
  bool all_tasks_done = false;
};

inline EpisodeTrace plan_episode(const Planner& planner, const std::vector<Belief>& initial, std::uint64_t seed,
                                 const EnvConfig& env_config = {}) {
  EnvState env = reset(planner.client_solver().tasks(), initial, seed, env_config);
  std::vector<Belief> beliefs = initial;
  EpisodeTrace trace;
  while (!env.done) {
    StepRecord rec;
    rec.step = env.step_count;
    rec.report = planner.plan_step(beliefs);
    rec.action = rec.report.action;
    const auto outcome = step(env, rec.action);
    for (std::size_t i = 0; i < beliefs.size(); ++i) {
      const auto& task = env.tasks[i];
      try {
        beliefs[i] = belief_update(task, beliefs[i], rec.action.slot_for(i, task), outcome.observations[i]);
      } catch (const ImpossibleObservation& e) {
        throw ImpossibleObservation("step " + std::to_string(rec.step) + ": " + e.what());
      }
    }
    rec.observations = outcome.observations;
    rec.rewards = outcome.rewards;
    trace.steps.push_back(std::move(rec));
  }
  trace.total_reward = env.cumulative_reward;
  trace.all_tasks_done = env.all_tasks_done();
  return trace;
}

inline std::string action_label(const AgentAction& a, const std::vector<ClientPomdp>& tasks) {
  if (a.is_all_noop()) return kNoopLabel;
  return std::to_string(a.task) + ":" + tasks.at(a.task).actions().at(a.action);
}

}  // namespace mtpomdp
