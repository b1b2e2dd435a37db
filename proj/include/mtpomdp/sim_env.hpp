#pragma once

// Simulated execution: hidden-state sampling, observation sampling and reward
// accounting for N independent tasks, plus model generators used by tests and
// the CLI.

#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "pomdp.hpp"

namespace mtpomdp {

inline constexpr int kDefaultStepLimit = 50;

/// Absorbing zero-reward states: every slot keeps the state with probability
/// one and pays nothing there.
inline std::vector<std::size_t> absorbing_states(const ClientPomdp& pomdp) {
  std::vector<std::size_t> out;
  for (std::size_t s = 0; s < pomdp.num_states(); ++s) {
    bool absorbing = true;
    for (std::size_t slot = 0; slot < pomdp.num_slots() && absorbing; ++slot)
      absorbing = pomdp.transition(slot)(s, s) == 1.0 && pomdp.reward(slot)[s] == 0.0;
    if (absorbing) out.push_back(s);
  }
  return out;
}

struct EnvConfig {
  int step_limit = kDefaultStepLimit;
  /// Per-task terminal states; empty means absorbing_states() of each task.
  std::vector<std::vector<std::size_t>> terminal_states;
};

struct EnvState {
  std::vector<ClientPomdp> tasks;
  std::vector<std::vector<std::size_t>> terminal;
  std::vector<std::size_t> hidden;
  std::vector<std::mt19937_64> streams;  // one independent stream per task
  int step_count = 0;
  int step_limit = kDefaultStepLimit;
  double cumulative_reward = 0.0;  // discounted
  bool done = false;

  bool task_terminal(std::size_t i) const {
    for (auto s : terminal[i])
      if (s == hidden[i]) return true;
    return false;
  }

  bool all_tasks_done() const {
    for (std::size_t i = 0; i < tasks.size(); ++i)
      if (!task_terminal(i)) return false;
    return true;
  }
};

namespace detail {

inline std::mt19937_64 task_stream(std::uint64_t seed, std::size_t task) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(task), 0x6d74u};
  return std::mt19937_64(seq);
}

inline std::size_t sample_index(std::span<const double> probs, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double x = u(rng);
  double acc = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i] <= 0.0) continue;
    acc += probs[i];
    last_positive = i;
    if (x < acc) return i;
  }
  return last_positive;
}

}  // namespace detail

inline EnvState reset(const std::vector<ClientPomdp>& tasks, const std::vector<Belief>& initial, std::uint64_t seed,
                      const EnvConfig& config = {}) {
  if (initial.size() != tasks.size()) throw ModelError("reset: one initial belief per task required");
  EnvState st;
  st.tasks = tasks;
  st.step_limit = config.step_limit;
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    if (initial[i].size() != tasks[i].num_states()) throw ModelError("reset: belief dimension mismatch");
    st.streams.push_back(detail::task_stream(seed, i));
    st.hidden.push_back(detail::sample_index(initial[i].probs(), st.streams.back()));
    st.terminal.push_back(i < config.terminal_states.size() && !config.terminal_states[i].empty()
                              ? config.terminal_states[i]
                              : absorbing_states(tasks[i]));
  }
  st.done = st.all_tasks_done() || st.step_limit <= 0;
  return st;
}

struct StepOutcome {
  std::vector<std::size_t> observations;
  std::vector<double> rewards;
};

/// Advances every task: the acted task uses the chosen action, all others
/// no-op. Rewards are paid on the pre-transition state.
inline StepOutcome step(EnvState& st, const AgentAction& a) {
  if (st.done) throw UnsupportedConfiguration("step called on a finished environment");
  if (!a.is_all_noop() && (a.task >= st.tasks.size() || a.action >= st.tasks[a.task].num_actions()))
    throw ModelError("step: invalid agent action");
  StepOutcome out;
  const double weight = std::pow(st.tasks.front().discount(), st.step_count);
  double total = 0.0;
  for (std::size_t i = 0; i < st.tasks.size(); ++i) {
    const auto& task = st.tasks[i];
    const std::size_t slot = a.slot_for(i, task);
    const double r = task.reward(slot)[st.hidden[i]];
    const std::size_t next = detail::sample_index(task.transition(slot).row(st.hidden[i]), st.streams[i]);
    const std::size_t z = detail::sample_index(task.observation(slot).row(next), st.streams[i]);
    st.hidden[i] = next;
    out.rewards.push_back(r);
    out.observations.push_back(z);
    total += r;
  }
  st.cumulative_reward += weight * total;
  ++st.step_count;
  st.done = st.all_tasks_done() || st.step_count >= st.step_limit;
  return out;
}

// ---------------------------------------------------------------------------
// Generators
// ---------------------------------------------------------------------------

struct GeneratorConfig {
  std::size_t tasks = 2;
  std::size_t states = 2;
  std::size_t actions = 1;
  std::size_t observations = 2;
  std::uint64_t seed = 0;
  double reward_scale = 1.0;
  double discount = 1.0;
  bool identity_noop = false;     // no-op transition is the identity
  bool blind_noop = false;        // no-op observations carry no information
  bool zero_noop_reward = false;  // no-op pays nothing
};

struct Instance {
  std::vector<ClientPomdp> tasks;
  std::vector<Belief> beliefs;
};

/// Random models with rows drawn as normalized uniform variates and rewards
/// uniform in [0, reward_scale]. Deterministic per seed.
inline Instance generate_random_instance(const GeneratorConfig& cfg) {
  if (cfg.tasks == 0 || cfg.states == 0 || cfg.actions == 0 || cfg.observations == 0)
    throw ModelError("generator counts must be >= 1");
  std::mt19937_64 rng(cfg.seed * 0x9e3779b97f4a7c15ULL + 17);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto row = [&](std::size_t n) {
    std::vector<double> r(n);
    double sum = 0.0;
    for (auto& v : r) sum += (v = 1e-3 + unit(rng));
    for (auto& v : r) v /= sum;
    // Exact renormalization of the last entry keeps load-time sums at 1.
    double head = 0.0;
    for (std::size_t i = 0; i + 1 < n; ++i) head += r[i];
    r.back() = std::max(0.0, 1.0 - head);
    return r;
  };

  Instance inst;
  for (std::size_t t = 0; t < cfg.tasks; ++t) {
    RawClient raw;
    raw.name = "task" + std::to_string(t);
    for (std::size_t s = 0; s < cfg.states; ++s) raw.states.push_back("s" + std::to_string(s));
    for (std::size_t a = 0; a < cfg.actions; ++a) raw.actions.push_back("a" + std::to_string(a));
    for (std::size_t z = 0; z < cfg.observations; ++z) raw.observations.push_back("z" + std::to_string(z));
    auto labels = raw.actions;
    labels.emplace_back(kNoopLabel);
    for (const auto& a : labels) {
      const bool noop = a == kNoopLabel;
      auto& tr = raw.transitions[a];
      auto& ob = raw.observation_fn[a];
      auto& rw = raw.rewards[a];
      for (std::size_t s = 0; s < cfg.states; ++s) {
        if (noop && cfg.identity_noop) {
          std::vector<double> e(cfg.states, 0.0);
          e[s] = 1.0;
          tr.push_back(e);
        } else {
          tr.push_back(row(cfg.states));
        }
      }
      std::vector<double> blind_row = noop && cfg.blind_noop ? row(cfg.observations) : std::vector<double>{};
      for (std::size_t s = 0; s < cfg.states; ++s) ob.push_back(blind_row.empty() ? row(cfg.observations) : blind_row);
      for (std::size_t s = 0; s < cfg.states; ++s)
        rw.push_back(noop && cfg.zero_noop_reward ? 0.0 : cfg.reward_scale * unit(rng));
    }
    inst.tasks.push_back(validate_client(raw, t, cfg.discount));
    inst.beliefs.push_back(Belief::normalized(row(cfg.states)));
  }
  return inst;
}

/// Two-state task {P, D}: `work` moves P to D with probability `success` and
/// pays `reward` in P; D is absorbing with zero reward; the no-op leaves the
/// state unchanged. Observations report the state with probability
/// `accuracy` for every action.
inline ClientPomdp unit_task(std::size_t id, double reward = 1.0, double success = 1.0, double accuracy = 1.0,
                             double discount = 1.0, const std::string& name = "") {
  RawClient raw;
  raw.name = name.empty() ? "unit" + std::to_string(id) : name;
  raw.states = {"P", "D"};
  raw.actions = {"work"};
  raw.observations = {"obs_P", "obs_D"};
  raw.transitions["work"] = {{1.0 - success, success}, {0.0, 1.0}};
  raw.transitions[kNoopLabel] = {{1.0, 0.0}, {0.0, 1.0}};
  const std::vector<std::vector<double>> obs = {{accuracy, 1.0 - accuracy}, {1.0 - accuracy, accuracy}};
  raw.observation_fn["work"] = obs;
  raw.observation_fn[kNoopLabel] = obs;
  raw.rewards["work"] = {reward, 0.0};
  raw.rewards[kNoopLabel] = {0.0, 0.0};
  return validate_client(raw, id, discount);
}

}  // namespace mtpomdp
