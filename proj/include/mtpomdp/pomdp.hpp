#pragma once

// Client POMDP model, beliefs, and the elementary filtering / reward
// computations shared by every solver.

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstddef>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"

namespace mtpomdp {

inline constexpr double kLoadTolerance = 1e-12;
inline constexpr double kBeliefTolerance = 1e-9;
inline constexpr const char* kNoopLabel = "noop";

namespace detail {

inline std::string fmt_num(double v) {
  std::ostringstream os;
  os.precision(12);
  os << v;
  return os.str();
}

}  // namespace detail

/// Argmax comparison with a relative tie band, so that reward scaling does not
/// reorder exact ties.
inline bool strictly_greater(double a, double b, double rel_tol = 1e-12) noexcept {
  if (!std::isfinite(b)) return a > b;
  return a > b + rel_tol * std::max(1.0, std::abs(b));
}

/// Dense row-major table.
class Table {
 public:
  Table() = default;
  Table(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }

  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }

  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }

  Table scaled(double factor) const {
    Table out = *this;
    for (auto& v : out.data_) v *= factor;
    return out;
  }

  bool operator==(const Table&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Unvalidated model description, as read from a domain file or built by a
/// generator. Tables are keyed by action label; the "noop" key is mandatory.
struct RawClient {
  std::string name;
  std::vector<std::string> states;
  std::vector<std::string> actions;
  std::vector<std::string> observations;
  std::map<std::string, std::vector<std::vector<double>>> transitions;
  std::map<std::string, std::vector<std::vector<double>>> observation_fn;
  std::map<std::string, std::vector<double>> rewards;
};

/// One task's model. Actions are addressed by slot: slots 0..|A|-1 are the
/// user actions in declaration order and slot |A| is the implicit no-op.
class ClientPomdp {
 public:
  std::size_t id() const noexcept { return id_; }
  const std::string& name() const noexcept { return name_; }
  const std::vector<std::string>& states() const noexcept { return states_; }
  const std::vector<std::string>& actions() const noexcept { return actions_; }
  const std::vector<std::string>& observations() const noexcept { return observations_; }

  std::size_t num_states() const noexcept { return states_.size(); }
  std::size_t num_actions() const noexcept { return actions_.size(); }
  std::size_t num_observations() const noexcept { return observations_.size(); }
  std::size_t num_slots() const noexcept { return actions_.size() + 1; }
  std::size_t noop() const noexcept { return actions_.size(); }

  /// T[slot](s, s')
  const Table& transition(std::size_t slot) const { return transition_.at(slot); }
  /// O[slot](s', z)
  const Table& observation(std::size_t slot) const { return observation_.at(slot); }
  /// R[slot][s]
  std::span<const double> reward(std::size_t slot) const { return reward_.at(slot); }

  double discount() const noexcept { return discount_; }
  double reward_bound() const noexcept { return reward_bound_; }

  std::string slot_label(std::size_t slot) const {
    return slot == noop() ? std::string(kNoopLabel) : actions_.at(slot);
  }

  std::size_t slot_of(const std::string& label) const {
    if (label == kNoopLabel) return noop();
    auto it = std::find(actions_.begin(), actions_.end(), label);
    if (it == actions_.end())
      throw ModelError("task '" + name_ + "': unknown action '" + label + "'");
    return static_cast<std::size_t>(it - actions_.begin());
  }

  std::size_t observation_of(const std::string& label) const {
    auto it = std::find(observations_.begin(), observations_.end(), label);
    if (it == observations_.end())
      throw ModelError("task '" + name_ + "': unknown observation '" + label + "'");
    return static_cast<std::size_t>(it - observations_.begin());
  }

  /// Copy with a different task index.
  ClientPomdp with_id(std::size_t id) const {
    ClientPomdp out = *this;
    out.id_ = id;
    return out;
  }

  /// Copy with every reward multiplied by `factor` (> 0).
  ClientPomdp with_scaled_rewards(double factor) const {
    ClientPomdp out = *this;
    for (auto& row : out.reward_)
      for (auto& r : row) r *= factor;
    out.reward_bound_ *= std::abs(factor);
    return out;
  }

  RawClient to_raw() const;

  friend ClientPomdp validate_client(const RawClient& raw, std::size_t id, double discount);

 private:
  std::size_t id_ = 0;
  std::string name_;
  std::vector<std::string> states_;
  std::vector<std::string> actions_;
  std::vector<std::string> observations_;
  std::vector<Table> transition_;
  std::vector<Table> observation_;
  std::vector<std::vector<double>> reward_;
  double discount_ = 1.0;
  double reward_bound_ = 0.0;
};

/// Checks dimensions and stochasticity and builds the immutable model.
/// Errors name the offending table, action and row.
inline ClientPomdp validate_client(const RawClient& raw, std::size_t id, double discount) {
  const std::string who = "task " + std::to_string(id) + " ('" + raw.name + "')";
  auto fail = [&](const std::string& msg) -> void { throw ModelError(who + ": " + msg); };

  if (!(discount >= 0.0 && discount <= 1.0)) fail("discount " + detail::fmt_num(discount) + " outside [0,1]");
  if (raw.states.empty()) fail("empty state list");
  if (raw.observations.empty()) fail("empty observation list");
  for (const auto& a : raw.actions)
    if (a == kNoopLabel) fail("action label 'noop' is reserved");
  {
    auto sorted = raw.actions;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) fail("duplicate action label");
  }

  ClientPomdp out;
  out.id_ = id;
  out.name_ = raw.name;
  out.states_ = raw.states;
  out.actions_ = raw.actions;
  out.observations_ = raw.observations;
  out.discount_ = discount;

  const std::size_t ns = raw.states.size();
  const std::size_t nz = raw.observations.size();
  std::vector<std::string> slots = raw.actions;
  slots.emplace_back(kNoopLabel);

  auto load_matrix = [&](const std::map<std::string, std::vector<std::vector<double>>>& tables,
                         const std::string& table_name, const std::string& action, std::size_t cols,
                         const std::vector<std::string>& row_labels) {
    auto it = tables.find(action);
    if (it == tables.end()) fail(table_name + " missing for action '" + action + "'");
    const auto& m = it->second;
    if (m.size() != ns)
      fail(table_name + " for action '" + action + "' has " + std::to_string(m.size()) + " rows, expected " +
           std::to_string(ns));
    Table t(ns, cols);
    for (std::size_t r = 0; r < ns; ++r) {
      if (m[r].size() != cols)
        fail(table_name + " row " + action + "[" + row_labels[r] + "] has " + std::to_string(m[r].size()) +
             " entries, expected " + std::to_string(cols));
      double sum = 0.0;
      for (std::size_t c = 0; c < cols; ++c) {
        const double v = m[r][c];
        if (!std::isfinite(v) || v < 0.0)
          fail(table_name + " row has negative or non-finite probability " + detail::fmt_num(v) + " at " + action +
               "[" + row_labels[r] + "][" + std::to_string(c) + "]");
        t(r, c) = v;
        sum += v;
      }
      if (std::abs(sum - 1.0) > kLoadTolerance)
        fail(table_name + " row sums to " + detail::fmt_num(sum) + " at " + action + "[" + row_labels[r] + "]");
    }
    return t;
  };

  for (const auto& a : slots) {
    out.transition_.push_back(load_matrix(raw.transitions, "transition", a, ns, raw.states));
    out.observation_.push_back(load_matrix(raw.observation_fn, "observation", a, nz, raw.states));
    auto it = raw.rewards.find(a);
    std::vector<double> r;
    if (it == raw.rewards.end()) {
      if (a != kNoopLabel) fail("reward missing for action '" + a + "'");
      r.assign(ns, 0.0);
    } else {
      r = it->second;
    }
    if (r.size() != ns)
      fail("reward vector for action '" + a + "' has " + std::to_string(r.size()) + " entries, expected " +
           std::to_string(ns));
    for (double v : r) {
      if (!std::isfinite(v)) fail("reward for action '" + a + "' is not finite");
      out.reward_bound_ = std::max(out.reward_bound_, std::abs(v));
    }
    out.reward_.push_back(std::move(r));
  }
  for (const auto& [key, _] : raw.transitions)
    if (std::find(slots.begin(), slots.end(), key) == slots.end()) fail("transition given for unknown action '" + key + "'");
  return out;
}

inline RawClient ClientPomdp::to_raw() const {
  RawClient raw;
  raw.name = name_;
  raw.states = states_;
  raw.actions = actions_;
  raw.observations = observations_;
  for (std::size_t slot = 0; slot < num_slots(); ++slot) {
    const auto label = slot_label(slot);
    auto& t = raw.transitions[label];
    auto& o = raw.observation_fn[label];
    for (std::size_t s = 0; s < num_states(); ++s) {
      auto tr = transition_[slot].row(s);
      auto orow = observation_[slot].row(s);
      t.emplace_back(tr.begin(), tr.end());
      o.emplace_back(orow.begin(), orow.end());
    }
    raw.rewards[label] = reward_[slot];
  }
  return raw;
}

/// Probability vector over one task's states.
class Belief {
 public:
  Belief() = default;

  /// Validating constructor: entries >= 0 and summing to 1 within 1e-9.
  explicit Belief(std::vector<double> probs) : probs_(std::move(probs)) {
    if (probs_.empty()) throw ModelError("belief is empty");
    double sum = 0.0;
    for (double p : probs_) {
      if (!std::isfinite(p) || p < 0.0) throw ModelError("belief has negative or non-finite entry " + detail::fmt_num(p));
      sum += p;
    }
    if (std::abs(sum - 1.0) > kBeliefTolerance) throw ModelError("belief sums to " + detail::fmt_num(sum));
  }

  /// Normalizes a nonnegative weight vector with positive mass.
  static Belief normalized(std::vector<double> weights) {
    const double sum = std::accumulate(weights.begin(), weights.end(), 0.0);
    for (auto& w : weights) w /= sum;
    Belief b;
    b.probs_ = std::move(weights);
    return b;
  }

  static Belief point(std::size_t n, std::size_t state) {
    std::vector<double> p(n, 0.0);
    p.at(state) = 1.0;
    Belief b;
    b.probs_ = std::move(p);
    return b;
  }

  static Belief uniform(std::size_t n) { return normalized(std::vector<double>(n, 1.0)); }

  std::size_t size() const noexcept { return probs_.size(); }
  double operator[](std::size_t i) const { return probs_[i]; }
  const std::vector<double>& probs() const noexcept { return probs_; }

  bool operator==(const Belief&) const = default;

 private:
  std::vector<double> probs_;
};

/// A joint action: one task receives a non-no-op action, or none does.
/// The defaulted ordering is (task, action) with the all-noop vector last.
struct AgentAction {
  static constexpr std::size_t kAllNoop = std::numeric_limits<std::size_t>::max();

  std::size_t task = kAllNoop;
  std::size_t action = 0;

  static constexpr AgentAction all_noop() noexcept { return {}; }
  constexpr bool is_all_noop() const noexcept { return task == kAllNoop; }

  /// Action slot applied to `task_index` under this joint action.
  std::size_t slot_for(std::size_t task_index, const ClientPomdp& pomdp) const {
    return task == task_index ? action : pomdp.noop();
  }

  auto operator<=>(const AgentAction&) const = default;
};

/// [lower, upper] bracket on a value.
struct ValueInterval {
  double lower = 0.0;
  double upper = 0.0;

  static constexpr ValueInterval exact(double v) noexcept { return {v, v}; }

  double width() const noexcept { return upper - lower; }
  bool is_valid(double tol = kBeliefTolerance) const noexcept { return lower <= upper + tol; }
  bool contains(double v, double tol = kBeliefTolerance) const noexcept {
    return lower - tol <= v && v <= upper + tol;
  }

  ValueInterval& operator+=(const ValueInterval& o) noexcept {
    lower += o.lower;
    upper += o.upper;
    return *this;
  }
  friend ValueInterval operator+(ValueInterval a, const ValueInterval& b) noexcept { return a += b; }
  friend ValueInterval operator+(ValueInterval a, double c) noexcept { return {a.lower + c, a.upper + c}; }
  friend ValueInterval operator*(double c, ValueInterval a) noexcept { return {c * a.lower, c * a.upper}; }

  bool operator==(const ValueInterval&) const = default;
};

/// Finite step count (possibly 0 when used as a remaining horizon) or
/// infinite with a convergence tolerance for client values.
struct Horizon {
  std::optional<int> steps;
  double epsilon = 1e-6;

  static Horizon finite(int h) { return Horizon{h, 1e-6}; }
  static Horizon infinite(double eps = 1e-6) { return Horizon{std::nullopt, eps}; }

  bool is_finite() const noexcept { return steps.has_value(); }
  int value() const { return steps.value(); }

  /// Horizon left after `depth` steps have been consumed.
  Horizon after(int depth) const {
    if (!is_finite()) return *this;
    return Horizon{*steps - depth, epsilon};
  }

  /// Checks a planning horizon against a discount.
  void validate(double gamma) const {
    if (is_finite()) {
      if (*steps < 1) throw UnsupportedConfiguration("finite horizon must be >= 1");
    } else {
      if (!(gamma >= 0.0 && gamma < 1.0))
        throw UnsupportedConfiguration("infinite horizon requires discount in [0,1), got " + detail::fmt_num(gamma));
      if (!(epsilon > 0.0)) throw UnsupportedConfiguration("infinite horizon requires epsilon > 0");
    }
  }

  bool operator==(const Horizon&) const = default;
};

// ---------------------------------------------------------------------------
// Filtering and rewards
// ---------------------------------------------------------------------------

/// One-step prediction b * T[slot].
inline std::vector<double> predict(const ClientPomdp& pomdp, std::span<const double> b, std::size_t slot) {
  const Table& t = pomdp.transition(slot);
  const std::size_t n = pomdp.num_states();
  std::vector<double> out(n, 0.0);
  for (std::size_t s = 0; s < n; ++s) {
    const double w = b[s];
    if (w == 0.0) continue;
    for (std::size_t s2 = 0; s2 < n; ++s2) out[s2] += w * t(s, s2);
  }
  return out;
}

/// Pr(z | b, a) given an already predicted state distribution.
inline double likelihood_from_predicted(const ClientPomdp& pomdp, std::span<const double> predicted,
                                        std::size_t slot, std::size_t z) {
  const Table& o = pomdp.observation(slot);
  double p = 0.0;
  for (std::size_t s2 = 0; s2 < predicted.size(); ++s2) p += o(s2, z) * predicted[s2];
  return p;
}

inline double observation_likelihood(const ClientPomdp& pomdp, const Belief& b, std::size_t slot, std::size_t z) {
  const auto predicted = predict(pomdp, b.probs(), slot);
  return likelihood_from_predicted(pomdp, predicted, slot, z);
}

inline double observation_likelihood(const ClientPomdp& pomdp, const Belief& b, const std::string& action,
                                     const std::string& observation) {
  return observation_likelihood(pomdp, b, pomdp.slot_of(action), pomdp.observation_of(observation));
}

/// Posterior b'(s') proportional to O[a](s',z) * sum_s T[a](s,s') b(s).
inline Belief belief_update(const ClientPomdp& pomdp, const Belief& b, std::size_t slot, std::size_t z) {
  const auto predicted = predict(pomdp, b.probs(), slot);
  const Table& o = pomdp.observation(slot);
  std::vector<double> w(predicted.size());
  double total = 0.0;
  for (std::size_t s2 = 0; s2 < w.size(); ++s2) {
    w[s2] = o(s2, z) * predicted[s2];
    total += w[s2];
  }
  if (!(total > 0.0))
    throw ImpossibleObservation("impossible observation '" + pomdp.observations().at(z) + "' for task " +
                                std::to_string(pomdp.id()) + " after action '" + pomdp.slot_label(slot) + "'");
  return Belief::normalized(std::move(w));
}

inline Belief belief_update(const ClientPomdp& pomdp, const Belief& b, const std::string& action,
                            const std::string& observation) {
  return belief_update(pomdp, b, pomdp.slot_of(action), pomdp.observation_of(observation));
}

/// Observation-marginalized prediction through `steps` no-op transitions.
inline Belief belief_predict_noop(const ClientPomdp& pomdp, const Belief& b, int steps = 1) {
  std::vector<double> cur = b.probs();
  for (int i = 0; i < steps; ++i) cur = predict(pomdp, cur, pomdp.noop());
  return Belief::normalized(std::move(cur));
}

inline double expected_reward(const ClientPomdp& pomdp, const Belief& b, std::size_t slot) {
  const auto r = pomdp.reward(slot);
  double v = 0.0;
  for (std::size_t s = 0; s < b.size(); ++s) v += b[s] * r[s];
  return v;
}

inline double expected_reward(const ClientPomdp& pomdp, const Belief& b, const std::string& action) {
  return expected_reward(pomdp, b, pomdp.slot_of(action));
}

/// Positive-likelihood observation outcome of (b, a).
struct ObservationBranch {
  std::size_t observation;
  double likelihood;
  Belief posterior;
};

/// All observations of (b, a) with positive likelihood and their posteriors,
/// in observation order.
inline std::vector<ObservationBranch> observation_branches(const ClientPomdp& pomdp, const Belief& b,
                                                           std::size_t slot) {
  const auto predicted = predict(pomdp, b.probs(), slot);
  const Table& o = pomdp.observation(slot);
  const std::size_t n = predicted.size();
  std::vector<ObservationBranch> out;
  out.reserve(pomdp.num_observations());
  for (std::size_t z = 0; z < pomdp.num_observations(); ++z) {
    std::vector<double> w(n);
    double total = 0.0;
    for (std::size_t s2 = 0; s2 < n; ++s2) {
      w[s2] = o(s2, z) * predicted[s2];
      total += w[s2];
    }
    if (!(total > 0.0)) continue;
    out.push_back({z, total, Belief::normalized(std::move(w))});
  }
  return out;
}

}  // namespace mtpomdp
