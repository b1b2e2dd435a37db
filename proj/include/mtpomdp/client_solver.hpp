#pragma once

// Values of single client POMDPs: the optimal value V* by exhaustive
// belief-tree expectimax and the open-loop no-op trajectory value V^n.
// Infinite-horizon values are depth-truncated and returned as intervals
// widened by the discounted tail bound.

#include <atomic>
#include <bit>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <unordered_map>
#include <vector>

#include "pomdp.hpp"

namespace mtpomdp {

inline constexpr std::uint64_t kDefaultNodeBudget = 5'000'000;

struct ClientValue {
  ValueInterval interval;
  std::optional<std::size_t> best_first_action;  // slot; optimal values only
};

/// Depth d at which gamma^d * rmax / (1 - gamma) <= epsilon / 2, at least 1.
inline int tail_depth(double gamma, double reward_bound, double epsilon) {
  if (reward_bound <= 0.0 || gamma <= 0.0) return 1;
  const double d = std::ceil(std::log(epsilon * (1.0 - gamma) / (2.0 * reward_bound)) / std::log(gamma));
  if (!(d >= 1.0)) return 1;
  return static_cast<int>(d);
}

inline double tail_bound(double gamma, double reward_bound, int depth) {
  return std::pow(gamma, depth) * reward_bound / (1.0 - gamma);
}

namespace detail {

inline void require_supported(const ClientPomdp& pomdp, const Horizon& remaining) {
  if (remaining.is_finite()) {
    if (remaining.value() < 0) throw UnsupportedConfiguration("negative remaining horizon");
    return;
  }
  if (!(pomdp.discount() < 1.0))
    throw UnsupportedConfiguration("infinite horizon requires discount < 1 (task " + std::to_string(pomdp.id()) + ")");
  if (!(remaining.epsilon > 0.0)) throw UnsupportedConfiguration("infinite horizon requires epsilon > 0");
}

struct BitsHash {
  std::size_t operator()(const std::vector<std::uint64_t>& v) const noexcept {
    std::uint64_t h = 1469598103934665603ULL;
    for (auto x : v) {
      h ^= x + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
      h *= 1099511628211ULL;
    }
    return static_cast<std::size_t>(h);
  }
};

/// Exhaustive expectimax over one task's own actions (no-op included).
class ClientExpectimax {
 public:
  ClientExpectimax(const ClientPomdp& pomdp, std::uint64_t node_budget) : pomdp_(pomdp), budget_(node_budget) {}

  std::pair<double, std::size_t> solve(const Belief& b, int depth) {
    memo_.assign(static_cast<std::size_t>(depth) + 1, {});
    return value(b, depth);
  }

  std::uint64_t nodes() const noexcept { return nodes_; }

 private:
  std::pair<double, std::size_t> value(const Belief& b, int depth) {
    if (depth == 0) return {0.0, pomdp_.noop()};
    std::vector<std::uint64_t> key(b.size());
    for (std::size_t i = 0; i < b.size(); ++i) key[i] = std::bit_cast<std::uint64_t>(b[i]);
    auto& table = memo_[static_cast<std::size_t>(depth)];
    if (auto it = table.find(key); it != table.end()) return it->second;

    if (++nodes_ > budget_)
      throw BudgetExceeded("client solver node budget of " + std::to_string(budget_) + " exceeded", nodes_);

    const double gamma = pomdp_.discount();
    double best = -std::numeric_limits<double>::infinity();
    std::size_t best_slot = pomdp_.noop();
    for (std::size_t slot = 0; slot < pomdp_.num_slots(); ++slot) {
      double q = expected_reward(pomdp_, b, slot);
      if (depth > 1 && gamma > 0.0) {
        double future = 0.0;
        for (const auto& br : observation_branches(pomdp_, b, slot))
          future += br.likelihood * value(br.posterior, depth - 1).first;
        q += gamma * future;
      }
      if (strictly_greater(q, best)) {
        best = q;
        best_slot = slot;
      }
    }
    table.emplace(std::move(key), std::pair{best, best_slot});
    return {best, best_slot};
  }

  const ClientPomdp& pomdp_;
  std::uint64_t budget_;
  std::uint64_t nodes_ = 0;
  std::vector<std::unordered_map<std::vector<std::uint64_t>, std::pair<double, std::size_t>, BitsHash>> memo_;
};

}  // namespace detail

/// Optimal value of a single task from belief `b`. Finite horizons give the
/// exact value (zero-width interval, zero terminal value); infinite horizons
/// give [V_d - tail, V_d + tail].
inline ClientValue solve_optimal(const ClientPomdp& pomdp, const Belief& b, const Horizon& remaining,
                                 std::uint64_t node_budget = kDefaultNodeBudget) {
  detail::require_supported(pomdp, remaining);
  detail::ClientExpectimax search(pomdp, node_budget);
  if (remaining.is_finite()) {
    if (remaining.value() == 0) return {ValueInterval::exact(0.0), pomdp.noop()};
    auto [v, slot] = search.solve(b, remaining.value());
    return {ValueInterval::exact(v), slot};
  }
  const int d = tail_depth(pomdp.discount(), pomdp.reward_bound(), remaining.epsilon);
  const double tail = tail_bound(pomdp.discount(), pomdp.reward_bound(), d);
  auto [v, slot] = search.solve(b, d);
  return {{v - tail, v + tail}, slot};
}

/// Value of the open-loop all-no-op trajectory: the task follows its hidden
/// Markov chain and no observation branching is needed.
inline ClientValue noop_value(const ClientPomdp& pomdp, const Belief& b, const Horizon& remaining) {
  detail::require_supported(pomdp, remaining);
  const int steps = remaining.is_finite() ? remaining.value()
                                          : tail_depth(pomdp.discount(), pomdp.reward_bound(), remaining.epsilon);
  const auto r = pomdp.reward(pomdp.noop());
  std::vector<double> cur = b.probs();
  double total = 0.0;
  double weight = 1.0;
  for (int t = 0; t < steps; ++t) {
    double step = 0.0;
    for (std::size_t s = 0; s < cur.size(); ++s) step += cur[s] * r[s];
    total += weight * step;
    weight *= pomdp.discount();
    if (t + 1 < steps) cur = predict(pomdp, cur, pomdp.noop());
  }
  if (remaining.is_finite()) return {ValueInterval::exact(total), std::nullopt};
  const double tail = tail_bound(pomdp.discount(), pomdp.reward_bound(), steps);
  return {{total - tail, total + tail}, std::nullopt};
}

// ---------------------------------------------------------------------------
// Cache
// ---------------------------------------------------------------------------

enum class PolicyKind : std::uint8_t { optimal, noop };

/// Cache key: the belief is quantized to 9 decimals (round half to even).
struct SolutionKey {
  static constexpr std::int64_t kInfinite = -1;

  std::size_t task = 0;
  std::vector<std::int64_t> belief_digest;
  std::int64_t remaining = 0;
  PolicyKind kind = PolicyKind::optimal;

  static SolutionKey make(std::size_t task, const Belief& b, const Horizon& remaining, PolicyKind kind) {
    SolutionKey key;
    key.task = task;
    key.belief_digest = quantize(b);
    key.remaining = remaining.is_finite() ? remaining.value() : kInfinite;
    key.kind = kind;
    return key;
  }

  static std::vector<std::int64_t> quantize(const Belief& b) {
    std::vector<std::int64_t> out(b.size());
    // nearbyint honours the default round-to-nearest-even mode.
    for (std::size_t i = 0; i < b.size(); ++i) out[i] = static_cast<std::int64_t>(std::nearbyint(b[i] * 1e9));
    return out;
  }

  bool operator==(const SolutionKey&) const = default;
};

struct SolutionKeyHash {
  std::size_t operator()(const SolutionKey& k) const noexcept {
    std::uint64_t h = 1469598103934665603ULL;
    auto mix = [&h](std::uint64_t x) {
      h ^= x;
      h *= 1099511628211ULL;
    };
    mix(k.task);
    mix(static_cast<std::uint64_t>(k.remaining));
    mix(static_cast<std::uint64_t>(k.kind));
    for (auto q : k.belief_digest) mix(static_cast<std::uint64_t>(q));
    return static_cast<std::size_t>(h);
  }
};

struct CacheStats {
  std::uint64_t hits = 0;
  std::uint64_t misses = 0;
  std::uint64_t entries = 0;
  std::uint64_t computations = 0;
};

/// Thread-safe get-or-compute store. Each key is computed at most once; a
/// computation that throws leaves the key empty for a later retry.
class SolutionCache {
 public:
  template <class Compute>
  ClientValue get_or_compute(const SolutionKey& key, Compute&& compute) {
    std::shared_ptr<Entry> entry;
    {
      std::lock_guard lock(mutex_);
      auto [it, inserted] = entries_.try_emplace(key, nullptr);
      if (inserted) it->second = std::make_shared<Entry>();
      entry = it->second;
    }
    bool computed_here = false;
    std::call_once(entry->once, [&] {
      entry->value = std::forward<Compute>(compute)();
      computed_here = true;
      computations_.fetch_add(1, std::memory_order_relaxed);
    });
    (computed_here ? misses_ : hits_).fetch_add(1, std::memory_order_relaxed);
    return entry->value;
  }

  CacheStats stats() const {
    CacheStats s;
    s.hits = hits_.load();
    s.misses = misses_.load();
    s.computations = computations_.load();
    std::lock_guard lock(mutex_);
    s.entries = entries_.size();
    return s;
  }

  void clear() {
    std::lock_guard lock(mutex_);
    entries_.clear();
  }

 private:
  struct Entry {
    std::once_flag once;
    ClientValue value;
  };

  mutable std::mutex mutex_;
  std::unordered_map<SolutionKey, std::shared_ptr<Entry>, SolutionKeyHash> entries_;
  std::atomic<std::uint64_t> hits_{0};
  std::atomic<std::uint64_t> misses_{0};
  std::atomic<std::uint64_t> computations_{0};
};

/// Cached client values for a fixed list of tasks. One instance should be
/// kept per problem: keys carry only the task index.
class ClientSolver {
 public:
  explicit ClientSolver(std::vector<ClientPomdp> tasks, std::uint64_t node_budget = kDefaultNodeBudget)
      : tasks_(std::move(tasks)), node_budget_(node_budget), cache_(std::make_shared<SolutionCache>()) {}

  const std::vector<ClientPomdp>& tasks() const noexcept { return tasks_; }
  const ClientPomdp& task(std::size_t i) const { return tasks_.at(i); }

  ClientValue optimal(std::size_t task, const Belief& b, const Horizon& remaining) const {
    return cache_->get_or_compute(SolutionKey::make(task, b, remaining, PolicyKind::optimal),
                                  [&] { return solve_optimal(tasks_.at(task), b, remaining, node_budget_); });
  }

  ClientValue noop(std::size_t task, const Belief& b, const Horizon& remaining) const {
    return cache_->get_or_compute(SolutionKey::make(task, b, remaining, PolicyKind::noop),
                                  [&] { return noop_value(tasks_.at(task), b, remaining); });
  }

  CacheStats stats() const { return cache_->stats(); }
  SolutionCache& cache() const { return *cache_; }

 private:
  std::vector<ClientPomdp> tasks_;
  std::uint64_t node_budget_;
  std::shared_ptr<SolutionCache> cache_;
};

}  // namespace mtpomdp
