#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace mtpomdp {

/// Malformed model description: bad dimensions, rows that are not
/// distributions, reserved labels.
class ModelError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Bayes update requested for an observation with zero likelihood.
class ImpossibleObservation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Configuration the solvers cannot honor (e.g. infinite horizon with gamma = 1).
class UnsupportedConfiguration : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A tree search hit its node budget.
class BudgetExceeded : public std::runtime_error {
 public:
  BudgetExceeded(const std::string& what, std::uint64_t estimated_nodes)
      : std::runtime_error(what), estimated_nodes_(estimated_nodes) {}

  std::uint64_t estimated_nodes() const noexcept { return estimated_nodes_; }

 private:
  std::uint64_t estimated_nodes_;
};

/// A planning deadline passed inside a search; callers holding a completed
/// iteration fall back to it.
class DeadlineReached : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace mtpomdp
