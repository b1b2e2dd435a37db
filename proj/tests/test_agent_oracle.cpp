#include <gtest/gtest.h>

#include <mtpomdp/agent_oracle.hpp>
#include <mtpomdp/sim_env.hpp>

#include "support/models.hpp"
#include "support/oracles.hpp"

using namespace mtpomdp;

namespace {

constexpr double kTwoUnitH2 = 2.0;  // one task per step
constexpr double kTwoUnitH1 = 1.0;
constexpr double kTwoUnitH2Limited1 = 1.0;

AgentProblem two_units() {
  return {{unit_task(0), unit_task(1)}, {Belief::point(2, 0), Belief::point(2, 0)}, 1.0};
}

}  // namespace

TEST(ReferenceValues, HandEnumerationOfTwoUnitTasks) {
  oracle::AgentOracle o({unit_task(0), unit_task(1)}, 1.0);
  const std::vector<oracle::Vec> b{{1.0, 0.0}, {1.0, 0.0}};
  EXPECT_DOUBLE_EQ(o.value(b, 2), kTwoUnitH2);
  EXPECT_DOUBLE_EQ(o.value(b, 1), kTwoUnitH1);
  EXPECT_DOUBLE_EQ(o.value(b, 2, 1), kTwoUnitH2Limited1);
}

TEST(EnumerateActions, Counts) {
  const auto two = enumerate_actions(two_units());
  ASSERT_EQ(two.size(), 3u);
  EXPECT_TRUE(two[0].is_all_noop());
  EXPECT_EQ(two[1], (AgentAction{0, 0}));
  EXPECT_EQ(two[2], (AgentAction{1, 0}));

  GeneratorConfig g;
  g.tasks = 1;
  g.actions = 2;
  EXPECT_EQ(enumerate_actions({generate_random_instance(g).tasks, generate_random_instance(g).beliefs, 1.0}).size(),
            3u);
  g.tasks = 3;
  const auto inst = generate_random_instance(g);
  EXPECT_EQ(enumerate_actions({inst.tasks, inst.beliefs, 1.0}).size(), 7u);
}

TEST(SolveAgentFh, TwoUnitTasks) {
  const auto sol = solve_agent_fh(two_units(), 2);
  EXPECT_DOUBLE_EQ(sol.value, kTwoUnitH2);
  EXPECT_EQ(sol.best_action, (AgentAction{0, 0}));
  EXPECT_DOUBLE_EQ(sol.value_of({1, 0}), kTwoUnitH2);
  EXPECT_DOUBLE_EQ(sol.value_of(AgentAction::all_noop()), 1.0);
  EXPECT_DOUBLE_EQ(solve_agent_fh(two_units(), 1).value, kTwoUnitH1);
}

TEST(SolveAgentFh, DoneTaskHasNothingToGain) {
  AgentProblem p{{unit_task(0)}, {Belief::point(2, 1)}, 1.0};
  const auto sol = solve_agent_fh(p, 3);
  EXPECT_DOUBLE_EQ(sol.value, 0.0);
  EXPECT_DOUBLE_EQ(sol.value_of(AgentAction::all_noop()), 0.0);
}

TEST(SolveAgentFh, ValueTiesGoToImmediateReward) {
  // Working the finished task first and the pending one second is worth the
  // same as serving the pending task now; the planner must not postpone.
  AgentProblem p{{unit_task(0), unit_task(1)}, {Belief::point(2, 1), Belief::point(2, 0)}, 1.0};
  const auto sol = solve_agent_fh(p, 2);
  EXPECT_DOUBLE_EQ(sol.value_of({0, 0}), sol.value_of({1, 0}));
  EXPECT_EQ(sol.best_action, (AgentAction{1, 0}));
}

TEST(SolveAgentFh, BudgetReportsEstimate) {
  const auto f = models::family_instance(7);
  try {
    solve_agent_fh(f.problem(), 4, 3);
    FAIL() << "expected BudgetExceeded";
  } catch (const BudgetExceeded& e) {
    EXPECT_EQ(e.estimated_nodes(), estimate_agent_nodes(f.problem(), 4));
    EXPECT_NE(std::string(e.what()).find("estimated"), std::string::npos);
  }
}

TEST(SolveAgentFh, RejectsBadProblems) {
  EXPECT_THROW(solve_agent_fh(two_units(), 0), UnsupportedConfiguration);
  AgentProblem mixed{{unit_task(0), unit_task(1, 1.0, 1.0, 1.0, 0.9)}, {Belief::point(2, 0), Belief::point(2, 0)}, 1.0};
  EXPECT_THROW(solve_agent_fh(mixed, 2), ModelError);
}

TEST(EstimateNodes, GeometricSum) {
  // branching = 3 actions * 2 * 2 joint observations = 12
  EXPECT_EQ(estimate_agent_nodes(two_units(), 2), 1u + 12u + 144u);
}

TEST(BruteForceLimited, Cases) {
  EXPECT_DOUBLE_EQ(brute_force_limited(two_units(), 2, 2), kTwoUnitH2);
  EXPECT_DOUBLE_EQ(brute_force_limited(two_units(), 2, 1), kTwoUnitH2Limited1);
  EXPECT_THROW(brute_force_limited(two_units(), 2, 3), UnsupportedConfiguration);

  const auto f = models::family_instance(3);
  double idle = 0.0;
  for (std::size_t i = 0; i < f.tasks.size(); ++i) idle += oracle::noop_value(f.tasks[i], f.beliefs[i].probs(), f.horizon);
  EXPECT_NEAR(brute_force_limited(f.problem(), f.horizon, 0), idle, 1e-12);
}

TEST(JointBranches, ProductLikelihoods) {
  const auto p = two_units();
  const auto br = joint_branches(p.tasks, p.beliefs, {0, 0}, {0, 1});
  ASSERT_EQ(br.size(), 1u);
  EXPECT_DOUBLE_EQ(br[0].likelihood, 1.0);
  EXPECT_EQ(br[0].beliefs[0], Belief::point(2, 1));
  EXPECT_EQ(br[0].beliefs[1], Belief::point(2, 0));

  const std::vector<ClientPomdp> noisy{models::noisy_task(0), models::noisy_task(1)};
  const auto nb = joint_branches(noisy, p.beliefs, {0, 0}, {0, 1});
  double total = 0.0;
  for (const auto& b : nb) total += b.likelihood;
  EXPECT_EQ(nb.size(), 4u);
  EXPECT_NEAR(total, 1.0, 1e-12);
}

class OracleProperties : public ::testing::TestWithParam<std::uint64_t> {};

TEST_P(OracleProperties, MatchesIndependentExpectimax) {
  auto f = models::family_instance(GetParam());
  f.horizon = std::min(f.horizon, 3);
  if (estimate_agent_nodes(f.problem(), f.horizon) > 200'000) GTEST_SKIP() << "instance too large for a unit test";
  const auto sol = solve_agent_fh(f.problem(), f.horizon);
  oracle::AgentOracle o(f.tasks, 1.0);
  EXPECT_NEAR(sol.value, o.value(oracle::probs(f.beliefs), f.horizon), 1e-9);
  EXPECT_NEAR(sol.value_of(sol.best_action), sol.value, 1e-12);
  for (std::size_t k = 0; k <= f.tasks.size(); ++k)
    EXPECT_NEAR(brute_force_limited(f.problem(), f.horizon, k), o.value(oracle::probs(f.beliefs), f.horizon, k), 1e-9);
  const std::size_t full = std::min<std::size_t>(f.tasks.size(), static_cast<std::size_t>(f.horizon));
  EXPECT_NEAR(brute_force_limited(f.problem(), f.horizon, full), sol.value, 1e-9);
}

TEST_P(OracleProperties, SingleTaskEqualsClientSolver) {
  GeneratorConfig g;
  g.tasks = 1;
  g.states = 3;
  g.actions = 2;
  g.observations = 2;
  g.seed = GetParam();
  const auto inst = generate_random_instance(g);
  const auto sol = solve_agent_fh({inst.tasks, inst.beliefs, 1.0}, 3);
  EXPECT_NEAR(sol.value, solve_optimal(inst.tasks[0], inst.beliefs[0], Horizon::finite(3)).interval.lower, 1e-9);
}

TEST_P(OracleProperties, ZeroRewardTaskChangesNothing) {
  GeneratorConfig g;
  g.tasks = 2;
  g.states = 2;
  g.actions = 1;
  g.observations = 2;
  g.seed = GetParam();
  auto inst = generate_random_instance(g);
  const double base = solve_agent_fh({inst.tasks, inst.beliefs, 1.0}, 3).value;
  inst.tasks.push_back(models::zero_task(2));
  inst.beliefs.push_back(Belief::point(2, 0));
  EXPECT_NEAR(solve_agent_fh({inst.tasks, inst.beliefs, 1.0}, 3).value, base, 1e-9);
}

INSTANTIATE_TEST_SUITE_P(Seeds, OracleProperties, ::testing::Range<std::uint64_t>(0, 20));
