// Plans one episode over three unit tasks and prints each step.
#include <cstdio>

#include <mtpomdp/mtpomdp.hpp>

int main() {
  using namespace mtpomdp;
  const std::vector<ClientPomdp> tasks{unit_task(0, 1.0, 0.9, 0.9, 1.0, "email"),
                                       unit_task(1, 2.0, 0.6, 0.8, 1.0, "report"),
                                       unit_task(2, 0.5, 1.0, 1.0, 1.0, "backup")};
  const std::vector<Belief> beliefs(tasks.size(), Belief::point(2, 0));

  PlannerOptions opts;
  opts.mode = PlannerMode::multitask_ah;
  opts.horizon = Horizon::finite(4);
  const Planner planner(tasks, opts);

  EnvConfig env;
  env.step_limit = 12;
  const auto trace = plan_episode(planner, beliefs, 7, env);
  for (const auto& s : trace.steps)
    std::printf("step %d  %-10s  value in [%.4f, %.4f]  h=%d  nodes=%llu\n", s.step,
                action_label(s.action, tasks).c_str(), s.report.global.lower, s.report.global.upper,
                s.report.h_final, static_cast<unsigned long long>(s.report.nodes));
  std::printf("total reward %.2f, all tasks done: %s\n", trace.total_reward, trace.all_tasks_done ? "yes" : "no");
}
