// mtplan: run the multi-task planners on a domain file, compare planner
// variants, or check multitask-ah against the exhaustive oracle.
//
// Exit codes: 0 success, 1 usage or config error, 2 property violation,
// 3 node budget exceeded.

#include <CLI11.hpp>

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <mtpomdp/mtpomdp.hpp>

namespace {

using namespace mtpomdp;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitViolation = 2;
constexpr int kExitBudget = 3;
constexpr const char* kOutDirEnv = "MTPLAN_OUT_DIR";

struct RunConfig {
  std::string domain;
  std::string mode = "multitask-ah";
  int h0 = 1;
  std::string horizon;  // empty: take the domain's value
  std::optional<double> gamma;
  double eps_gap = 1e-6;
  std::string capacity;
  std::uint64_t seed = 0;
  int episodes = 1;
  int step_limit = kDefaultStepLimit;
  std::uint64_t node_budget = kDefaultNodeBudget;
  std::optional<long> timeout_ms;
  std::string out;
  bool pretty = false;
};

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

CapacityFn parse_capacity(const std::string& text) {
  if (text.empty()) return CapacityFn::universal();
  std::map<int, std::size_t> table;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto colon = item.find(':');
    if (colon == std::string::npos) throw UsageError("--capacity: expected entries of the form h:k, got '" + item + "'");
    try {
      table[std::stoi(item.substr(0, colon))] = static_cast<std::size_t>(std::stoul(item.substr(colon + 1)));
    } catch (const std::exception&) {
      throw UsageError("--capacity: cannot parse '" + item + "'");
    }
  }
  return CapacityFn::table(std::move(table));
}

Horizon parse_horizon(const std::string& text, double epsilon) {
  if (text == "infinite") return Horizon::infinite(epsilon);
  try {
    std::size_t used = 0;
    const int h = std::stoi(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return Horizon{h, epsilon};
  } catch (const std::exception&) {
    throw UsageError("--horizon: expected a positive integer or 'infinite', got '" + text + "'");
  }
}

/// Domain with command-line overrides for the discount and the horizon.
Domain load_configured(const RunConfig& cfg) {
  Domain d = load_domain(cfg.domain);
  if (cfg.gamma) {
    d.discount = *cfg.gamma;
    for (auto& t : d.tasks) t = validate_client(t.to_raw(), t.id(), d.discount);
  }
  if (!cfg.horizon.empty()) d.horizon = parse_horizon(cfg.horizon, d.horizon.epsilon);
  d.horizon.validate(d.discount);
  return d;
}

PlannerOptions planner_options(const RunConfig& cfg, const Domain& d, PlannerMode mode) {
  PlannerOptions o;
  o.mode = mode;
  o.h0 = cfg.h0;
  o.horizon = d.horizon;
  o.eps_gap = cfg.eps_gap;
  o.capacity = parse_capacity(cfg.capacity);
  o.node_budget = cfg.node_budget;
  if (cfg.timeout_ms) {
    if (*cfg.timeout_ms <= 0) throw UsageError("--timeout-ms must be positive");
    o.timeout = std::chrono::milliseconds(*cfg.timeout_ms);
  }
  return o;
}

/// Output sink: --out, else $MTPLAN_OUT_DIR/<default_name>, else stdout.
class Sink {
 public:
  Sink(const std::string& out, const std::string& default_name) {
    std::string path = out;
    if (path.empty()) {
      if (const char* dir = std::getenv(kOutDirEnv); dir && *dir) {
        std::filesystem::create_directories(dir);
        path = (std::filesystem::path(dir) / default_name).string();
      }
    }
    if (!path.empty()) {
      file_ = std::make_unique<std::ofstream>(path);
      if (!*file_) throw UsageError("cannot open output file " + path);
    }
  }
  std::ostream& stream() { return file_ ? *file_ : std::cout; }

 private:
  std::unique_ptr<std::ofstream> file_;
};

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string hex(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

struct EpisodeSummary {
  double total_reward = 0.0;
  std::uint64_t nodes = 0;
  std::size_t tuples_pruned = 0;
  double wall_ms = 0.0;
  std::size_t steps = 0;
  bool all_tasks_done = false;
  std::string action_hash;
};

EpisodeSummary summarize(const EpisodeTrace& trace, const std::vector<ClientPomdp>& tasks) {
  EpisodeSummary s;
  std::string actions;
  for (const auto& st : trace.steps) {
    s.nodes += st.report.nodes;
    s.tuples_pruned += st.report.tuples_pruned;
    s.wall_ms += st.report.wall_ms;
    actions += action_label(st.action, tasks) + ";";
  }
  s.total_reward = trace.total_reward;
  s.steps = trace.steps.size();
  s.all_tasks_done = trace.all_tasks_done;
  s.action_hash = hex(fnv1a(actions));
  return s;
}

int cmd_plan(const RunConfig& cfg) {
  if (cfg.episodes < 1) throw UsageError("--episodes must be >= 1");
  const Domain d = load_configured(cfg);
  const PlannerMode mode = parse_mode(cfg.mode);
  const Planner planner(d.tasks, planner_options(cfg, d, mode));
  EnvConfig env{cfg.step_limit, d.terminal_states};
  Sink sink(cfg.out, "plan.jsonl");
  auto& out = sink.stream();

  for (int e = 0; e < cfg.episodes; ++e) {
    const std::uint64_t seed = cfg.seed + static_cast<std::uint64_t>(e);
    const auto trace = plan_episode(planner, d.beliefs, seed, env);
    const auto sum = summarize(trace, d.tasks);
    if (cfg.pretty) {
      out << "episode " << e << " (seed " << seed << ", " << to_string(mode) << ")\n";
      out << "  step  action        h   lower         upper         nodes     wall_ms\n";
      for (const auto& st : trace.steps) {
        const auto& r = st.report;
        out << "  " << std::setw(4) << st.step << "  " << std::left << std::setw(12)
            << action_label(st.action, d.tasks) << std::right << "  " << std::setw(2) << r.h_final << "  "
            << std::setw(12) << r.global.lower << "  " << std::setw(12) << r.global.upper << "  " << std::setw(8)
            << r.nodes << "  " << std::fixed << std::setprecision(3) << r.wall_ms << std::defaultfloat
            << std::setprecision(6) << "\n";
      }
      out << "  total reward " << sum.total_reward << ", " << sum.steps << " steps, "
          << (sum.all_tasks_done ? "all tasks done" : "step limit") << "\n";
      continue;
    }
    for (const auto& st : trace.steps) {
      json rec = report_to_json(st.report, d.tasks);
      rec["episode"] = e;
      rec["step"] = st.step;
      out << rec.dump() << "\n";
    }
    const double steps = sum.steps ? static_cast<double>(sum.steps) : 1.0;
    out << json{{"summary", true},
                {"episode", e},
                {"seed", seed},
                {"mode", to_string(mode)},
                {"steps", sum.steps},
                {"total_reward", sum.total_reward},
                {"all_tasks_done", sum.all_tasks_done},
                {"mean_nodes", static_cast<double>(sum.nodes) / steps},
                {"mean_wall_ms", sum.wall_ms / steps}}
               .dump()
        << "\n";
  }
  return kExitOk;
}

int cmd_compare(RunConfig cfg, const std::vector<std::string>& variants) {
  if (cfg.episodes < 1) throw UsageError("--episodes must be >= 1");
  if (variants.empty()) throw UsageError("compare needs at least one --variant");
  std::vector<PlannerMode> modes;
  for (const auto& v : variants) {
    const auto at = v.find('@');
    modes.push_back(parse_mode(v.substr(0, at)));
    if (at != std::string::npos) {
      std::uint64_t s = 0;
      try {
        s = std::stoull(v.substr(at + 1));
      } catch (const std::exception&) {
        throw UsageError("--variant: bad seed in '" + v + "'");
      }
      if (s != cfg.seed)
        throw UsageError("variants must share one seed: '" + v + "' differs from seed " + std::to_string(cfg.seed));
    }
  }
  const Domain d = load_configured(cfg);
  EnvConfig env{cfg.step_limit, d.terminal_states};
  Sink sink(cfg.out, "compare.csv");
  auto& out = sink.stream();
  if (cfg.pretty)
    out << std::left << std::setw(14) << "mode" << std::setw(9) << "episode" << std::setw(18) << "actions"
        << std::setw(14) << "reward" << std::setw(12) << "nodes" << std::setw(8) << "pruned"
        << "wall_ms\n";
  else
    out << "mode,episode,seed,action_hash,total_reward,nodes,tuples_pruned,wall_ms\n";
  for (auto mode : modes) {
    const Planner planner(d.tasks, planner_options(cfg, d, mode));
    for (int e = 0; e < cfg.episodes; ++e) {
      const std::uint64_t seed = cfg.seed + static_cast<std::uint64_t>(e);
      const auto sum = summarize(plan_episode(planner, d.beliefs, seed, env), d.tasks);
      if (cfg.pretty) {
        out << std::left << std::setw(14) << to_string(mode) << std::setw(9) << e << std::setw(18) << sum.action_hash
            << std::setw(14) << sum.total_reward << std::setw(12) << sum.nodes << std::setw(8) << sum.tuples_pruned
            << std::fixed << std::setprecision(3) << sum.wall_ms << std::defaultfloat << std::setprecision(6)
            << "\n";
      } else {
        out << to_string(mode) << "," << e << "," << seed << "," << sum.action_hash << ","
            << json(sum.total_reward).dump() << "," << sum.nodes << "," << sum.tuples_pruned << ","
            << json(sum.wall_ms).dump() << "\n";
      }
    }
  }
  return kExitOk;
}

struct OracleCheckConfig {
  int trials = 200;
  std::uint64_t seed = 0;
  std::size_t max_tasks = 3;
  std::size_t max_states = 3;
  std::size_t max_actions = 2;
  std::size_t max_observations = 2;
  int max_horizon = 4;
  double eps_gap = 1e-6;
  std::uint64_t node_budget = kDefaultNodeBudget;
  double corrupt_bound = 0.0;
  std::string out;
};

int cmd_oracle_check(const OracleCheckConfig& cfg) {
  if (cfg.trials < 0) throw UsageError("--trials must be >= 0");
  if (cfg.max_tasks < 2 || cfg.max_states < 1 || cfg.max_actions < 1 || cfg.max_observations < 1 ||
      cfg.max_horizon < 2)
    throw UsageError("instance size limits must allow at least 2 tasks, 1 state/action/observation and horizon 2");
  Sink sink(cfg.out, "oracle_check.jsonl");
  auto& out = sink.stream();
  if (cfg.trials == 0) std::cerr << "warning: --trials 0, nothing to check\n";

  std::size_t checked = 0, skipped = 0, violations = 0;
  double max_value_diff = 0.0, max_action_gap = 0.0;
  for (int trial = 0; trial < cfg.trials; ++trial) {
    std::mt19937_64 rng(cfg.seed * 1000003ULL + static_cast<std::uint64_t>(trial));
    auto pick = [&](std::size_t lo, std::size_t hi) { return lo + rng() % (hi - lo + 1); };
    GeneratorConfig g;
    g.tasks = pick(2, cfg.max_tasks);
    g.states = pick(1, cfg.max_states);
    g.actions = pick(1, cfg.max_actions);
    g.observations = pick(1, cfg.max_observations);
    g.seed = rng();
    const int H = static_cast<int>(pick(2, static_cast<std::size_t>(cfg.max_horizon)));
    const auto inst = generate_random_instance(g);
    AgentProblem problem{inst.tasks, inst.beliefs, 1.0};

    json rec{{"trial", trial}, {"tasks", g.tasks}, {"states", g.states}, {"actions", g.actions},
             {"observations", g.observations}, {"horizon", H}};
    AgentSolution oracle;
    try {
      if (estimate_agent_nodes(problem, H) > cfg.node_budget)
        throw BudgetExceeded("estimate over budget", estimate_agent_nodes(problem, H));
      oracle = solve_agent_fh(problem, H, cfg.node_budget);
    } catch (const BudgetExceeded& e) {
      ++skipped;
      rec["skipped"] = true;
      rec["estimated_nodes"] = e.estimated_nodes();
      out << rec.dump() << "\n";
      continue;
    }
    PlannerOptions po;
    po.horizon = Horizon::finite(H);
    po.eps_gap = cfg.eps_gap;
    po.node_budget = cfg.node_budget;
    po.fringe_upper_shift = -cfg.corrupt_bound;
    const auto report = Planner(inst.tasks, po).plan_step(inst.beliefs);
    const double value_diff = std::max(std::abs(report.global.lower - oracle.value),
                                       std::abs(report.global.upper - oracle.value));
    const double action_gap = oracle.value - oracle.value_of(report.action);
    const bool bad = value_diff > cfg.eps_gap || action_gap > cfg.eps_gap;
    ++checked;
    violations += bad ? 1 : 0;
    max_value_diff = std::max(max_value_diff, value_diff);
    max_action_gap = std::max(max_action_gap, action_gap);
    rec["oracle"] = oracle.value;
    rec["lower"] = report.global.lower;
    rec["upper"] = report.global.upper;
    rec["action"] = action_label(report.action, inst.tasks);
    rec["action_gap"] = action_gap;
    rec["ok"] = !bad;
    out << rec.dump() << "\n";
  }
  out << json{{"summary", true},      {"trials", cfg.trials},         {"checked", checked},
              {"skipped", skipped},   {"violations", violations},     {"max_value_diff", max_value_diff},
              {"max_action_gap", max_action_gap}}
             .dump()
      << "\n";
  if (violations) {
    std::cerr << "oracle-check: " << violations << " of " << checked << " instances disagree with the oracle\n";
    return kExitViolation;
  }
  return kExitOk;
}

void add_run_flags(CLI::App* cmd, RunConfig& cfg) {
  cmd->add_option("--domain", cfg.domain, "Domain JSON file")->required()->check(CLI::ExistingFile);
  cmd->add_option("--h0", cfg.h0, "Initial truncated horizon");
  cmd->add_option("--horizon", cfg.horizon, "Planning horizon: integer or 'infinite' (default: from the domain)");
  cmd->add_option("--gamma", cfg.gamma, "Discount override");
  cmd->add_option("--eps-gap", cfg.eps_gap, "Convergence tolerance on the bound gap");
  cmd->add_option("--capacity", cfg.capacity, "Capacity table 'h:k,h:k,...' (default: min(N, h))");
  cmd->add_option("--seed", cfg.seed, "Base seed; episode e uses seed + e");
  cmd->add_option("--episodes", cfg.episodes, "Number of episodes");
  cmd->add_option("--step-limit", cfg.step_limit, "Maximum steps per episode");
  cmd->add_option("--node-budget", cfg.node_budget, "Node budget per search");
  cmd->add_option("--timeout-ms", cfg.timeout_ms, "Wall-clock budget per planning step");
  cmd->add_option("--out", cfg.out, std::string("Output file (default: $") + kOutDirEnv + " or stdout)");
  cmd->add_flag("--pretty", cfg.pretty, "Human-readable tables instead of JSON/CSV");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adaptive-horizon planning for independent partially observable tasks"};
  app.require_subcommand(1);

  RunConfig plan_cfg;
  auto* plan = app.add_subcommand("plan", "Run planning episodes and emit one JSON line per step");
  add_run_flags(plan, plan_cfg);
  plan->add_option("--mode", plan_cfg.mode, "agent-fh | agent-ah | multitask-fh | multitask-ah");

  RunConfig cmp_cfg;
  std::vector<std::string> variants;
  auto* compare = app.add_subcommand("compare", "Run several planner modes on the same episodes, emit CSV");
  add_run_flags(compare, cmp_cfg);
  compare->add_option("--variant", variants, "MODE or MODE@SEED; repeatable")->required();

  OracleCheckConfig oc;
  auto* check = app.add_subcommand("oracle-check", "Compare multitask-ah with the exhaustive oracle");
  check->add_option("--trials", oc.trials, "Number of random instances");
  check->add_option("--seed", oc.seed, "Instance seed");
  check->add_option("--max-tasks", oc.max_tasks, "Largest task count");
  check->add_option("--max-states", oc.max_states, "Largest state count");
  check->add_option("--max-actions", oc.max_actions, "Largest action count");
  check->add_option("--max-observations", oc.max_observations, "Largest observation count");
  check->add_option("--max-horizon", oc.max_horizon, "Largest horizon");
  check->add_option("--eps-gap", oc.eps_gap, "Tolerance on value and action-value differences");
  check->add_option("--node-budget", oc.node_budget, "Oracle node budget; larger instances are skipped");
  check->add_option("--corrupt-bound", oc.corrupt_bound, "Lower every fringe upper bound by this amount")
      ->group("");  // test hook, hidden from help
  check->add_option("--out", oc.out, std::string("Output file (default: $") + kOutDirEnv + " or stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*plan) return cmd_plan(plan_cfg);
    if (*compare) return cmd_compare(cmp_cfg, variants);
    if (*check) return cmd_oracle_check(oc);
  } catch (const BudgetExceeded& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitBudget;
  } catch (const ImpossibleObservation& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitViolation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  return kExitConfig;
}
