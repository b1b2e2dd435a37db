#pragma once

// Domain files (JSON) and JSON records for planner output.
//
// {
//   "discount": 1.0, "horizon": 4 | "infinite", "epsilon": 1e-6,
//   "tasks": [{
//     "name": "...", "states": [...], "actions": [...], "observations": [...],
//     "transitions":    {"<action>" | "noop": |S|x|S| rows},
//     "observation_fn": {"<action>" | "noop": |S|x|Z| rows},
//     "rewards":        {"<action>" | "noop": |S| entries},
//     "initial_belief": [...],
//     "terminal_states": [...]            (optional, state labels)
//   }]
// }

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "episode.hpp"
#include "planner.hpp"
#include "pomdp.hpp"
#include "sim_env.hpp"

namespace mtpomdp {

using json = nlohmann::json;

/// Config or domain file problem. The message names the file and field.
class DomainError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Domain {
  double discount = 1.0;
  Horizon horizon = Horizon::finite(1);
  std::vector<ClientPomdp> tasks;
  std::vector<Belief> beliefs;
  std::vector<std::vector<std::size_t>> terminal_states;
};

namespace detail {

template <class T>
T field(const json& obj, const char* key, const std::string& where) {
  if (!obj.is_object() || !obj.contains(key)) throw DomainError(where + ": missing field '" + key + "'");
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw DomainError(where + "." + key + ": " + e.what());
  }
}

}  // namespace detail

inline Domain parse_domain(const json& doc, const std::string& source = "<domain>") {
  Domain d;
  const std::string root = source;
  if (!doc.is_object()) throw DomainError(root + ": top level must be an object");
  d.discount = detail::field<double>(doc, "discount", root);
  const double epsilon = doc.contains("epsilon") ? detail::field<double>(doc, "epsilon", root) : 1e-6;
  if (!doc.contains("horizon")) throw DomainError(root + ": missing field 'horizon'");
  const auto& hz = doc.at("horizon");
  if (hz.is_string() && hz.get<std::string>() == "infinite") {
    d.horizon = Horizon::infinite(epsilon);
  } else if (hz.is_number_integer()) {
    d.horizon = Horizon{hz.get<int>(), epsilon};
  } else {
    throw DomainError(root + ".horizon: expected a positive integer or \"infinite\"");
  }
  try {
    d.horizon.validate(d.discount);
  } catch (const std::exception& e) {
    throw DomainError(root + ".horizon: " + e.what());
  }

  if (!doc.contains("tasks") || !doc.at("tasks").is_array() || doc.at("tasks").empty())
    throw DomainError(root + ": 'tasks' must be a non-empty array");
  const auto& tasks = doc.at("tasks");
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    const std::string where = root + ": tasks[" + std::to_string(i) + "]";
    const auto& t = tasks[i];
    RawClient raw;
    raw.name = t.contains("name") ? detail::field<std::string>(t, "name", where) : "task" + std::to_string(i);
    raw.states = detail::field<std::vector<std::string>>(t, "states", where);
    raw.actions = detail::field<std::vector<std::string>>(t, "actions", where);
    raw.observations = detail::field<std::vector<std::string>>(t, "observations", where);
    raw.transitions = detail::field<std::map<std::string, std::vector<std::vector<double>>>>(t, "transitions", where);
    raw.observation_fn =
        detail::field<std::map<std::string, std::vector<std::vector<double>>>>(t, "observation_fn", where);
    raw.rewards = detail::field<std::map<std::string, std::vector<double>>>(t, "rewards", where);
    if (!raw.transitions.contains(kNoopLabel)) throw DomainError(where + ".transitions: key \"noop\" is required");
    try {
      d.tasks.push_back(validate_client(raw, i, d.discount));
      d.beliefs.emplace_back(detail::field<std::vector<double>>(t, "initial_belief", where));
    } catch (const DomainError&) {
      throw;
    } catch (const std::exception& e) {
      throw DomainError(where + ": " + e.what());
    }
    if (d.beliefs.back().size() != raw.states.size())
      throw DomainError(where + ".initial_belief: expected " + std::to_string(raw.states.size()) + " entries");
    std::vector<std::size_t> terminal;
    if (t.contains("terminal_states")) {
      for (const auto& label : detail::field<std::vector<std::string>>(t, "terminal_states", where)) {
        auto it = std::find(raw.states.begin(), raw.states.end(), label);
        if (it == raw.states.end()) throw DomainError(where + ".terminal_states: unknown state '" + label + "'");
        terminal.push_back(static_cast<std::size_t>(it - raw.states.begin()));
      }
    }
    d.terminal_states.push_back(std::move(terminal));
  }
  return d;
}

inline Domain load_domain(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DomainError(path + ": cannot open file");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw DomainError(path + ": " + e.what());
  }
  return parse_domain(doc, path);
}

inline json to_json(const Domain& d) {
  json doc;
  doc["discount"] = d.discount;
  if (d.horizon.is_finite())
    doc["horizon"] = d.horizon.value();
  else
    doc["horizon"] = "infinite";
  doc["epsilon"] = d.horizon.epsilon;
  doc["tasks"] = json::array();
  for (std::size_t i = 0; i < d.tasks.size(); ++i) {
    const auto raw = d.tasks[i].to_raw();
    json t;
    t["name"] = raw.name;
    t["states"] = raw.states;
    t["actions"] = raw.actions;
    t["observations"] = raw.observations;
    t["transitions"] = raw.transitions;
    t["observation_fn"] = raw.observation_fn;
    t["rewards"] = raw.rewards;
    t["initial_belief"] = d.beliefs.at(i).probs();
    if (i < d.terminal_states.size() && !d.terminal_states[i].empty()) {
      std::vector<std::string> labels;
      for (auto s : d.terminal_states[i]) labels.push_back(raw.states.at(s));
      t["terminal_states"] = labels;
    }
    doc["tasks"].push_back(std::move(t));
  }
  return doc;
}

/// One JSON-lines record per planning step. Field set is the same for every mode.
inline json report_to_json(const PlannerReport& r, const std::vector<ClientPomdp>& tasks) {
  return json{{"mode", to_string(r.mode)},
              {"h_final", r.h_final},
              {"lower", r.global.lower},
              {"upper", r.global.upper},
              {"action", action_label(r.action, tasks)},
              {"nodes", r.nodes},
              {"tuples_active", r.tuples_active},
              {"tuples_pruned", r.tuples_pruned},
              {"cache_hits", r.cache_hits},
              {"anytime", r.anytime},
              {"wall_ms", r.wall_ms}};
}

}  // namespace mtpomdp
