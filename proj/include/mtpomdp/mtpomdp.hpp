#pragma once

#include "agent_oracle.hpp"
#include "client_solver.hpp"
#include "domain_io.hpp"
#include "episode.hpp"
#include "errors.hpp"
#include "planner.hpp"
#include "pomdp.hpp"
#include "sim_env.hpp"
#include "truncated_solver.hpp"
