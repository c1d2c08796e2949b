#pragma once

#include "barl/rng.hpp"
#include "barl/env.hpp"
#include "barl/belief.hpp"
#include "barl/qtable.hpp"
#include "barl/mcts.hpp"
#include "barl/baselines.hpp"
#include "barl/oracle.hpp"
#include "barl/serialize.hpp"
#include "barl/harness.hpp"
