#pragma once

#include "ceca/consensus.hpp"
#include "ceca/error.hpp"
#include "ceca/harness.hpp"
#include "ceca/linalg.hpp"
#include "ceca/mixing.hpp"
#include "ceca/optimizer.hpp"
#include "ceca/problems.hpp"
#include "ceca/rng.hpp"
#include "ceca/schedule.hpp"
#include "ceca/topology.hpp"
