#pragma once

#include "heb/chain.hpp"
#include "heb/experiment.hpp"
#include "heb/io.hpp"
#include "heb/mdp.hpp"
#include "heb/metrics.hpp"
#include "heb/numeric.hpp"
#include "heb/protocol.hpp"
#include "heb/rng.hpp"
#include "heb/sim.hpp"
#include "heb/strategy.hpp"
#include "heb/world.hpp"
