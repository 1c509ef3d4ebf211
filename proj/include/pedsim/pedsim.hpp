#pragma once

#include "pedsim/types.hpp"
#include "pedsim/scenario.hpp"
#include "pedsim/floor_field.hpp"
#include "pedsim/geometry.hpp"
#include "pedsim/rng.hpp"
#include "pedsim/urn.hpp"
#include "pedsim/behavior.hpp"
#include "pedsim/conflict.hpp"
#include "pedsim/engine.hpp"
#include "pedsim/metrics.hpp"
#include "pedsim/pgm.hpp"
#include "pedsim/runner.hpp"
