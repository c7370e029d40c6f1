#pragma once

#include "wmcusum/attack.hpp"
#include "wmcusum/benchmarks.hpp"
#include "wmcusum/config.hpp"
#include "wmcusum/detector.hpp"
#include "wmcusum/error.hpp"
#include "wmcusum/experiments.hpp"
#include "wmcusum/linalg.hpp"
#include "wmcusum/optimize.hpp"
#include "wmcusum/plant.hpp"
#include "wmcusum/simulation.hpp"
#include "wmcusum/stats.hpp"
