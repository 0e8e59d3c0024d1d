#pragma once

#include "d3gm/rng.hpp"
#include "d3gm/parallel.hpp"
#include "d3gm/schedule.hpp"
#include "d3gm/brownian.hpp"
#include "d3gm/process.hpp"
#include "d3gm/rds.hpp"
#include "d3gm/discrepancy.hpp"
#include "d3gm/score.hpp"
#include "d3gm/reverse.hpp"
#include "d3gm/io.hpp"
#include "d3gm/experiments.hpp"
