#pragma once

#include "d2d/errors.hpp"
#include "d2d/net_model.hpp"
#include "d2d/lower_game.hpp"
#include "d2d/upper_pricing.hpp"
#include "d2d/oracle.hpp"
#include "d2d/montecarlo.hpp"
#include "d2d/csv.hpp"
#include "d2d/cli.hpp"
