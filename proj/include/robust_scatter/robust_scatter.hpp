#pragma once

#include "common.hpp"
#include "weights.hpp"
#include "estimators.hpp"
#include "det_equiv.hpp"
#include "spectrum.hpp"
#include "simulate.hpp"
#include "scenarios.hpp"
#include "io.hpp"
#include "cli.hpp"
