#pragma once

#include "genodyn/analysis.hpp"
#include "genodyn/core.hpp"
#include "genodyn/experiments.hpp"
#include "genodyn/models.hpp"
#include "genodyn/solver.hpp"
#include "genodyn/tableau.hpp"
