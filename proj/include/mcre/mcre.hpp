#pragma once

#include "mcre/ar1_model.hpp"
#include "mcre/assignment.hpp"
#include "mcre/coupling_engine.hpp"
#include "mcre/errors.hpp"
#include "mcre/fracvol_sde.hpp"
#include "mcre/kernel_core.hpp"
#include "mcre/logvol_model.hpp"
#include "mcre/metrics.hpp"
#include "mcre/numeric.hpp"
#include "mcre/parallel.hpp"
#include "mcre/random.hpp"
