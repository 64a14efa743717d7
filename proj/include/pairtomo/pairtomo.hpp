#pragma once

#include "pairtomo/cascade_sim.hpp"
#include "pairtomo/decomposer.hpp"
#include "pairtomo/entanglement.hpp"
#include "pairtomo/errors.hpp"
#include "pairtomo/fitting.hpp"
#include "pairtomo/io.hpp"
#include "pairtomo/linalg.hpp"
#include "pairtomo/nelder_mead.hpp"
#include "pairtomo/qstate.hpp"
#include "pairtomo/tolerances.hpp"
#include "pairtomo/tomography.hpp"
#include "pairtomo/version.hpp"
