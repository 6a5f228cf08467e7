#pragma once

// Umbrella header for the loschmidt library: classical action statistics of
// the perturbed standard map, dephasing-representation fidelity estimators,
// closed-form decay laws, and an exact quantum reference.

#include "loschmidt/config.hpp"
#include "loschmidt/dr_fidelity.hpp"
#include "loschmidt/ensembles.hpp"
#include "loschmidt/experiment.hpp"
#include "loschmidt/fft.hpp"
#include "loschmidt/phase_space.hpp"
#include "loschmidt/quantum.hpp"
#include "loschmidt/rng.hpp"
#include "loschmidt/standard_map.hpp"
#include "loschmidt/statistics.hpp"
#include "loschmidt/table_io.hpp"
#include "loschmidt/version.hpp"
