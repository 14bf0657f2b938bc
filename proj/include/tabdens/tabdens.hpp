#pragma once

#include "checks.hpp"
#include "dataset.hpp"
#include "datasets.hpp"
#include "density_model.hpp"
#include "em_fitter.hpp"
#include "error.hpp"
#include "evaluation.hpp"
#include "grid_basis.hpp"
#include "io.hpp"
#include "risk_inference.hpp"
#include "sim_harness.hpp"
