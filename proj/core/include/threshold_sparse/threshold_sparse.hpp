#pragma once

#include "threshold_sparse/core_model.hpp"
#include "threshold_sparse/errors.hpp"
#include "threshold_sparse/experiment_io.hpp"
#include "threshold_sparse/fixed_tau_solver.hpp"
#include "threshold_sparse/losses.hpp"
#include "threshold_sparse/penalty.hpp"
#include "threshold_sparse/pipeline.hpp"
#include "threshold_sparse/simulation.hpp"
#include "threshold_sparse/threshold_search.hpp"
