#pragma once

#include <optional>

#include "threshold_sparse/core_model.hpp"
#include "threshold_sparse/fixed_tau_solver.hpp"
#include "threshold_sparse/losses.hpp"
#include "threshold_sparse/penalty.hpp"
#include "threshold_sparse/threshold_search.hpp"

namespace threshold_sparse {

/// Where the tau grid lives and how it is built.
struct GridSpec {
  double low = 0.15;
  double high = 0.85;
  GridMode mode;
};

struct FitConfig {
  LossSpec spec;
  double lambda = 0.03;
  ScadConfig scad;  ///< scad.mu is the second-step tuning level
  GridSpec grid;
  IndicatorDirection direction = IndicatorDirection::Greater;
  SolverOptions solver;
  SweepOptions sweep;
  double active_tol = kDefaultActiveTol;

  void validate() const;
};

/// Default second-step level: log(p) * lambda for the quantile loss and
/// 0.5 * log(p) * lambda for the logistic loss.
double default_mu(const LossSpec& spec, Index p, double lambda);

/// Steps 1-2: profile the l1-penalized objective over the grid, keep the argmin.
struct LassoFit {
  CoefficientPair alpha_hat;
  double tau_hat = 0.0;
  ProfileResult profile;
  TauGrid grid;
  double objective = 0.0;
};

struct ScadFit {
  CoefficientPair alpha_tilde;
  Vector scad_weights;
  SolveResult solve;
};

/// All four steps.
struct TwoStepFit {
  LassoFit lasso;
  CoefficientPair alpha_tilde;
  double tau_tilde = 0.0;
  IndicatorDirection direction = IndicatorDirection::Greater;
  ActiveSet active_beta;   ///< indices into beta
  ActiveSet active_delta;  ///< indices into delta
  Vector scad_weights;
  SolveResult scad_solve;
};

LassoFit fit_lasso(const Dataset& data, const FitConfig& config);

/// Step 3: one LLA reweighting at the first-step tau, penalty mu * w_j * D_j(tau_hat).
ScadFit fit_scad(const Dataset& data, const LassoFit& lasso, const FitConfig& config);

TwoStepFit fit_full(const Dataset& data, const FitConfig& config);

/// Unpenalized fit restricted to `support` (indices into the 2p vector).
/// With `tau0` the threshold is fixed (oracle 1); without it the threshold is
/// profiled over `grid` by the same restricted objective (oracle 2).
struct OracleFit {
  CoefficientPair alpha;
  double tau = 0.0;
  double objective = 0.0;
  bool converged = false;
};

OracleFit fit_oracle(const Dataset& data, const ActiveSet& support, std::optional<double> tau0,
                     const TauGrid& grid, IndicatorDirection direction, const LossSpec& spec,
                     const SolverOptions& opts);

}  // namespace threshold_sparse
