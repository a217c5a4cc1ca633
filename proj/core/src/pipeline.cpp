#include "threshold_sparse/pipeline.hpp"

#include <algorithm>
#include <cmath>

#include "threshold_sparse/errors.hpp"

namespace threshold_sparse {

void FitConfig::validate() const {
  spec.validate();
  if (!(lambda > 0.0) || !std::isfinite(lambda)) throw InvalidArgument("lambda must be > 0");
  scad.validate();
  solver.validate();
  if (!(active_tol >= 0.0)) throw InvalidArgument("active_tol must be >= 0");
  if (!(grid.low < grid.high)) throw InvalidArgument("tau_low must be < tau_high");
}

double default_mu(const LossSpec& spec, Index p, double lambda) {
  const double factor = spec.kind == LossKind::Quantile ? 1.0 : 0.5;
  return factor * std::log(static_cast<double>(p)) * lambda;
}

LassoFit fit_lasso(const Dataset& data, const FitConfig& config) {
  config.validate();
  LassoFit fit;
  fit.grid = build_grid(data, config.grid.low, config.grid.high, config.grid.mode);
  fit.profile = profile_objective(data, fit.grid, config.direction, config.spec, config.lambda,
                                  std::nullopt, config.solver, config.sweep);
  const auto& best = fit.profile.records[fit.profile.argmin_index];
  fit.tau_hat = best.tau;
  fit.alpha_hat = CoefficientPair::from_alpha(best.alpha);
  fit.objective = best.objective;
  return fit;
}

ScadFit fit_scad(const Dataset& data, const LassoFit& lasso, const FitConfig& config) {
  config.validate();
  const ThresholdDesign design(data, lasso.tau_hat, config.direction);
  const PenaltyWeights weights = penalty_weights(design);
  const Vector alpha_hat = lasso.alpha_hat.as_alpha();
  ScadFit out;
  out.scad_weights = scad_lla_weights(alpha_hat, config.scad);
  const Matrix x_tau = design.materialize();
  const auto problem = make_problem(x_tau, data.y(), config.spec, config.scad.mu, weights,
                                    out.scad_weights);
  out.solve = solve_problem(problem, alpha_hat, config.solver);
  out.alpha_tilde = CoefficientPair::from_alpha(out.solve.alpha);
  return out;
}

TwoStepFit fit_full(const Dataset& data, const FitConfig& config) {
  TwoStepFit fit;
  fit.lasso = fit_lasso(data, config);
  ScadFit scad = fit_scad(data, fit.lasso, config);
  fit.alpha_tilde = std::move(scad.alpha_tilde);
  fit.scad_weights = std::move(scad.scad_weights);
  fit.scad_solve = std::move(scad.solve);
  fit.tau_tilde = refit_tau(data, fit.alpha_tilde, config.spec, fit.lasso.grid, config.direction);
  fit.direction = config.direction;
  fit.active_beta = active_set(fit.alpha_tilde.beta, config.active_tol);
  fit.active_delta = active_set(fit.alpha_tilde.delta, config.active_tol);
  return fit;
}

namespace {

SolveResult restricted_solve(const Dataset& data, const Mask& outside, double tau,
                             IndicatorDirection direction, const LossSpec& spec,
                             const SolverOptions& opts, const std::optional<Vector>& init) {
  const ThresholdDesign design(data, tau, direction);
  PenaltyWeights weights = penalty_weights(design);
  weights.zero_locked = weights.zero_locked || outside;
  const Matrix x_tau = design.materialize();
  const auto problem = make_problem(x_tau, data.y(), spec, 0.0, weights, std::nullopt);
  return solve_problem(problem, init, opts);
}

}  // namespace

OracleFit fit_oracle(const Dataset& data, const ActiveSet& support, std::optional<double> tau0,
                     const TauGrid& grid, IndicatorDirection direction, const LossSpec& spec,
                     const SolverOptions& opts) {
  const Index width = 2 * data.p();
  Mask outside = Mask::Constant(width, true);
  for (const Index j : support.indices) {
    if (j < 0 || j >= width) throw InvalidArgument("oracle support index out of range");
    outside(j) = false;
  }
  OracleFit out;
  if (tau0) {
    const SolveResult res = restricted_solve(data, outside, *tau0, direction, spec, opts, std::nullopt);
    out.alpha = CoefficientPair::from_alpha(res.alpha);
    out.tau = *tau0;
    out.objective = res.objective;
    out.converged = res.converged;
    return out;
  }
  if (grid.taus.empty()) throw EmptyGridError("tau grid is empty");
  const bool has_delta = std::any_of(support.indices.begin(), support.indices.end(),
                                     [&](Index j) { return j >= data.p(); });
  if (!has_delta) {
    // tau does not enter the restricted objective; report the smallest grid point
    const SolveResult res =
        restricted_solve(data, outside, grid.taus.front(), direction, spec, opts, std::nullopt);
    out.alpha = CoefficientPair::from_alpha(res.alpha);
    out.tau = grid.taus.front();
    out.objective = res.objective;
    out.converged = res.converged;
    return out;
  }
  std::vector<ProfileRecord> records(grid.size());
  std::optional<Vector> warm;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    SolveResult res = restricted_solve(data, outside, grid.taus[k], direction, spec, opts, warm);
    records[k] = {grid.taus[k], res.alpha, res.objective, res.converged, res.kkt_violation,
                  res.iterations};
    warm = std::move(res.alpha);
  }
  const std::size_t best = argmin_record(records);
  out.alpha = CoefficientPair::from_alpha(records[best].alpha);
  out.tau = records[best].tau;
  out.objective = records[best].objective;
  out.converged = true;
  return out;
}

}  // namespace threshold_sparse
