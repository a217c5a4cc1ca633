#pragma once

#include <optional>
#include <vector>

#include "threshold_sparse/core_model.hpp"
#include "threshold_sparse/losses.hpp"
#include "threshold_sparse/penalty.hpp"

namespace threshold_sparse {

/// Solver knobs. Defaults are used for every experiment unless a config
/// overrides them (`solver.*` keys).
struct SolverOptions {
  int max_iter = 20000;
  double tol_primal = 1e-6;
  double tol_dual = 1e-6;
  double admm_rho = 1.0;
  bool admm_adaptive = true;
  /// Coordinate-descent sweeps inside each ADMM alpha-update.
  int cd_sweeps = 5;
  /// Relative objective change that stops the accelerated proximal gradient.
  double fista_tol = 1e-9;
  /// Parameter-space bound |alpha|_inf <= box_bound, applied as a final projection.
  double box_bound = 1e6;
  /// Keep the per-iteration objective sequence in SolveResult::trace.
  bool record_trace = false;

  void validate() const;
};

struct SolveResult {
  Vector alpha;
  double objective = 0.0;
  int iterations = 0;
  bool converged = false;
  double kkt_violation = 0.0;
  /// Some coordinate hit the box bound and was clipped.
  bool box_projected = false;
  std::vector<double> trace;
  /// Quantile/ADMM only: per-observation loss subgradient estimate, usable as
  /// `init_dual` for a neighbouring problem.
  Vector dual;
};

/// A weighted-l1 penalized M-estimation problem on a materialized design:
///
///   min_a (1/n) sum_i rho(y_i, x_i'a) + sum_j penalty_j |a_j|,  a_j = 0 for locked j.
///
/// `x` and `y` are borrowed and must outlive the problem.
struct PenalizedProblem {
  const Matrix* x = nullptr;
  const Vector* y = nullptr;
  LossSpec spec;
  Vector penalty;
  Mask locked;

  Index n() const noexcept { return x->rows(); }
  Index width() const noexcept { return x->cols(); }
  double objective(const Vector& alpha) const;
};

/// Builds the problem for design X(tau) with per-coordinate penalty
/// lambda * w_j * d_j (w_j = 1 when `lla_weights` is empty).
PenalizedProblem make_problem(const Matrix& x_tau, const Vector& y, const LossSpec& spec,
                              double lambda, const PenaltyWeights& weights,
                              const std::optional<Vector>& lla_weights);

inline double soft_threshold(double v, double t) noexcept {
  if (v > t) return v - t;
  if (v < -t) return v + t;
  return 0.0;
}

/// Quantile loss: ADMM on z = X(tau) a. Logistic loss: monotone FISTA with
/// backtracking. Non-convergence is reported through `converged`, a NaN
/// iterate throws NumericalFailure.
SolveResult solve_problem(const PenalizedProblem& problem, const std::optional<Vector>& init,
                          const SolverOptions& opts,
                          const std::optional<Vector>& init_dual = std::nullopt);

SolveResult solve_penalized(const ThresholdDesign& design, const LossSpec& spec, double lambda,
                            const PenaltyWeights& weights,
                            const std::optional<Vector>& lla_weights,
                            const std::optional<Vector>& init, const SolverOptions& opts);

/// Largest KKT violation over free coordinates. For the quantile loss,
/// residuals with |r_i| <= residual_tol contribute the whole interval
/// [-gamma, 1 - gamma] and the distance from 0 to the summed interval is used.
double kkt_violation(const PenalizedProblem& problem, const Vector& alpha,
                     double residual_tol = 1e-9);

double check_optimality(const ThresholdDesign& design, const LossSpec& spec, double lambda,
                        const PenaltyWeights& weights, const std::optional<Vector>& lla_weights,
                        const Vector& alpha, double residual_tol = 1e-9);

/// Smallest lambda for which alpha = 0 satisfies the KKT conditions
/// (derivatives evaluated at the zero fit, unit LLA weights).
double lambda_max(const ThresholdDesign& design, const LossSpec& spec,
                  const PenaltyWeights& weights);

}  // namespace threshold_sparse
