#include "threshold_sparse/fixed_tau_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "threshold_sparse/errors.hpp"

namespace threshold_sparse {

namespace {

double weighted_l1(const PenalizedProblem& pr, const Vector& alpha) {
  return (pr.penalty.array() * alpha.array().abs()).sum();
}

double smooth_loss(const PenalizedProblem& pr, const Vector& predictor) {
  return mean_loss(pr.spec, *pr.y, predictor);
}

void require_finite(const Vector& v, const char* where) {
  if (!v.allFinite()) throw NumericalFailure(std::string("non-finite iterate in ") + where);
}

std::vector<Index> free_coordinates(const PenalizedProblem& pr, const Vector& col_sq) {
  std::vector<Index> out;
  for (Index j = 0; j < pr.width(); ++j) {
    if (!pr.locked(j) && col_sq(j) > 0.0) out.push_back(j);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Quantile: scaled ADMM with augmented term (rho / 2n) ||X a - z + u||^2.

constexpr int kCertificateEvery = 10;

// Snaps an approximate LP solution onto the face it is converging to: the
// smallest residuals are driven to exactly zero by a minimal-norm correction
// of the active coefficients. Several candidate zero sets are tried; the best
// is kept only if the objective does not increase.
void polish_vertex(const PenalizedProblem& pr, Vector& alpha, double& objective) {
  const Matrix& x = *pr.x;
  const Vector& y = *pr.y;
  std::vector<Index> active;
  for (Index j = 0; j < alpha.size(); ++j) {
    if (alpha(j) != 0.0 && !pr.locked(j)) active.push_back(j);
  }
  if (active.empty()) return;
  const Vector resid = y - x * alpha;
  std::vector<Index> order(static_cast<std::size_t>(resid.size()));
  std::iota(order.begin(), order.end(), Index{0});
  std::sort(order.begin(), order.end(), [&](Index a, Index b) {
    return std::abs(resid(a)) < std::abs(resid(b));
  });
  const auto k = static_cast<Index>(active.size());
  const double scale = 1.0 + y.cwiseAbs().maxCoeff();
  const auto abs_at = [&](Index r) { return std::abs(resid(order[static_cast<std::size_t>(r)])); };

  std::vector<Index> sizes{std::min(k, resid.size())};
  for (const double t : {1e-7, 1e-6, 1e-5, 1e-4}) {
    Index c = 0;
    while (c < resid.size() && abs_at(c) <= t * scale) ++c;
    if (c > 0) sizes.push_back(c);
  }
  std::sort(sizes.begin(), sizes.end());
  sizes.erase(std::unique(sizes.begin(), sizes.end()), sizes.end());

  Vector best = alpha;
  double best_obj = objective;
  for (const Index rows : sizes) {
    if (abs_at(rows - 1) > 1e-4 * scale) continue;
    Matrix a(rows, k);
    Vector b(rows);
    for (Index r = 0; r < rows; ++r) {
      const Index i = order[static_cast<std::size_t>(r)];
      b(r) = resid(i);
      for (Index c = 0; c < k; ++c) a(r, c) = x(i, active[static_cast<std::size_t>(c)]);
    }
    const Vector step = a.completeOrthogonalDecomposition().solve(b);
    if (!step.allFinite()) continue;
    Vector candidate = alpha;
    for (Index c = 0; c < k; ++c) candidate(active[static_cast<std::size_t>(c)]) += step(c);
    const double obj = pr.objective(candidate);
    if (obj <= best_obj) {
      best = std::move(candidate);
      best_obj = obj;
    }
  }
  alpha = std::move(best);
  objective = best_obj;
}

// Dual certificate for the check loss at a (polished) vertex: subgradients
// on the zero-residual set are solved from the active-coordinate equations,
// clipped to [-gamma, 1 - gamma], and every free coordinate is then checked.
// Returns the largest violation, or infinity when no certificate is found.
double quantile_certificate(const PenalizedProblem& pr, const Vector& alpha, double residual_tol) {
  const Matrix& x = *pr.x;
  const Vector& y = *pr.y;
  const Index n = pr.n();
  const double nd = static_cast<double>(n);
  const double gamma = pr.spec.gamma;
  const Vector resid = y - x * alpha;
  std::vector<Index> kink;
  Vector deriv(n);
  for (Index i = 0; i < n; ++i) {
    if (std::abs(resid(i)) <= residual_tol) {
      kink.push_back(i);
      deriv(i) = 0.0;
    } else {
      deriv(i) = detail::check_derivative(gamma, y(i), y(i) - resid(i));
    }
  }
  Vector grad = x.transpose() * deriv / nd;
  std::vector<Index> active;
  for (Index j = 0; j < pr.width(); ++j) {
    if (!pr.locked(j) && alpha(j) != 0.0) active.push_back(j);
  }
  if (!kink.empty()) {
    const auto nz = static_cast<Index>(kink.size());
    const auto na = static_cast<Index>(active.size());
    Vector s = Vector::Constant(nz, 0.5 - gamma);
    if (na > 0) {
      Matrix a(na, nz);
      Vector b(na);
      for (Index r = 0; r < na; ++r) {
        const Index j = active[static_cast<std::size_t>(r)];
        b(r) = -nd * (grad(j) + std::copysign(pr.penalty(j), alpha(j)));
        for (Index c = 0; c < nz; ++c) a(r, c) = x(kink[static_cast<std::size_t>(c)], j);
      }
      s = a.completeOrthogonalDecomposition().solve(b);
      if (!s.allFinite()) return std::numeric_limits<double>::infinity();
    }
    s = s.cwiseMax(-gamma).cwiseMin(1.0 - gamma);
    for (Index c = 0; c < nz; ++c) {
      grad += x.row(kink[static_cast<std::size_t>(c)]).transpose() * (s(c) / nd);
    }
  }
  double worst = 0.0;
  for (Index j = 0; j < pr.width(); ++j) {
    if (pr.locked(j)) continue;
    const double v = alpha(j) != 0.0 ? std::abs(grad(j) + std::copysign(pr.penalty(j), alpha(j)))
                                     : std::max(0.0, std::abs(grad(j)) - pr.penalty(j));
    worst = std::max(worst, v);
  }
  return worst;
}

double kink_tolerance(const Vector& y) { return 1e-9 * (1.0 + y.cwiseAbs().maxCoeff()); }

SolveResult solve_quantile_admm(const PenalizedProblem& pr, Vector alpha, const Vector* init_dual,
                                const SolverOptions& opts) {
  const Matrix& x = *pr.x;
  const Vector& y = *pr.y;
  const Index n = pr.n();
  const Index m = pr.width();
  const double nd = static_cast<double>(n);
  const double gamma = pr.spec.gamma;

  const Vector col_sq = x.colwise().squaredNorm().transpose();
  const std::vector<Index> free = free_coordinates(pr, col_sq);
  for (Index j = 0; j < m; ++j) {
    if (pr.locked(j) || col_sq(j) == 0.0) alpha(j) = 0.0;
  }

  double rho = opts.admm_rho;
  Vector xa = x * alpha;
  Vector z = xa;
  Vector u(n);
  if (init_dual != nullptr && init_dual->size() == n) {
    u = *init_dual / rho;
  } else {
    for (Index i = 0; i < n; ++i) u(i) = detail::check_derivative(gamma, y(i), z(i)) / rho;
  }
  Vector e(n), z_old(n), dz(n);

  SolveResult res;
  const double kink_tol = kink_tolerance(y);
  std::vector<Index> active_list;
  active_list.reserve(free.size());
  int it = 0;
  int last_rescale = 0;
  int rescales = 0;
  // frequent rescaling stalls on these piecewise-linear problems; allow only a couple
  constexpr int interval = 100;
  constexpr int max_rescales = 2;
  // A few CD sweeps are enough almost always; an inexact alpha-update can keep
  // ADMM from settling on near-collinear designs, so stalled solves sweep more.
  int sweeps = opts.cd_sweeps;
  constexpr int stall_window = 2000;
  for (; it < opts.max_iter; ++it) {
    if (it > 0 && it % stall_window == 0 && sweeps < 64 * opts.cd_sweeps) sweeps *= 4;
    // alpha-update: weighted lasso on target z - u by cyclic coordinate descent
    e = z - u - xa;
    for (int sweep = 0; sweep < sweeps; ++sweep) {
      double max_change = 0.0;
      if (sweep == 0) {
        active_list.clear();
      }
      const auto& coords = sweep == 0 ? free : active_list;
      for (const Index j : coords) {
        const double old = alpha(j);
        const double g = x.col(j).dot(e) + col_sq(j) * old;
        const double updated = soft_threshold(g, nd * pr.penalty(j) / rho) / col_sq(j);
        if (updated != old) {
          e.noalias() -= (updated - old) * x.col(j);
          alpha(j) = updated;
          max_change = std::max(max_change, std::abs(updated - old) * std::sqrt(col_sq(j)));
        }
        if (sweep == 0 && updated != 0.0) active_list.push_back(j);
      }
      if (max_change == 0.0) break;
    }
    xa = z - u - e;

    // z-update: per-observation prox of (1/rho) * check loss
    z_old = z;
    const double c = 1.0 / rho;
    const double up = c * gamma;
    const double down = c * (1.0 - gamma);
    for (Index i = 0; i < n; ++i) {
      const double r = y(i) - (xa(i) + u(i));
      double resid = 0.0;
      if (r > up) {
        resid = r - up;
      } else if (r < -down) {
        resid = r + down;
      }
      z(i) = y(i) - resid;
    }
    u += xa - z;

    const double r_norm = (xa - z).norm() / std::sqrt(nd);
    const double scale_p = std::max(xa.norm(), z.norm()) / std::sqrt(nd);
    if (opts.record_trace) res.trace.push_back(pr.objective(alpha));
    const bool check_dual = r_norm <= opts.tol_primal * (1.0 + scale_p) ||
                            (opts.admm_adaptive && it - last_rescale >= interval && rescales < max_rescales);
    double s_norm = 0.0;
    if (check_dual) {
      dz = z - z_old;
      s_norm = (rho / nd) * (x.transpose() * dz).norm() / std::sqrt(static_cast<double>(m));
      const double scale_d = (rho / nd) * (x.transpose() * u).norm() / std::sqrt(static_cast<double>(m));
      if (r_norm <= opts.tol_primal * (1.0 + scale_p) && s_norm <= opts.tol_dual * (1.0 + scale_d)) {
        res.converged = true;
        ++it;
        break;
      }
    }
    if (!u.allFinite() || !alpha.allFinite()) throw NumericalFailure("non-finite ADMM iterate");
    if ((it + 1) % kCertificateEvery == 0) {
      Vector candidate = alpha;
      double obj = pr.objective(candidate);
      polish_vertex(pr, candidate, obj);
      if (quantile_certificate(pr, candidate, kink_tol) <= opts.tol_dual) {
        alpha = std::move(candidate);
        res.converged = true;
        ++it;
        break;
      }
    }
    if (check_dual && opts.admm_adaptive && it - last_rescale >= interval && rescales < max_rescales) {
      if (r_norm > 10.0 * s_norm) {
        rho *= 2.0;
        u /= 2.0;
        last_rescale = it;
        ++rescales;
      } else if (s_norm > 10.0 * r_norm) {
        rho /= 2.0;
        u *= 2.0;
        last_rescale = it;
        ++rescales;
      }
    }
  }
  require_finite(alpha, "ADMM");
  res.iterations = it;
  res.objective = pr.objective(alpha);
  polish_vertex(pr, alpha, res.objective);
  res.alpha = std::move(alpha);
  res.dual = rho * u;
  return res;
}

// ---------------------------------------------------------------------------
// Logistic: monotone FISTA (best-iterate variant) with backtracking.

double logistic_lipschitz(const Matrix& x) {
  const Index m = x.cols();
  if (m == 0) return 1.0;
  Vector v = Vector::Ones(m) / std::sqrt(static_cast<double>(m));
  double sigma2 = 0.0;
  for (int k = 0; k < 30; ++k) {
    Vector w = x.transpose() * (x * v);
    const double norm = w.norm();
    if (norm == 0.0) break;
    sigma2 = norm;
    v = w / norm;
  }
  return std::max(sigma2 / (4.0 * static_cast<double>(x.rows())), 1e-12);
}

SolveResult solve_logistic_fista(const PenalizedProblem& pr, Vector alpha, const SolverOptions& opts) {
  const Matrix& x = *pr.x;
  const Vector& y = *pr.y;
  const Index m = pr.width();
  const double nd = static_cast<double>(pr.n());

  for (Index j = 0; j < m; ++j) {
    if (pr.locked(j)) alpha(j) = 0.0;
  }
  double lip = logistic_lipschitz(x);

  auto loss_at = [&](const Vector& eta) {
    double s = 0.0;
    for (Index i = 0; i < eta.size(); ++i) s += detail::logistic_loss(y(i), eta(i));
    return s / nd;
  };
  auto grad_at = [&](const Vector& eta) {
    Vector r(eta.size());
    for (Index i = 0; i < eta.size(); ++i) r(i) = detail::sigmoid(eta(i)) - y(i);
    Vector g = x.transpose() * r / nd;
    for (Index j = 0; j < m; ++j) {
      if (pr.locked(j)) g(j) = 0.0;
    }
    return g;
  };
  auto prox_step = [&](const Vector& point, const Vector& grad, double step_l) {
    Vector out(m);
    for (Index j = 0; j < m; ++j) {
      out(j) = pr.locked(j) ? 0.0 : soft_threshold(point(j) - grad(j) / step_l, pr.penalty(j) / step_l);
    }
    return out;
  };

  Vector eta_x = x * alpha;
  double f_best = loss_at(eta_x) + weighted_l1(pr, alpha);
  Vector yv = alpha;
  Vector eta_y = eta_x;
  double t = 1.0;

  SolveResult res;
  if (opts.record_trace) res.trace.push_back(f_best);
  int it = 0;
  for (; it < opts.max_iter; ++it) {
    const double f_y = loss_at(eta_y);
    const Vector g_y = grad_at(eta_y);
    Vector cand, eta_c;
    double f_c = 0.0;
    for (int bt = 0; bt < 60; ++bt) {
      cand = prox_step(yv, g_y, lip);
      eta_c = x * cand;
      f_c = loss_at(eta_c);
      const Vector diff = cand - yv;
      const double model = f_y + g_y.dot(diff) + 0.5 * lip * diff.squaredNorm();
      if (f_c <= model + 1e-12 * std::abs(f_y)) break;
      lip *= 2.0;
    }
    require_finite(cand, "FISTA");
    const double obj_c = f_c + weighted_l1(pr, cand);
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    const Vector prev = alpha;
    const double f_prev = f_best;
    const bool accepted = obj_c <= f_best;
    if (accepted) {
      alpha = cand;
      eta_x = eta_c;
      f_best = obj_c;
    }
    yv = alpha + (t / t_next) * (cand - alpha) + ((t - 1.0) / t_next) * (alpha - prev);
    eta_y = x * yv;
    t = t_next;
    if (opts.record_trace) res.trace.push_back(f_best);

    const double rel = (f_prev - f_best) / std::max(1.0, std::abs(f_prev));
    if (accepted && rel < opts.fista_tol) {
      if (kkt_violation(pr, alpha) <= opts.tol_dual) {
        res.converged = true;
        ++it;
        break;
      }
      // stalled momentum: restart from the best iterate
      t = 1.0;
      yv = alpha;
      eta_y = eta_x;
    }
  }
  res.iterations = it;
  res.objective = f_best;
  res.alpha = std::move(alpha);
  return res;
}

}  // namespace

void SolverOptions::validate() const {
  if (max_iter < 1) throw InvalidArgument("solver.max_iter must be >= 1");
  if (!(tol_primal > 0.0) || !(tol_dual > 0.0) || !(fista_tol > 0.0)) {
    throw InvalidArgument("solver tolerances must be > 0");
  }
  if (!(admm_rho > 0.0)) throw InvalidArgument("solver.admm_rho must be > 0");
  if (cd_sweeps < 1) throw InvalidArgument("solver.cd_sweeps must be >= 1");
  if (!(box_bound > 0.0)) throw InvalidArgument("solver.box_bound must be > 0");
}

double PenalizedProblem::objective(const Vector& alpha) const {
  return smooth_loss(*this, *x * alpha) + weighted_l1(*this, alpha);
}

PenalizedProblem make_problem(const Matrix& x_tau, const Vector& y, const LossSpec& spec,
                              double lambda, const PenaltyWeights& weights,
                              const std::optional<Vector>& lla_weights) {
  spec.validate();
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw InvalidArgument("lambda must be >= 0");
  if (weights.size() != x_tau.cols()) throw InvalidArgument("penalty weight length mismatch");
  if (y.size() != x_tau.rows()) throw InvalidArgument("response length mismatch");
  PenalizedProblem pr;
  pr.x = &x_tau;
  pr.y = &y;
  pr.spec = spec;
  pr.penalty = lambda * weights.d;
  if (lla_weights) {
    if (lla_weights->size() != x_tau.cols()) throw InvalidArgument("LLA weight length mismatch");
    pr.penalty.array() *= lla_weights->array();
  }
  pr.locked = weights.zero_locked;
  return pr;
}

SolveResult solve_problem(const PenalizedProblem& problem, const std::optional<Vector>& init,
                          const SolverOptions& opts, const std::optional<Vector>& init_dual) {
  opts.validate();
  const Index m = problem.width();
  Vector start = Vector::Zero(m);
  if (init) {
    if (init->size() != m) throw InvalidArgument("initial alpha has wrong length");
    start = *init;
  }
  const Vector* dual = init_dual ? &*init_dual : nullptr;

  // Zero screen: when alpha = 0 already satisfies the KKT conditions (lambda at
  // or above lambda_max), return it exactly instead of iterating at the boundary.
  {
    const Vector& y = *problem.y;
    Vector deriv(y.size());
    for (Index i = 0; i < y.size(); ++i) deriv(i) = loss_derivative(problem.spec, y(i), 0.0);
    const Vector g = problem.x->transpose() * deriv / static_cast<double>(y.size());
    bool zero_optimal = true;
    for (Index j = 0; j < m && zero_optimal; ++j) {
      zero_optimal = problem.locked(j) || std::abs(g(j)) <= problem.penalty(j) * (1.0 + 1e-10);
    }
    if (zero_optimal) {
      SolveResult res;
      res.alpha = Vector::Zero(m);
      res.objective = problem.objective(res.alpha);
      res.converged = true;
      res.kkt_violation = kkt_violation(problem, res.alpha);
      if (problem.spec.kind == LossKind::Quantile) res.dual = deriv;
      return res;
    }
  }

  // Locked columns never move; solve on the free columns only.
  std::vector<Index> free;
  for (Index j = 0; j < m; ++j) {
    if (!problem.locked(j)) free.push_back(j);
  }
  SolveResult res;
  if (static_cast<Index>(free.size()) < m) {
    const auto k = static_cast<Index>(free.size());
    Matrix xs(problem.n(), k);
    PenalizedProblem sub;
    sub.y = problem.y;
    sub.spec = problem.spec;
    sub.penalty.resize(k);
    sub.locked = Mask::Constant(k, false);
    Vector sub_start(k);
    for (Index c = 0; c < k; ++c) {
      const Index j = free[static_cast<std::size_t>(c)];
      xs.col(c) = problem.x->col(j);
      sub.penalty(c) = problem.penalty(j);
      sub_start(c) = start(j);
    }
    sub.x = &xs;
    res = problem.spec.kind == LossKind::Quantile ? solve_quantile_admm(sub, std::move(sub_start), dual, opts)
                                                  : solve_logistic_fista(sub, std::move(sub_start), opts);
    Vector full = Vector::Zero(m);
    for (Index c = 0; c < k; ++c) full(free[static_cast<std::size_t>(c)]) = res.alpha(c);
    res.alpha = std::move(full);
  } else {
    res = problem.spec.kind == LossKind::Quantile ? solve_quantile_admm(problem, std::move(start), dual, opts)
                                                  : solve_logistic_fista(problem, std::move(start), opts);
  }
  for (Index j = 0; j < m; ++j) {
    if (std::abs(res.alpha(j)) > opts.box_bound) {
      res.alpha(j) = std::copysign(opts.box_bound, res.alpha(j));
      res.box_projected = true;
    }
  }
  if (res.box_projected) res.objective = problem.objective(res.alpha);
  if (!std::isfinite(res.objective)) throw NumericalFailure("non-finite objective");
  res.kkt_violation = kkt_violation(problem, res.alpha);
  return res;
}

SolveResult solve_penalized(const ThresholdDesign& design, const LossSpec& spec, double lambda,
                            const PenaltyWeights& weights,
                            const std::optional<Vector>& lla_weights,
                            const std::optional<Vector>& init, const SolverOptions& opts) {
  const Matrix x_tau = design.materialize();
  const auto pr = make_problem(x_tau, design.dataset().y(), spec, lambda, weights, lla_weights);
  return solve_problem(pr, init, opts);
}

double kkt_violation(const PenalizedProblem& pr, const Vector& alpha, double residual_tol) {
  const Matrix& x = *pr.x;
  const Vector& y = *pr.y;
  const Index n = pr.n();
  const double nd = static_cast<double>(n);
  if (alpha.size() != pr.width()) throw InvalidArgument("alpha length mismatch");
  const Vector eta = x * alpha;

  // derivative for residuals off the kink, plus a flag for those on it
  Vector deriv(n);
  Vector on_kink = Vector::Zero(n);
  for (Index i = 0; i < n; ++i) {
    if (pr.spec.kind == LossKind::Quantile) {
      if (std::abs(y(i) - eta(i)) <= residual_tol) {
        deriv(i) = 0.0;
        on_kink(i) = 1.0;
      } else {
        deriv(i) = detail::check_derivative(pr.spec.gamma, y(i), eta(i));
      }
    } else {
      deriv(i) = detail::sigmoid(eta(i)) - y(i);
    }
  }
  const Vector g = x.transpose() * deriv / nd;
  const double gamma = pr.spec.gamma;
  double worst = 0.0;
  for (Index j = 0; j < pr.width(); ++j) {
    if (pr.locked(j)) continue;
    double lo = g(j);
    double hi = g(j);
    if (pr.spec.kind == LossKind::Quantile && on_kink.any()) {
      for (Index i = 0; i < n; ++i) {
        if (on_kink(i) == 0.0) continue;
        const double xij = x(i, j) / nd;
        // xij * s for s in [-gamma, 1 - gamma]
        lo += std::min(-gamma * xij, (1.0 - gamma) * xij);
        hi += std::max(-gamma * xij, (1.0 - gamma) * xij);
      }
    }
    const double pen = pr.penalty(j);
    if (alpha(j) > 0.0) {
      lo += pen;
      hi += pen;
    } else if (alpha(j) < 0.0) {
      lo -= pen;
      hi -= pen;
    } else {
      lo -= pen;
      hi += pen;
    }
    const double v = lo > 0.0 ? lo : (hi < 0.0 ? -hi : 0.0);
    worst = std::max(worst, v);
  }
  return worst;
}

double check_optimality(const ThresholdDesign& design, const LossSpec& spec, double lambda,
                        const PenaltyWeights& weights, const std::optional<Vector>& lla_weights,
                        const Vector& alpha, double residual_tol) {
  const Matrix x_tau = design.materialize();
  const auto pr = make_problem(x_tau, design.dataset().y(), spec, lambda, weights, lla_weights);
  return kkt_violation(pr, alpha, residual_tol);
}

double lambda_max(const ThresholdDesign& design, const LossSpec& spec,
                  const PenaltyWeights& weights) {
  const Matrix x_tau = design.materialize();
  const Vector& y = design.dataset().y();
  Vector deriv(y.size());
  for (Index i = 0; i < y.size(); ++i) deriv(i) = loss_derivative(spec, y(i), 0.0);
  const Vector g = x_tau.transpose() * deriv / static_cast<double>(y.size());
  double out = 0.0;
  for (Index j = 0; j < g.size(); ++j) {
    if (!weights.zero_locked(j)) out = std::max(out, std::abs(g(j)) / weights.d(j));
  }
  return out;
}

}  // namespace threshold_sparse
