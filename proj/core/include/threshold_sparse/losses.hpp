#pragma once

#include <cmath>
#include <cstdint>
#include <string>

#include "threshold_sparse/core_model.hpp"

namespace threshold_sparse {

enum class LossKind : std::uint8_t { Quantile, Logistic };

/// Which loss rho(y, t) to use. `gamma` is the quantile level and is ignored
/// for the logistic negative log-likelihood.
struct LossSpec {
  LossKind kind = LossKind::Quantile;
  double gamma = 0.5;

  static LossSpec quantile(double gamma) { return {LossKind::Quantile, gamma}; }
  static LossSpec logistic() { return {LossKind::Logistic, 0.5}; }

  /// Throws InvalidArgument unless 0 < gamma < 1 for the quantile loss.
  void validate() const;
  /// Lipschitz constant of t -> rho(y, t): max(gamma, 1 - gamma) or 1.
  double lipschitz() const noexcept;
};

const char* to_string(LossKind k) noexcept;
LossKind parse_loss_kind(const std::string& s);

namespace detail {

inline double softplus(double t) noexcept {
  return std::max(t, 0.0) + std::log1p(std::exp(-std::abs(t)));
}

inline double sigmoid(double t) noexcept {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

// Unchecked kernels used by the solvers' inner loops.
inline double check_loss(double gamma, double y, double t) noexcept {
  const double r = y - t;
  return r * (gamma - (r <= 0.0 ? 1.0 : 0.0));
}
inline double check_derivative(double gamma, double y, double t) noexcept {
  return (y - t <= 0.0 ? 1.0 : 0.0) - gamma;
}
inline double logistic_loss(double y, double t) noexcept { return softplus(t) - y * t; }

}  // namespace detail

/// rho(y, t). For the logistic loss y must be 0 or 1.
double loss_value(const LossSpec& spec, double y, double t);

/// d rho / dt. At the quantile kink (y == t) returns the right endpoint
/// 1 - gamma of the subdifferential [-gamma, 1 - gamma].
double loss_derivative(const LossSpec& spec, double y, double t);

/// argmin_z c * rho(y, z) + (z - v)^2 / 2, c > 0.
double loss_prox(const LossSpec& spec, double y, double v, double c);

/// (1/n) sum_i rho(y_i, x_i(tau)'alpha).
double empirical_risk(const ThresholdDesign& design, const CoefficientPair& alpha,
                      const LossSpec& spec);

/// Same mean, for an already computed predictor vector.
double mean_loss(const LossSpec& spec, const Vector& y, const Vector& predictor);

}  // namespace threshold_sparse
