#include "threshold_sparse/losses.hpp"

#include <algorithm>
#include <cmath>

#include "threshold_sparse/errors.hpp"

namespace threshold_sparse {

namespace {

void require_binary(double y) {
  if (y != 0.0 && y != 1.0) {
    throw InvalidArgument("logistic loss needs y in {0,1}, got " + std::to_string(y));
  }
}

// Root of c * (g(z) - y) + z - v on [v - c, v + c]: Newton with bisection fallback.
double logistic_prox(double y, double v, double c) {
  double lo = v - c;
  double hi = v + c;
  double z = v;
  for (int it = 0; it < 50; ++it) {
    const double g = detail::sigmoid(z);
    const double h = c * (g - y) + (z - v);
    if (std::abs(h) <= 1e-12) return z;
    if (h > 0.0) {
      hi = z;
    } else {
      lo = z;
    }
    const double slope = 1.0 + c * g * (1.0 - g);
    double next = z - h / slope;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    z = next;
  }
  return z;
}

}  // namespace

void LossSpec::validate() const {
  if (kind == LossKind::Quantile && !(gamma > 0.0 && gamma < 1.0)) {
    throw InvalidArgument("quantile level gamma must lie in (0,1), got " + std::to_string(gamma));
  }
}

double LossSpec::lipschitz() const noexcept {
  return kind == LossKind::Quantile ? std::max(gamma, 1.0 - gamma) : 1.0;
}

const char* to_string(LossKind k) noexcept {
  return k == LossKind::Quantile ? "quantile" : "logistic";
}

LossKind parse_loss_kind(const std::string& s) {
  if (s == "quantile" || s == "median") return LossKind::Quantile;
  if (s == "logistic" || s == "logit") return LossKind::Logistic;
  throw InvalidArgument("unknown loss '" + s + "' (expected quantile|logistic)");
}

double loss_value(const LossSpec& spec, double y, double t) {
  if (spec.kind == LossKind::Quantile) return detail::check_loss(spec.gamma, y, t);
  require_binary(y);
  return detail::logistic_loss(y, t);
}

double loss_derivative(const LossSpec& spec, double y, double t) {
  if (spec.kind == LossKind::Quantile) return detail::check_derivative(spec.gamma, y, t);
  require_binary(y);
  return detail::sigmoid(t) - y;
}

double loss_prox(const LossSpec& spec, double y, double v, double c) {
  if (!(c > 0.0)) throw InvalidArgument("prox scale c must be > 0");
  if (spec.kind == LossKind::Quantile) {
    // residual u = y - z solves the prox of c * rho_gamma(u) at r = y - v
    const double r = y - v;
    const double up = c * spec.gamma;
    const double down = c * (1.0 - spec.gamma);
    double u = 0.0;
    if (r > up) {
      u = r - up;
    } else if (r < -down) {
      u = r + down;
    }
    return y - u;
  }
  require_binary(y);
  return logistic_prox(y, v, c);
}

double mean_loss(const LossSpec& spec, const Vector& y, const Vector& predictor) {
  if (y.size() != predictor.size()) throw InvalidArgument("predictor length does not match y");
  double sum = 0.0;
  if (spec.kind == LossKind::Quantile) {
    for (Index i = 0; i < y.size(); ++i) sum += detail::check_loss(spec.gamma, y(i), predictor(i));
  } else {
    for (Index i = 0; i < y.size(); ++i) {
      require_binary(y(i));
      sum += detail::logistic_loss(y(i), predictor(i));
    }
  }
  return sum / static_cast<double>(y.size());
}

double empirical_risk(const ThresholdDesign& design, const CoefficientPair& alpha,
                      const LossSpec& spec) {
  return mean_loss(spec, design.dataset().y(), linear_predictor(design, alpha));
}

}  // namespace threshold_sparse
