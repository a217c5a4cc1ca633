#include "threshold_sparse/penalty.hpp"

#include <cmath>

#include "threshold_sparse/errors.hpp"

namespace threshold_sparse {

PenaltyWeights penalty_weights(const ThresholdDesign& design) {
  const Index p = design.p();
  const auto n = static_cast<double>(design.n());
  const auto& x = design.dataset().x();
  const auto& ind = design.indicator();

  PenaltyWeights w;
  w.d.resize(2 * p);
  w.zero_locked.resize(2 * p);
  for (Index j = 0; j < p; ++j) {
    const auto col = x.col(j).array();
    w.d(j) = std::sqrt(col.square().sum() / n);
    w.d(p + j) = std::sqrt((col.square() * ind).sum() / n);
  }
  for (Index j = 0; j < 2 * p; ++j) {
    w.zero_locked(j) = w.d(j) < kDegeneracyFloor;
    if (w.zero_locked(j)) w.d(j) = 1.0;
  }
  return w;
}

void ScadConfig::validate() const {
  if (!(mu > 0.0) || !std::isfinite(mu)) throw InvalidArgument("SCAD mu must be > 0");
  if (!(a > 1.0) || !std::isfinite(a)) throw InvalidArgument("SCAD shape a must be > 1");
}

Vector scad_lla_weights(const Eigen::Ref<const Vector>& alpha_hat, const ScadConfig& cfg) {
  cfg.validate();
  Vector w(alpha_hat.size());
  const double hi = cfg.a * cfg.mu;
  for (Index j = 0; j < alpha_hat.size(); ++j) {
    const double m = std::abs(alpha_hat(j));
    if (m < cfg.mu) {
      w(j) = 1.0;
    } else if (m > hi) {
      w(j) = 0.0;
    } else {
      w(j) = (hi - m) / (cfg.mu * (cfg.a - 1.0));
    }
  }
  return w;
}

}  // namespace threshold_sparse
