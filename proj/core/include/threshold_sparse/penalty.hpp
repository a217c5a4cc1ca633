#pragma once

#include "threshold_sparse/core_model.hpp"

namespace threshold_sparse {

/// Second-moment weights below this are treated as an empty column.
inline constexpr double kDegeneracyFloor = 1e-10;
inline constexpr double kDefaultScadA = 3.7;

/// Per-coordinate scale D_j(tau) of the l1 penalty over the 2p-wide design.
///
/// `d[j]` is sqrt(mean_i X_ij(tau)^2). Columns whose weight falls below
/// kDegeneracyFloor are `zero_locked`: the coefficient is pinned at 0 and the
/// stored weight is replaced by 1 so downstream arithmetic stays finite.
struct PenaltyWeights {
  Vector d;
  Mask zero_locked;

  Index size() const noexcept { return d.size(); }
  Index locked_count() const noexcept { return zero_locked.count(); }
};

PenaltyWeights penalty_weights(const ThresholdDesign& design);

/// SCAD shape and second-step tuning level.
struct ScadConfig {
  double mu = 0.0;
  double a = kDefaultScadA;

  void validate() const;
};

/// One-step local linear approximation of the SCAD penalty derivative,
/// normalised to [0, 1]: 1 below mu, 0 above a*mu, linear in between.
Vector scad_lla_weights(const Eigen::Ref<const Vector>& alpha_hat, const ScadConfig& cfg);

}  // namespace threshold_sparse
