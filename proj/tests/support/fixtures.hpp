#pragma once

#include <random>

#include "threshold_sparse/core_model.hpp"

namespace fixtures {

using threshold_sparse::Dataset;
using threshold_sparse::Index;
using threshold_sparse::Matrix;
using threshold_sparse::Vector;

/// Gaussian regressors, uniform q, response from a two-regime linear model
/// (Greater convention) plus noise. Binary responses when `logistic`.
inline Dataset random_dataset(std::mt19937_64& rng, Index n, Index p, bool logistic,
                              double tau0 = 0.5) {
  std::normal_distribution<double> z;
  std::uniform_real_distribution<double> u;
  Matrix x(n, p);
  Vector q(n), y(n);
  Vector beta(p), delta(p);
  for (Index j = 0; j < p; ++j) {
    beta(j) = j % 2 == 0 ? 1.0 : 0.0;
    delta(j) = j == 1 ? 1.5 : 0.0;
  }
  for (Index i = 0; i < n; ++i) {
    q(i) = u(rng);
    for (Index j = 0; j < p; ++j) x(i, j) = z(rng);
    double eta = x.row(i).dot(beta) + (q(i) > tau0 ? x.row(i).dot(delta) : 0.0);
    if (logistic) {
      const double pr = 1.0 / (1.0 + std::exp(-eta));
      y(i) = u(rng) < pr ? 1.0 : 0.0;
    } else {
      y(i) = eta + z(rng);
    }
  }
  return Dataset(y, x, q);
}

}  // namespace fixtures
