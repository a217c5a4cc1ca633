#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "threshold_sparse/core_model.hpp"
#include "threshold_sparse/fixed_tau_solver.hpp"
#include "threshold_sparse/losses.hpp"

namespace threshold_sparse {

enum class GridKind : std::uint8_t {
  Observed,        ///< distinct observed q inside the range
  QuantileApprox,  ///< empirical (j/N)-quantiles of q inside the range
  Equispaced,      ///< N evenly spaced points including both ends
};

struct GridMode {
  GridKind kind = GridKind::Equispaced;
  int points = 71;
};

const char* to_string(GridKind k) noexcept;
GridKind parse_grid_kind(const std::string& s);

struct TauGrid {
  std::vector<double> taus;  ///< strictly increasing
  GridMode mode;
  double low = 0.0;
  double high = 1.0;

  std::size_t size() const noexcept { return taus.size(); }
};

TauGrid build_grid(const Dataset& data, double low, double high, GridMode mode);

struct ProfileRecord {
  double tau = 0.0;
  Vector alpha;
  double objective = 0.0;
  bool converged = false;
  double kkt_violation = 0.0;
  int iterations = 0;
};

struct ProfileResult {
  std::vector<ProfileRecord> records;  ///< one per grid point, ascending tau
  std::size_t argmin_index = 0;
  std::size_t excluded = 0;  ///< non-converged points left out of the argmin
};

/// How the grid sweep is split. The grid is cut into `chunks` contiguous
/// blocks, each swept in ascending tau with warm starts (cold start at the
/// block head). The partition depends on `chunks` only, so the result is the
/// same for any `threads`.
struct SweepOptions {
  int chunks = 1;
  int threads = 1;
};

/// Solves the penalized problem at every grid tau and records S_n(alpha(tau), tau).
ProfileResult profile_objective(const Dataset& data, const TauGrid& grid,
                                IndicatorDirection direction, const LossSpec& spec,
                                double lambda, const std::optional<Vector>& lla_weights,
                                const SolverOptions& opts, const SweepOptions& sweep = {});

/// Index of the smallest objective among converged records, ties to the
/// smaller tau. Throws ExperimentError if nothing converged.
std::size_t argmin_record(const std::vector<ProfileRecord>& records);

struct TauEstimate {
  double tau = 0.0;
  CoefficientPair alpha;
};

TauEstimate argmin_tau(const ProfileResult& profile);

/// Unpenalized empirical risk of a fixed alpha at every grid tau, computed
/// with incremental regime updates between neighbouring grid points.
std::vector<double> risk_curve(const Dataset& data, const CoefficientPair& alpha,
                               const LossSpec& spec, const TauGrid& grid,
                               IndicatorDirection direction);

/// Grid minimiser of risk_curve, ties to the smaller tau.
double refit_tau(const Dataset& data, const CoefficientPair& alpha, const LossSpec& spec,
                 const TauGrid& grid, IndicatorDirection direction);

/// Observations whose regime membership differs between tau_a < tau_b.
std::vector<Index> regime_changes(const Vector& q, double tau_a, double tau_b,
                                  IndicatorDirection direction);

}  // namespace threshold_sparse
