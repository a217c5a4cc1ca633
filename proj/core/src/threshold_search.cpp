#include "threshold_sparse/threshold_search.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>

#include "threshold_sparse/errors.hpp"
#include "threshold_sparse/penalty.hpp"

namespace threshold_sparse {

const char* to_string(GridKind k) noexcept {
  switch (k) {
    case GridKind::Observed:
      return "observed";
    case GridKind::QuantileApprox:
      return "quantile";
    case GridKind::Equispaced:
      return "equispaced";
  }
  return "?";
}

GridKind parse_grid_kind(const std::string& s) {
  if (s == "observed") return GridKind::Observed;
  if (s == "quantile" || s == "quantile_approx") return GridKind::QuantileApprox;
  if (s == "equispaced") return GridKind::Equispaced;
  throw InvalidArgument("unknown grid mode '" + s + "' (expected observed|quantile|equispaced)");
}

TauGrid build_grid(const Dataset& data, double low, double high, GridMode mode) {
  if (!std::isfinite(low) || !std::isfinite(high) || !(low < high)) {
    throw InvalidArgument("tau range needs finite tau_low < tau_high");
  }
  if (mode.kind != GridKind::Observed && mode.points < 2) {
    throw InvalidArgument("approximate grids need at least 2 points");
  }
  TauGrid grid;
  grid.mode = mode;
  grid.low = low;
  grid.high = high;
  const Vector& q = data.q();
  switch (mode.kind) {
    case GridKind::Observed:
      for (Index i = 0; i < q.size(); ++i) {
        if (q(i) >= low && q(i) <= high) grid.taus.push_back(q(i));
      }
      break;
    case GridKind::QuantileApprox: {
      std::vector<double> sorted(q.data(), q.data() + q.size());
      std::sort(sorted.begin(), sorted.end());
      const auto n = static_cast<double>(sorted.size());
      for (int j = 1; j <= mode.points; ++j) {
        // inverse empirical cdf at j/N
        const double pos = std::ceil(n * j / mode.points);
        const auto k = static_cast<std::size_t>(std::clamp(pos, 1.0, n)) - 1;
        const double v = sorted[k];
        if (v >= low && v <= high) grid.taus.push_back(v);
      }
      break;
    }
    case GridKind::Equispaced: {
      const double step = (high - low) / (mode.points - 1);
      for (int k = 0; k < mode.points; ++k) {
        grid.taus.push_back(k + 1 == mode.points ? high : low + k * step);
      }
      break;
    }
  }
  std::sort(grid.taus.begin(), grid.taus.end());
  grid.taus.erase(std::unique(grid.taus.begin(), grid.taus.end()), grid.taus.end());
  if (grid.taus.empty()) throw EmptyGridError("tau grid is empty on [" + std::to_string(low) + ", " +
                                              std::to_string(high) + "]");
  return grid;
}

namespace {

void sweep_block(const Dataset& data, const TauGrid& grid, std::size_t first, std::size_t last,
                 IndicatorDirection direction, const LossSpec& spec, double lambda,
                 const std::optional<Vector>& lla_weights, const SolverOptions& opts,
                 std::vector<ProfileRecord>& out) {
  std::optional<Vector> warm;
  std::optional<Vector> warm_dual;
  for (std::size_t k = first; k < last; ++k) {
    const ThresholdDesign design(data, grid.taus[k], direction);
    const PenaltyWeights weights = penalty_weights(design);
    const Matrix x_tau = design.materialize();
    const auto problem = make_problem(x_tau, data.y(), spec, lambda, weights, lla_weights);
    SolveResult res = solve_problem(problem, warm, opts, warm_dual);
    if (res.dual.size() > 0) warm_dual = std::move(res.dual);
    ProfileRecord& rec = out[k];
    rec.tau = grid.taus[k];
    rec.objective = res.objective;
    rec.converged = res.converged;
    rec.kkt_violation = res.kkt_violation;
    rec.iterations = res.iterations;
    rec.alpha = std::move(res.alpha);
    warm = rec.alpha;
  }
}

}  // namespace

ProfileResult profile_objective(const Dataset& data, const TauGrid& grid,
                                IndicatorDirection direction, const LossSpec& spec,
                                double lambda, const std::optional<Vector>& lla_weights,
                                const SolverOptions& opts, const SweepOptions& sweep) {
  if (grid.taus.empty()) throw EmptyGridError("tau grid is empty");
  const std::size_t size = grid.size();
  const std::size_t chunks = std::clamp<std::size_t>(static_cast<std::size_t>(std::max(sweep.chunks, 1)), 1, size);
  std::vector<std::size_t> bounds(chunks + 1);
  for (std::size_t c = 0; c <= chunks; ++c) bounds[c] = c * size / chunks;

  ProfileResult result;
  result.records.resize(size);
  const auto run_chunk = [&](std::size_t c) {
    sweep_block(data, grid, bounds[c], bounds[c + 1], direction, spec, lambda, lla_weights, opts,
                result.records);
  };

  const auto threads = std::min<std::size_t>(static_cast<std::size_t>(std::max(sweep.threads, 1)), chunks);
  if (threads <= 1) {
    for (std::size_t c = 0; c < chunks; ++c) run_chunk(c);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(chunks);
    {
      std::vector<std::jthread> pool;
      for (std::size_t t = 0; t < threads; ++t) {
        pool.emplace_back([&] {
          for (std::size_t c = next++; c < chunks; c = next++) {
            try {
              run_chunk(c);
            } catch (...) {
              errors[c] = std::current_exception();
            }
          }
        });
      }
    }
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  for (const auto& r : result.records) {
    if (!r.converged) ++result.excluded;
  }
  result.argmin_index = argmin_record(result.records);
  return result;
}

std::size_t argmin_record(const std::vector<ProfileRecord>& records) {
  std::optional<std::size_t> best;
  for (std::size_t k = 0; k < records.size(); ++k) {
    if (!records[k].converged) continue;
    if (!best || records[k].objective < records[*best].objective) best = k;
  }
  if (!best) throw ExperimentError("no converged point on the tau grid");
  return *best;
}

TauEstimate argmin_tau(const ProfileResult& profile) {
  const std::size_t k = argmin_record(profile.records);
  return {profile.records[k].tau, CoefficientPair::from_alpha(profile.records[k].alpha)};
}

std::vector<Index> regime_changes(const Vector& q, double tau_a, double tau_b,
                                  IndicatorDirection direction) {
  std::vector<Index> out;
  for (Index i = 0; i < q.size(); ++i) {
    const bool changed = direction == IndicatorDirection::Greater ? (q(i) > tau_a && q(i) <= tau_b)
                                                                  : (q(i) >= tau_a && q(i) < tau_b);
    if (changed) out.push_back(i);
  }
  return out;
}

std::vector<double> risk_curve(const Dataset& data, const CoefficientPair& alpha,
                               const LossSpec& spec, const TauGrid& grid,
                               IndicatorDirection direction) {
  spec.validate();
  if (grid.taus.empty()) throw EmptyGridError("tau grid is empty");
  if (alpha.p() != data.p() || alpha.delta.size() != data.p()) {
    throw InvalidArgument("coefficient length does not match dataset");
  }
  const Vector& y = data.y();
  const Vector& q = data.q();
  const Index n = data.n();
  const Vector base = data.x() * alpha.beta;

  // sparse x'delta: only the active delta columns contribute
  Vector shift = Vector::Zero(n);
  for (Index j = 0; j < alpha.p(); ++j) {
    if (alpha.delta(j) != 0.0) shift.noalias() += alpha.delta(j) * data.x().col(j);
  }
  Vector gain(n);  // loss change when observation i is inside the regime
  double base_sum = 0.0;
  for (Index i = 0; i < n; ++i) {
    const double l0 = loss_value(spec, y(i), base(i));
    base_sum += l0;
    gain(i) = shift(i) == 0.0 ? 0.0 : loss_value(spec, y(i), base(i) + shift(i)) - l0;
  }

  std::vector<Index> order(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  std::sort(order.begin(), order.end(), [&](Index a, Index b) { return q(a) < q(b); });

  const auto nd = static_cast<double>(n);
  std::vector<double> out(grid.size());
  // Greater: regime = {q > tau}, shrinks as tau grows. Less: {q < tau}, grows.
  double regime_sum = 0.0;
  std::size_t cursor = 0;
  if (direction == IndicatorDirection::Greater) {
    for (Index i = 0; i < n; ++i) {
      if (q(i) > grid.taus.front()) regime_sum += gain(i);
    }
    while (cursor < order.size() && q(order[cursor]) <= grid.taus.front()) ++cursor;
    for (std::size_t k = 0; k < grid.size(); ++k) {
      while (cursor < order.size() && q(order[cursor]) <= grid.taus[k]) {
        regime_sum -= gain(order[cursor]);
        ++cursor;
      }
      out[k] = (base_sum + regime_sum) / nd;
    }
  } else {
    for (std::size_t k = 0; k < grid.size(); ++k) {
      while (cursor < order.size() && q(order[cursor]) < grid.taus[k]) {
        regime_sum += gain(order[cursor]);
        ++cursor;
      }
      out[k] = (base_sum + regime_sum) / nd;
    }
  }
  return out;
}

double refit_tau(const Dataset& data, const CoefficientPair& alpha, const LossSpec& spec,
                 const TauGrid& grid, IndicatorDirection direction) {
  const auto curve = risk_curve(data, alpha, spec, grid, direction);
  std::size_t best = 0;
  for (std::size_t k = 1; k < curve.size(); ++k) {
    if (curve[k] < curve[best]) best = k;
  }
  return grid.taus[best];
}

}  // namespace threshold_sparse
