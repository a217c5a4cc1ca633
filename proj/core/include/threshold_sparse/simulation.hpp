#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "threshold_sparse/core_model.hpp"
#include "threshold_sparse/losses.hpp"
#include "threshold_sparse/pipeline.hpp"

namespace threshold_sparse {

using Rng = std::mt19937_64;

/// SplitMix64 finaliser applied to (master, stream); gives each replication an
/// independent, reproducible seed without touching any shared generator.
std::uint64_t split_seed(std::uint64_t master, std::uint64_t stream) noexcept;

/// n rows of N(0, Sigma), Sigma_ij = rho^|i-j|, via the AR(1) recursion
/// x_1 = z_1, x_j = rho x_{j-1} + sqrt(1 - rho^2) z_j.
Matrix gen_ar1_gaussian(Index n, Index p, double rho, Rng& rng);

enum class DesignKind : std::uint8_t { Median61, Logit62, Custom };
enum class NoiseKind : std::uint8_t { StdNormal, Logistic01 };

const char* to_string(DesignKind d) noexcept;
DesignKind parse_design(const std::string& s);

/// Data-generating truth in its own indicator convention.
struct TrueModel {
  Vector beta0;
  Vector delta0;
  double tau0 = 0.5;
  IndicatorDirection direction = IndicatorDirection::Less;
  LossSpec spec;
  NoiseKind noise = NoiseKind::StdNormal;
  double ar_rho = 0.5;

  Index p() const noexcept { return beta0.size(); }
  CoefficientPair alpha0() const { return {beta0, delta0}; }
  /// J(alpha0) as indices into the 2p vector.
  ActiveSet support() const;
};

struct GenOptions {
  double tau0 = 0.5;
  double ar_rho = 0.5;
  /// Replace delta0 by 0 (non-identified threshold).
  bool no_change = false;
  /// Test hook: generate all noise as exactly 0.
  bool zero_noise = false;
};

/// Truth for the two built-in designs: median regression with normal noise,
/// and a logistic-noise latent-index binary model.
TrueModel design_truth(DesignKind design, Index p, const GenOptions& opts = {});

/// Responses for given regressors and thresholds under `truth`.
Vector simulate_response(const TrueModel& truth, const Matrix& x, const Vector& q, Rng& rng,
                         bool zero_noise = false);

struct GeneratedData {
  Dataset data;
  TrueModel truth;
};

/// X ~ AR(1) Gaussian rows, Q ~ U(0,1), Y from the design equation. p >= 3.
GeneratedData gen_dataset(DesignKind design, Index n, Index p, Rng& rng, const GenOptions& opts = {});

enum class RiskMethod : std::uint8_t { ClosedFormConditional, FreshSample };

const char* to_string(RiskMethod m) noexcept;
RiskMethod parse_risk_method(const std::string& s);

struct RiskEval {
  RiskMethod method = RiskMethod::ClosedFormConditional;
  Index n_val = 100000;
};

/// E rho_gamma(m + e) for e ~ N(0,1): gamma m + phi(m) - m (1 - Phi(m)).
double normal_check_risk(double gamma, double m) noexcept;

/// Expected logistic loss when P(Y=1) = g(eta0) and the fitted index is eta.
double logistic_cross_entropy(double eta0, double eta) noexcept;

struct FittedModel {
  CoefficientPair alpha;
  double tau = 0.0;
  IndicatorDirection direction = IndicatorDirection::Less;
};

/// Excess risk of several fits on one shared evaluation sample drawn from
/// `seed`. Fits must use the truth's indicator convention.
std::vector<double> excess_risks(const TrueModel& truth, std::span<const FittedModel> fits,
                                 const RiskEval& eval, std::uint64_t seed);

double excess_risk(const TrueModel& truth, const CoefficientPair& alpha, double tau,
                   const RiskEval& eval, std::uint64_t seed);

/// One Monte Carlo replication, Table-1 style columns. Active-set and l1
/// metrics are in the truth's coordinate system.
struct ReplicationRecord {
  std::uint64_t replication = 0;
  std::uint64_t seed = 0;
  bool failed = false;
  std::string failure;

  double excess_risk = 0.0;
  int n_active_total = 0;
  int n_active_beta = 0;
  int n_active_delta = 0;
  bool covers_truth = false;
  /// One flag per index of J(alpha0), ascending.
  std::vector<bool> target_hits;
  double l1_total = 0.0;
  double l1_on_J = 0.0;
  double l1_on_Jc = 0.0;
  double tau_hat = 0.0;
  double tau_tilde = 0.0;
  double tau_abs_err = 0.0;
  double tau_tilde_abs_err = 0.0;
  bool delta_zero = false;

  double oracle1_excess_risk = 0.0;
  double oracle1_l1 = 0.0;
  double oracle2_excess_risk = 0.0;
  double oracle2_l1 = 0.0;
  double oracle2_tau_abs_err = 0.0;

  std::int64_t runtime_ms = 0;
};

struct OracleFits {
  OracleFit oracle1;
  OracleFit oracle2;
};

ReplicationRecord replication_metrics(const TrueModel& truth, const TwoStepFit& fit,
                                      const OracleFits& oracles, const RiskEval& eval,
                                      std::uint64_t risk_seed);

struct ExperimentConfig {
  DesignKind design = DesignKind::Median61;
  Index n = 400;
  Index p = 50;
  int replications = 200;
  std::uint64_t master_seed = 20240601;
  FitConfig fit;
  RiskEval risk;
  GenOptions gen;

  void validate() const;
  /// Table-grade defaults for a built-in design at dimension p.
  static ExperimentConfig table_design(DesignKind design, Index p);
};

/// Means and medians over completed replications. Optional fields are NA for
/// the oracle rows.
struct SummaryRow {
  std::string label;
  double mean_excess_risk = 0.0;
  double median_excess_risk = 0.0;
  std::optional<double> mean_active_total;
  std::optional<double> mean_active_beta;
  std::optional<double> mean_active_delta;
  std::optional<double> coverage;
  std::vector<double> target_coverage;
  double mean_l1 = 0.0;
  double mean_l1_on_J = 0.0;
  std::optional<double> mean_l1_on_Jc;
  std::optional<double> mean_tau_err;
  std::optional<double> mean_tau_tilde_err;
  std::optional<double> frac_delta_zero;
};

struct ExperimentSummary {
  std::string design;
  Index n = 0;
  Index p = 0;
  std::size_t completed = 0;
  std::size_t failures = 0;
  SummaryRow estimator;
  SummaryRow oracle1;
  SummaryRow oracle2;
};

ExperimentSummary summarize(const std::string& design, Index n, Index p,
                            const std::vector<ReplicationRecord>& records);

struct ExperimentResult {
  std::vector<ReplicationRecord> records;
  ExperimentSummary summary;
};

/// Runs one replication in isolation (seed derived from the master seed).
ReplicationRecord run_replication(const ExperimentConfig& config, std::uint64_t replication);

/// All replications, `threads` workers. Records are in replication order and
/// independent of the worker count. Throws ExperimentError above 10% failures.
ExperimentResult run_experiment(const ExperimentConfig& config, int threads = 1);

}  // namespace threshold_sparse
