#include "threshold_sparse/simulation.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <numbers>
#include <thread>

#include "threshold_sparse/errors.hpp"

namespace threshold_sparse {

std::uint64_t split_seed(std::uint64_t master, std::uint64_t stream) noexcept {
  auto mix = [](std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  };
  return mix(mix(master) ^ (stream * 0xD1B54A32D192ED03ULL + 0x632BE59BD9B4E019ULL));
}

Matrix gen_ar1_gaussian(Index n, Index p, double rho, Rng& rng) {
  if (!(std::abs(rho) < 1.0)) throw InvalidArgument("AR(1) correlation must satisfy |rho| < 1");
  if (n < 1 || p < 1) throw InvalidArgument("AR(1) sample needs n, p >= 1");
  std::normal_distribution<double> normal(0.0, 1.0);
  const double innov = std::sqrt(1.0 - rho * rho);
  Matrix x(n, p);
  for (Index i = 0; i < n; ++i) {
    double prev = normal(rng);
    x(i, 0) = prev;
    for (Index j = 1; j < p; ++j) {
      prev = rho * prev + innov * normal(rng);
      x(i, j) = prev;
    }
  }
  return x;
}

const char* to_string(DesignKind d) noexcept {
  switch (d) {
    case DesignKind::Median61:
      return "median";
    case DesignKind::Logit62:
      return "logit";
    case DesignKind::Custom:
      return "custom";
  }
  return "?";
}

DesignKind parse_design(const std::string& s) {
  if (s == "median" || s == "median61") return DesignKind::Median61;
  if (s == "logit" || s == "logit62" || s == "logistic") return DesignKind::Logit62;
  if (s == "custom") return DesignKind::Custom;
  throw InvalidArgument("unknown design '" + s + "' (expected median|logit|custom)");
}

const char* to_string(RiskMethod m) noexcept {
  return m == RiskMethod::ClosedFormConditional ? "closed_form" : "fresh_sample";
}

RiskMethod parse_risk_method(const std::string& s) {
  if (s == "closed_form" || s == "conditional") return RiskMethod::ClosedFormConditional;
  if (s == "fresh_sample" || s == "fresh") return RiskMethod::FreshSample;
  throw InvalidArgument("unknown risk method '" + s + "' (expected closed_form|fresh_sample)");
}

ActiveSet TrueModel::support() const { return active_set(alpha0().as_alpha(), 0.0); }

TrueModel design_truth(DesignKind design, Index p, const GenOptions& opts) {
  if (p < 3) throw InvalidArgument("built-in designs need p >= 3");
  TrueModel t;
  t.beta0 = Vector::Zero(p);
  t.delta0 = Vector::Zero(p);
  t.tau0 = opts.tau0;
  t.direction = IndicatorDirection::Less;
  t.ar_rho = opts.ar_rho;
  switch (design) {
    case DesignKind::Median61:
      t.beta0(0) = 0.5;
      t.beta0(2) = 0.5;
      t.delta0(1) = 1.0;
      t.delta0(2) = 1.0;
      t.spec = LossSpec::quantile(0.5);
      t.noise = NoiseKind::StdNormal;
      break;
    case DesignKind::Logit62:
      t.beta0(0) = 1.5;
      t.beta0(2) = 1.5;
      t.delta0(1) = 3.0;
      t.delta0(2) = 3.0;
      t.spec = LossSpec::logistic();
      t.noise = NoiseKind::Logistic01;
      break;
    case DesignKind::Custom:
      throw InvalidArgument("custom designs carry their own TrueModel");
  }
  if (opts.no_change) t.delta0.setZero();
  return t;
}

namespace {

double draw_noise(NoiseKind kind, Rng& rng) {
  if (kind == NoiseKind::StdNormal) {
    std::normal_distribution<double> normal(0.0, 1.0);
    return normal(rng);
  }
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  double u = unif(rng);
  while (u <= 0.0) u = unif(rng);
  return std::log(u / (1.0 - u));
}

struct SparseCoef {
  std::vector<std::pair<Index, double>> beta;
  std::vector<std::pair<Index, double>> delta;
  double tau = 0.0;

  SparseCoef(const CoefficientPair& c, double t) : tau(t) {
    for (Index j = 0; j < c.beta.size(); ++j) {
      if (c.beta(j) != 0.0) beta.emplace_back(j, c.beta(j));
    }
    for (Index j = 0; j < c.delta.size(); ++j) {
      if (c.delta(j) != 0.0) delta.emplace_back(j, c.delta(j));
    }
  }
  Index max_index() const {
    Index m = -1;
    for (const auto& [j, v] : beta) m = std::max(m, j);
    for (const auto& [j, v] : delta) m = std::max(m, j);
    return m;
  }
  double predict(const std::vector<double>& x, double q, IndicatorDirection d) const {
    double eta = 0.0;
    for (const auto& [j, v] : beta) eta += v * x[static_cast<std::size_t>(j)];
    if (in_regime(q, tau, d)) {
      for (const auto& [j, v] : delta) eta += v * x[static_cast<std::size_t>(j)];
    }
    return eta;
  }
};

}  // namespace

Vector simulate_response(const TrueModel& truth, const Matrix& x, const Vector& q, Rng& rng,
                         bool zero_noise) {
  if (x.cols() != truth.p() || x.rows() != q.size()) {
    throw InvalidArgument("simulate_response: shape mismatch");
  }
  Vector y(x.rows());
  const Vector base = x * truth.beta0;
  const Vector shift = x * truth.delta0;
  for (Index i = 0; i < x.rows(); ++i) {
    const double eta = base(i) + (in_regime(q(i), truth.tau0, truth.direction) ? shift(i) : 0.0);
    const double eps = draw_noise(truth.noise, rng);
    const double e = zero_noise ? 0.0 : eps;
    y(i) = truth.spec.kind == LossKind::Logistic ? (eta + e > 0.0 ? 1.0 : 0.0) : eta + e;
  }
  return y;
}

GeneratedData gen_dataset(DesignKind design, Index n, Index p, Rng& rng, const GenOptions& opts) {
  if (p < 3) throw InvalidArgument("gen_dataset needs p >= 3");
  TrueModel truth = design_truth(design, p, opts);
  Matrix x = gen_ar1_gaussian(n, p, opts.ar_rho, rng);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Vector q(n);
  for (Index i = 0; i < n; ++i) q(i) = unif(rng);
  Vector y = simulate_response(truth, x, q, rng, opts.zero_noise);
  return {Dataset(std::move(y), std::move(x), std::move(q)), std::move(truth)};
}

double normal_check_risk(double gamma, double m) noexcept {
  const double pdf = std::exp(-0.5 * m * m) / std::sqrt(2.0 * std::numbers::pi);
  const double upper = 0.5 * std::erfc(m / std::numbers::sqrt2);  // 1 - Phi(m)
  return gamma * m + pdf - m * upper;
}

double logistic_cross_entropy(double eta0, double eta) noexcept {
  const double p0 = detail::sigmoid(eta0);
  // -p0 log g(eta) - (1 - p0) log(1 - g(eta)) = softplus(eta) - p0 * eta
  return detail::softplus(eta) - p0 * eta;
}

std::vector<double> excess_risks(const TrueModel& truth, std::span<const FittedModel> fits,
                                 const RiskEval& eval, std::uint64_t seed) {
  if (eval.n_val < 1000) throw InvalidArgument("risk evaluation needs n_val >= 1000");
  const Index p = truth.p();
  for (const auto& f : fits) {
    if (f.alpha.beta.size() != p || f.alpha.delta.size() != p) {
      throw InvalidArgument("fit dimension does not match the truth");
    }
    if (f.direction != truth.direction) {
      throw InvalidArgument("fit and truth use different indicator conventions");
    }
  }
  const bool closed = eval.method == RiskMethod::ClosedFormConditional;
  if (closed && truth.spec.kind == LossKind::Quantile && truth.noise != NoiseKind::StdNormal) {
    throw InvalidArgument("closed-form quantile risk needs standard normal noise");
  }
  if (closed && truth.spec.kind == LossKind::Logistic && truth.noise != NoiseKind::Logistic01) {
    throw InvalidArgument("closed-form logistic risk needs logistic noise");
  }

  const SparseCoef true_coef(truth.alpha0(), truth.tau0);
  std::vector<SparseCoef> fit_coef;
  fit_coef.reserve(fits.size());
  Index jmax = true_coef.max_index();
  for (const auto& f : fits) {
    fit_coef.emplace_back(f.alpha, f.tau);
    jmax = std::max(jmax, fit_coef.back().max_index());
  }
  const auto cols = static_cast<std::size_t>(jmax + 1);

  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double innov = std::sqrt(1.0 - truth.ar_rho * truth.ar_rho);
  const double gamma = truth.spec.gamma;
  const double r0 = normal_check_risk(gamma, 0.0);

  std::vector<double> x(cols);
  std::vector<double> acc(fits.size(), 0.0);
  for (Index i = 0; i < eval.n_val; ++i) {
    const double q = unif(rng);
    for (std::size_t j = 0; j < cols; ++j) {
      const double z = normal(rng);
      x[j] = j == 0 ? z : truth.ar_rho * x[j - 1] + innov * z;
    }
    const double eta0 = true_coef.predict(x, q, truth.direction);
    if (closed) {
      for (std::size_t k = 0; k < fits.size(); ++k) {
        const double eta = fit_coef[k].predict(x, q, truth.direction);
        acc[k] += truth.spec.kind == LossKind::Quantile
                      ? normal_check_risk(gamma, eta0 - eta) - r0
                      : logistic_cross_entropy(eta0, eta) - logistic_cross_entropy(eta0, eta0);
      }
    } else {
      const double e = draw_noise(truth.noise, rng);
      const double y = truth.spec.kind == LossKind::Logistic ? (eta0 + e > 0.0 ? 1.0 : 0.0) : eta0 + e;
      const double base = loss_value(truth.spec, y, eta0);
      for (std::size_t k = 0; k < fits.size(); ++k) {
        acc[k] += loss_value(truth.spec, y, fit_coef[k].predict(x, q, truth.direction)) - base;
      }
    }
  }
  for (auto& a : acc) a /= static_cast<double>(eval.n_val);
  return acc;
}

double excess_risk(const TrueModel& truth, const CoefficientPair& alpha, double tau,
                   const RiskEval& eval, std::uint64_t seed) {
  const FittedModel f{alpha, tau, truth.direction};
  return excess_risks(truth, std::span<const FittedModel>(&f, 1), eval, seed).front();
}

ReplicationRecord replication_metrics(const TrueModel& truth, const TwoStepFit& fit,
                                      const OracleFits& oracles, const RiskEval& eval,
                                      std::uint64_t risk_seed) {
  if (fit.direction != truth.direction) {
    throw InvalidArgument("fit and truth use different indicator conventions");
  }
  const Index p = truth.p();
  if (fit.alpha_tilde.p() != p) throw InvalidArgument("fit dimension does not match the truth");

  ReplicationRecord rec;
  const Vector a0 = truth.alpha0().as_alpha();
  const Vector at = fit.alpha_tilde.as_alpha();
  const ActiveSet j0 = truth.support();
  const ActiveSet jt = active_set(at, fit.active_beta.tolerance);

  rec.n_active_total = static_cast<int>(jt.size());
  rec.n_active_beta = static_cast<int>(jt.count_below(p));
  rec.n_active_delta = rec.n_active_total - rec.n_active_beta;
  rec.covers_truth = jt.includes(j0);
  for (const Index j : j0.indices) rec.target_hits.push_back(jt.contains(j));

  const Vector err = (at - a0).cwiseAbs();
  for (Index j = 0; j < err.size(); ++j) {
    if (j0.contains(j)) {
      rec.l1_on_J += err(j);
    } else {
      rec.l1_on_Jc += err(j);
    }
  }
  rec.l1_total = rec.l1_on_J + rec.l1_on_Jc;
  rec.tau_hat = fit.lasso.tau_hat;
  rec.tau_tilde = fit.tau_tilde;
  rec.tau_abs_err = std::abs(fit.lasso.tau_hat - truth.tau0);
  rec.tau_tilde_abs_err = std::abs(fit.tau_tilde - truth.tau0);
  rec.delta_zero = (fit.alpha_tilde.delta.array() == 0.0).all();

  rec.oracle1_l1 = (oracles.oracle1.alpha.as_alpha() - a0).lpNorm<1>();
  rec.oracle2_l1 = (oracles.oracle2.alpha.as_alpha() - a0).lpNorm<1>();
  rec.oracle2_tau_abs_err = std::abs(oracles.oracle2.tau - truth.tau0);

  const std::vector<FittedModel> models = {
      {fit.alpha_tilde, fit.tau_tilde, truth.direction},
      {oracles.oracle1.alpha, oracles.oracle1.tau, truth.direction},
      {oracles.oracle2.alpha, oracles.oracle2.tau, truth.direction},
  };
  const auto risks = excess_risks(truth, models, eval, risk_seed);
  rec.excess_risk = risks[0];
  rec.oracle1_excess_risk = risks[1];
  rec.oracle2_excess_risk = risks[2];
  return rec;
}

void ExperimentConfig::validate() const {
  if (replications < 1) throw InvalidArgument("replications must be >= 1");
  if (n < 2) throw InvalidArgument("n must be >= 2");
  if (p < 3) throw InvalidArgument("p must be >= 3 for the built-in designs");
  if (risk.n_val < 1000) throw InvalidArgument("n_val must be >= 1000");
  if (design == DesignKind::Custom) throw InvalidArgument("custom designs are not simulated");
  fit.validate();
}

ExperimentConfig ExperimentConfig::table_design(DesignKind design, Index p) {
  ExperimentConfig cfg;
  cfg.design = design;
  cfg.p = p;
  cfg.fit.spec = design == DesignKind::Logit62 ? LossSpec::logistic() : LossSpec::quantile(0.5);
  cfg.fit.lambda = 0.03;
  cfg.fit.scad.mu = default_mu(cfg.fit.spec, p, cfg.fit.lambda);
  cfg.fit.scad.a = kDefaultScadA;
  cfg.fit.grid = {0.15, 0.85, {GridKind::Equispaced, 71}};
  cfg.fit.direction = IndicatorDirection::Less;
  return cfg;
}

ReplicationRecord run_replication(const ExperimentConfig& config, std::uint64_t replication) {
  const std::uint64_t seed = split_seed(config.master_seed, replication);
  ReplicationRecord rec;
  const auto start = std::chrono::steady_clock::now();
  try {
    Rng rng(seed);
    const GeneratedData gen = gen_dataset(config.design, config.n, config.p, rng, config.gen);
    const TwoStepFit fit = fit_full(gen.data, config.fit);
    const ActiveSet support = gen.truth.support();
    OracleFits oracles;
    oracles.oracle1 = fit_oracle(gen.data, support, gen.truth.tau0, fit.lasso.grid,
                                 config.fit.direction, config.fit.spec, config.fit.solver);
    oracles.oracle2 = fit_oracle(gen.data, support, std::nullopt, fit.lasso.grid,
                                 config.fit.direction, config.fit.spec, config.fit.solver);
    rec = replication_metrics(gen.truth, fit, oracles, config.risk, split_seed(seed, 0x7269736bULL));
  } catch (const NumericalFailure& e) {
    rec = ReplicationRecord{};
    rec.failed = true;
    rec.failure = e.what();
  } catch (const ExperimentError& e) {
    rec = ReplicationRecord{};
    rec.failed = true;
    rec.failure = e.what();
  }
  rec.replication = replication;
  rec.seed = seed;
  rec.runtime_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                       std::chrono::steady_clock::now() - start)
                       .count();
  return rec;
}

namespace {

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (const double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

double median_of(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 == 1 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

}  // namespace

ExperimentSummary summarize(const std::string& design, Index n, Index p,
                            const std::vector<ReplicationRecord>& records) {
  ExperimentSummary s;
  s.design = design;
  s.n = n;
  s.p = p;
  std::vector<double> risk, o1_risk, o2_risk, total, beta, delta, cover, l1, l1_on, l1_off, tau_err,
      tau_tilde_err, dzero, o1_l1, o2_l1, o2_tau;
  std::vector<std::vector<double>> hits;
  for (const auto& r : records) {
    if (r.failed) {
      ++s.failures;
      continue;
    }
    ++s.completed;
    risk.push_back(r.excess_risk);
    o1_risk.push_back(r.oracle1_excess_risk);
    o2_risk.push_back(r.oracle2_excess_risk);
    total.push_back(r.n_active_total);
    beta.push_back(r.n_active_beta);
    delta.push_back(r.n_active_delta);
    cover.push_back(r.covers_truth ? 1.0 : 0.0);
    l1.push_back(r.l1_total);
    l1_on.push_back(r.l1_on_J);
    l1_off.push_back(r.l1_on_Jc);
    tau_err.push_back(r.tau_abs_err);
    tau_tilde_err.push_back(r.tau_tilde_abs_err);
    dzero.push_back(r.delta_zero ? 1.0 : 0.0);
    o1_l1.push_back(r.oracle1_l1);
    o2_l1.push_back(r.oracle2_l1);
    o2_tau.push_back(r.oracle2_tau_abs_err);
    if (hits.size() < r.target_hits.size()) hits.resize(r.target_hits.size());
    for (std::size_t k = 0; k < r.target_hits.size(); ++k) hits[k].push_back(r.target_hits[k] ? 1.0 : 0.0);
  }

  auto& e = s.estimator;
  e.label = "p=" + std::to_string(p);
  e.mean_excess_risk = mean_of(risk);
  e.median_excess_risk = median_of(risk);
  e.mean_active_total = mean_of(total);
  e.mean_active_beta = mean_of(beta);
  e.mean_active_delta = mean_of(delta);
  e.coverage = mean_of(cover);
  for (const auto& h : hits) e.target_coverage.push_back(mean_of(h));
  e.mean_l1 = mean_of(l1);
  e.mean_l1_on_J = mean_of(l1_on);
  e.mean_l1_on_Jc = mean_of(l1_off);
  e.mean_tau_err = mean_of(tau_err);
  e.mean_tau_tilde_err = mean_of(tau_tilde_err);
  e.frac_delta_zero = mean_of(dzero);

  s.oracle1.label = "Oracle 1";
  s.oracle1.mean_excess_risk = mean_of(o1_risk);
  s.oracle1.median_excess_risk = median_of(o1_risk);
  s.oracle1.mean_l1 = s.oracle1.mean_l1_on_J = mean_of(o1_l1);

  s.oracle2.label = "Oracle 2";
  s.oracle2.mean_excess_risk = mean_of(o2_risk);
  s.oracle2.median_excess_risk = median_of(o2_risk);
  s.oracle2.mean_l1 = s.oracle2.mean_l1_on_J = mean_of(o2_l1);
  s.oracle2.mean_tau_err = mean_of(o2_tau);
  return s;
}

ExperimentResult run_experiment(const ExperimentConfig& config, int threads) {
  config.validate();
  const auto reps = static_cast<std::size_t>(config.replications);
  ExperimentResult out;
  out.records.resize(reps);
  const auto workers = std::clamp<std::size_t>(static_cast<std::size_t>(std::max(threads, 1)), 1, reps);
  if (workers == 1) {
    for (std::size_t r = 0; r < reps; ++r) out.records[r] = run_replication(config, r);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(reps);
    {
      std::vector<std::jthread> pool;
      for (std::size_t t = 0; t < workers; ++t) {
        pool.emplace_back([&] {
          for (std::size_t r = next++; r < reps; r = next++) {
            try {
              out.records[r] = run_replication(config, r);
            } catch (...) {
              errors[r] = std::current_exception();
            }
          }
        });
      }
    }
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }
  out.summary = summarize(to_string(config.design), config.n, config.p, out.records);
  if (out.summary.failures * 10 > reps) {
    throw ExperimentError(std::to_string(out.summary.failures) + " of " + std::to_string(reps) +
                          " replications failed");
  }
  return out;
}

}  // namespace threshold_sparse
