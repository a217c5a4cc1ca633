#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "support/oracles.hpp"
#include "threshold_sparse/errors.hpp"
#include "threshold_sparse/simulation.hpp"

using namespace threshold_sparse;

namespace {

ExperimentConfig tiny_experiment(DesignKind design, int reps) {
  auto cfg = ExperimentConfig::table_design(design, 5);
  cfg.n = 120;
  cfg.replications = reps;
  cfg.master_seed = 4242;
  cfg.fit.grid.mode.points = 11;
  cfg.risk.n_val = 5000;
  return cfg;
}

TwoStepFit fit_at_truth(const TrueModel& truth) {
  TwoStepFit fit;
  fit.alpha_tilde = truth.alpha0();
  fit.tau_tilde = truth.tau0;
  fit.lasso.tau_hat = truth.tau0;
  fit.direction = truth.direction;
  return fit;
}

OracleFits oracles_at_truth(const TrueModel& truth) {
  OracleFits o;
  o.oracle1 = {truth.alpha0(), truth.tau0, 0.0, true};
  o.oracle2 = o.oracle1;
  return o;
}

}  // namespace

TEST_SUITE("simulation") {
  TEST_CASE("AR(1) rows have the target covariance") {
    Rng rng(1);
    const Matrix x = gen_ar1_gaussian(100000, 2, 0.5, rng);
    const Matrix cov = (x.transpose() * x) / static_cast<double>(x.rows());
    CHECK(std::abs(cov(0, 0) - 1.0) < 0.02);
    CHECK(std::abs(cov(1, 1) - 1.0) < 0.02);
    CHECK(std::abs(cov(0, 1) - 0.5) < 0.02);

    Rng rng0(2);
    const Matrix z = gen_ar1_gaussian(100000, 3, 0.0, rng0);
    const Matrix c0 = (z.transpose() * z) / static_cast<double>(z.rows());
    CHECK(std::abs(c0(0, 1)) < 0.02);
    CHECK(std::abs(c0(1, 2)) < 0.02);

    Rng a(3), b(3);
    CHECK(gen_ar1_gaussian(50, 4, 0.5, a) == gen_ar1_gaussian(50, 4, 0.5, b));
    CHECK_THROWS_AS(gen_ar1_gaussian(5, 2, 1.0, a), InvalidArgument);
  }

  TEST_CASE("median design by hand with zero noise") {
    const TrueModel t = design_truth(DesignKind::Median61, 5);
    Matrix x(2, 5);
    x << 1, 1, 1, 0, 0, 1, 1, 1, 0, 0;
    Vector q(2);
    q << 0.2, 0.9;
    Rng rng(1);
    const Vector y = simulate_response(t, x, q, rng, true);
    CHECK(y(0) == doctest::Approx(3.0));
    CHECK(y(1) == doctest::Approx(1.0));
  }

  TEST_CASE("design truths") {
    const TrueModel m = design_truth(DesignKind::Median61, 10);
    CHECK(m.direction == IndicatorDirection::Less);
    CHECK(m.support().indices == std::vector<Index>{0, 2, 11, 12});
    const TrueModel l = design_truth(DesignKind::Logit62, 10);
    CHECK(l.beta0(0) == 1.5);
    CHECK(l.delta0(2) == 3.0);
    CHECK(l.spec.kind == LossKind::Logistic);
    GenOptions nc;
    nc.no_change = true;
    CHECK((design_truth(DesignKind::Median61, 10, nc).delta0.array() == 0.0).all());
    CHECK_THROWS_AS(design_truth(DesignKind::Median61, 2), InvalidArgument);
    Rng rng(1);
    CHECK_THROWS_AS(gen_dataset(DesignKind::Logit62, 10, 2, rng), InvalidArgument);
  }

  TEST_CASE("logit responses match a direct Monte Carlo of the same probability") {
    Rng rng(split_seed(1, 1));
    const auto gen = gen_dataset(DesignKind::Logit62, 100000, 5, rng);
    const Vector& y = gen.data.y();
    CHECK(((y.array() == 0.0) || (y.array() == 1.0)).all());

    std::mt19937_64 mc(77);
    std::normal_distribution<double> z;
    std::uniform_real_distribution<double> u;
    const int draws = 400000;
    int ones = 0;
    for (int k = 0; k < draws; ++k) {
      const double x1 = z(mc);
      const double x2 = 0.5 * x1 + std::sqrt(0.75) * z(mc);
      const double x3 = 0.5 * x2 + std::sqrt(0.75) * z(mc);
      const double q = u(mc);
      double eta = 1.5 * x1 + 1.5 * x3 + (q < 0.5 ? 3.0 * x2 + 3.0 * x3 : 0.0);
      const double v = u(mc);
      const double eps = std::log(v / (1.0 - v));
      if (eta + eps > 0.0) ++ones;
    }
    CHECK(std::abs(y.mean() - static_cast<double>(ones) / draws) < 0.01);
  }

  TEST_CASE("closed-form check risk matches numerical integration") {
    for (const double m : {-2.0, -1.0, 0.0, 0.5, 2.0}) {
      CHECK(std::abs(normal_check_risk(0.5, m) - oracle::normal_check_integral(0.5, m)) < 1e-6);
      CHECK(std::abs(normal_check_risk(0.3, m) - oracle::normal_check_integral(0.3, m)) < 1e-6);
    }
    CHECK(normal_check_risk(0.5, -1.0) - normal_check_risk(0.5, 0.0) == doctest::Approx(0.18435).epsilon(1e-4));
  }

  TEST_CASE("logistic cross-entropy example") {
    const double r = logistic_cross_entropy(0.0, std::log(3.0)) - logistic_cross_entropy(0.0, 0.0);
    CHECK(r == doctest::Approx(0.83699 - 0.69315).epsilon(1e-4));
  }

  TEST_CASE("excess risk is zero at the truth") {
    for (const auto d : {DesignKind::Median61, DesignKind::Logit62}) {
      const TrueModel t = design_truth(d, 6);
      CHECK(excess_risk(t, t.alpha0(), t.tau0, RiskEval{}, 5) == 0.0);
      const double fresh =
          excess_risk(t, t.alpha0(), t.tau0, RiskEval{RiskMethod::FreshSample, 100000}, 5);
      CHECK(fresh == 0.0);
    }
    CHECK_THROWS_AS(excess_risk(design_truth(DesignKind::Median61, 4),
                                design_truth(DesignKind::Median61, 4).alpha0(), 0.5,
                                RiskEval{RiskMethod::ClosedFormConditional, 999}, 1),
                    InvalidArgument);
  }

  TEST_CASE("closed form agrees with fresh samples") {
    for (const auto d : {DesignKind::Median61, DesignKind::Logit62}) {
      const TrueModel t = design_truth(d, 6);
      CoefficientPair a = t.alpha0();
      a.beta *= 0.7;
      a.delta(1) += 0.4;
      a.beta(4) = -0.3;
      const double closed = excess_risk(t, a, 0.45, RiskEval{RiskMethod::ClosedFormConditional, 1000000}, 11);
      const double fresh = excess_risk(t, a, 0.45, RiskEval{RiskMethod::FreshSample, 1000000}, 12);
      CHECK(closed > 0.0);
      CHECK(std::abs(closed - fresh) < 0.002);
    }
  }

  TEST_CASE("metrics at the truth") {
    const TrueModel t = design_truth(DesignKind::Median61, 6);
    const auto rec = replication_metrics(t, fit_at_truth(t), oracles_at_truth(t), RiskEval{}, 1);
    CHECK(rec.excess_risk == 0.0);
    CHECK(rec.l1_total == 0.0);
    CHECK(rec.covers_truth);
    CHECK(rec.tau_abs_err == 0.0);
    CHECK(rec.n_active_total == 4);
    CHECK(rec.n_active_beta == 2);
    CHECK(rec.n_active_delta == 2);
    CHECK(rec.target_hits == std::vector<bool>{true, true, true, true});
    CHECK(rec.oracle1_excess_risk == 0.0);
  }

  TEST_CASE("metrics with a spurious coefficient") {
    const TrueModel t = design_truth(DesignKind::Median61, 6);
    auto fit = fit_at_truth(t);
    fit.alpha_tilde.beta(5) = 0.1;
    const auto rec = replication_metrics(t, fit, oracles_at_truth(t), RiskEval{}, 1);
    CHECK(rec.n_active_total == 5);
    CHECK(rec.l1_on_Jc == doctest::Approx(0.1));
    CHECK(rec.l1_on_J == 0.0);
    CHECK(rec.covers_truth);
  }

  TEST_CASE("metrics with a missed coefficient") {
    const TrueModel t = design_truth(DesignKind::Median61, 6);
    auto fit = fit_at_truth(t);
    fit.alpha_tilde.delta(2) = 0.0;
    const auto rec = replication_metrics(t, fit, oracles_at_truth(t), RiskEval{}, 1);
    CHECK_FALSE(rec.covers_truth);
    CHECK(rec.target_hits == std::vector<bool>{true, true, true, false});
    CHECK(rec.l1_total == doctest::Approx(rec.l1_on_J + rec.l1_on_Jc).epsilon(1e-12));
    CHECK(rec.excess_risk > 0.0);
  }

  TEST_CASE("metrics reject a convention mismatch") {
    const TrueModel t = design_truth(DesignKind::Median61, 6);
    auto fit = fit_at_truth(t);
    fit.direction = IndicatorDirection::Greater;
    CHECK_THROWS_AS(replication_metrics(t, fit, oracles_at_truth(t), RiskEval{}, 1), InvalidArgument);
  }

  TEST_CASE("one replication summarises to itself") {
    const auto cfg = tiny_experiment(DesignKind::Median61, 1);
    const auto res = run_experiment(cfg, 1);
    REQUIRE(res.records.size() == 1);
    const auto& r = res.records.front();
    REQUIRE_FALSE(r.failed);
    const auto& e = res.summary.estimator;
    CHECK(e.mean_excess_risk == r.excess_risk);
    CHECK(e.median_excess_risk == r.excess_risk);
    CHECK(*e.mean_active_total == r.n_active_total);
    CHECK(*e.coverage == (r.covers_truth ? 1.0 : 0.0));
    CHECK(e.mean_l1 == r.l1_total);
    CHECK(*e.mean_tau_err == r.tau_abs_err);
    CHECK(res.summary.oracle1.mean_excess_risk == r.oracle1_excess_risk);
    CHECK_FALSE(res.summary.oracle1.mean_active_total.has_value());
  }

  TEST_CASE("config validation") {
    auto cfg = tiny_experiment(DesignKind::Median61, 1);
    cfg.replications = 0;
    CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
    cfg = tiny_experiment(DesignKind::Median61, 1);
    cfg.risk.n_val = 10;
    CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
  }
}

TEST_SUITE("simulation properties") {
  TEST_CASE("experiments are reproducible and independent of the thread count") {
    const auto cfg = tiny_experiment(DesignKind::Logit62, 4);
    const auto a = run_experiment(cfg, 1);
    const auto b = run_experiment(cfg, 3);
    REQUIRE(a.records.size() == b.records.size());
    for (std::size_t k = 0; k < a.records.size(); ++k) {
      CHECK(a.records[k].seed == b.records[k].seed);
      CHECK(a.records[k].excess_risk == b.records[k].excess_risk);
      CHECK(a.records[k].l1_total == b.records[k].l1_total);
      CHECK(a.records[k].tau_hat == b.records[k].tau_hat);
    }
    CHECK(a.summary.estimator.mean_excess_risk == b.summary.estimator.mean_excess_risk);
    CHECK(run_replication(cfg, 2).excess_risk == a.records[2].excess_risk);
  }

  TEST_CASE("seeds are split per replication") {
    CHECK(split_seed(1, 0) != split_seed(1, 1));
    CHECK(split_seed(1, 0) != split_seed(2, 0));
    CHECK(split_seed(5, 9) == split_seed(5, 9));
  }

  TEST_CASE("excess risk is non-negative for perturbed fits") {
    std::mt19937_64 rng(8);
    std::normal_distribution<double> z(0.0, 0.3);
    std::uniform_real_distribution<double> u(0.2, 0.8);
    for (const auto d : {DesignKind::Median61, DesignKind::Logit62}) {
      const TrueModel t = design_truth(d, 6);
      for (int k = 0; k < 20; ++k) {
        CoefficientPair a = t.alpha0();
        for (Index j = 0; j < 6; ++j) {
          a.beta(j) += z(rng);
          a.delta(j) += z(rng);
        }
        CHECK(excess_risk(t, a, u(rng), RiskEval{RiskMethod::ClosedFormConditional, 20000}, k) >= -1e-12);
      }
    }
  }

  TEST_CASE("converting truth and fit to the other convention leaves the risk unchanged") {
    std::mt19937_64 rng(10);
    std::normal_distribution<double> z(0.0, 0.3);
    for (const auto d : {DesignKind::Median61, DesignKind::Logit62}) {
      const TrueModel less = design_truth(d, 6);
      TrueModel greater = less;
      const CoefficientPair g0 = flip_direction(less.alpha0());
      greater.beta0 = g0.beta;
      greater.delta0 = g0.delta;
      greater.direction = IndicatorDirection::Greater;
      for (int k = 0; k < 10; ++k) {
        CoefficientPair a = less.alpha0();
        for (Index j = 0; j < 6; ++j) a.delta(j) += z(rng);
        const double rl = excess_risk(less, a, 0.4, RiskEval{RiskMethod::ClosedFormConditional, 20000}, 3);
        const double rg =
            excess_risk(greater, flip_direction(a), 0.4, RiskEval{RiskMethod::ClosedFormConditional, 20000}, 3);
        CHECK(std::abs(rl - rg) <= 1e-10);
      }
      // support splits follow (beta, delta) -> (beta + delta, -delta)
      CHECK(greater.support().indices == std::vector<Index>{0, 1, 2, 7, 8});
    }
  }
}
