#include <benchmark/benchmark.h>

#include "threshold_sparse/threshold_sparse.hpp"

using namespace threshold_sparse;

namespace {

GeneratedData sample(DesignKind design, Index n, Index p, std::uint64_t seed = 1) {
  Rng rng(split_seed(seed, 0));
  return gen_dataset(design, n, p, rng);
}

// Single fixed-tau solve at the true threshold, cold start.
void BM_SolveQuantile(benchmark::State& state) {
  const auto gen = sample(DesignKind::Median61, state.range(0), state.range(1));
  const auto design = build_threshold_design(gen.data, 0.5, IndicatorDirection::Less);
  const auto w = penalty_weights(design);
  int iters = 0;
  for (auto _ : state) {
    const auto res = solve_penalized(design, LossSpec::quantile(0.5), 0.03, w, std::nullopt,
                                     std::nullopt, SolverOptions{});
    iters = res.iterations;
    benchmark::DoNotOptimize(res.objective);
  }
  state.counters["iterations"] = iters;
}
BENCHMARK(BM_SolveQuantile)->Args({400, 50})->Args({400, 200})->Unit(benchmark::kMillisecond);

void BM_SolveLogistic(benchmark::State& state) {
  const auto gen = sample(DesignKind::Logit62, state.range(0), state.range(1));
  const auto design = build_threshold_design(gen.data, 0.5, IndicatorDirection::Less);
  const auto w = penalty_weights(design);
  int iters = 0;
  for (auto _ : state) {
    const auto res = solve_penalized(design, LossSpec::logistic(), 0.03, w, std::nullopt,
                                     std::nullopt, SolverOptions{});
    iters = res.iterations;
    benchmark::DoNotOptimize(res.objective);
  }
  state.counters["iterations"] = iters;
}
BENCHMARK(BM_SolveLogistic)->Args({400, 50})->Args({400, 200})->Unit(benchmark::kMillisecond);

// Warm-started sweep over the 71-point table grid (first step of the estimator).
void BM_ProfileSweep(benchmark::State& state) {
  const bool logistic = state.range(0) == 1;
  const auto design = logistic ? DesignKind::Logit62 : DesignKind::Median61;
  const auto cfg = ExperimentConfig::table_design(design, 50).fit;
  const auto gen = sample(design, 400, 50);
  for (auto _ : state) {
    const auto lasso = fit_lasso(gen.data, cfg);
    benchmark::DoNotOptimize(lasso.tau_hat);
  }
}
BENCHMARK(BM_ProfileSweep)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

// Closed-form excess risk on a 100k evaluation sample.
void BM_ExcessRisk(benchmark::State& state) {
  const auto design = state.range(0) == 1 ? DesignKind::Logit62 : DesignKind::Median61;
  const auto truth = design_truth(design, 50);
  CoefficientPair alpha = truth.alpha0();
  alpha.beta(0) += 0.05;
  RiskEval eval;
  for (auto _ : state) {
    benchmark::DoNotOptimize(excess_risk(truth, alpha, 0.52, eval, 7));
  }
}
BENCHMARK(BM_ExcessRisk)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
