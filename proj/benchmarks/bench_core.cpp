// Microbenchmarks for the hot paths: the fused likelihood/score evaluation,
// the proximal-gradient path solve, the samplers, and the K-function
// estimator. All inputs are at benchmark scale (201x101 grid, p=15).

#include <benchmark/benchmark.h>

#include "ppsel/geometry.hpp"
#include "ppsel/likelihood.hpp"
#include "ppsel/rng.hpp"
#include "ppsel/secondorder.hpp"
#include "ppsel/simulate.hpp"
#include "ppsel/solver.hpp"

namespace {

using namespace ppsel;

const Window kWindow{0.0, 0.0, 250.0, 125.0};

const CovariateField& field() {
  static const CovariateField f = synth_covariates(7, 15, 201, 101, kWindow, 12.0);
  return f;
}

LogLinearModel truth_model(double target_n) {
  LogLinearModel m;
  m.beta = Eigen::VectorXd::Zero(field().p());
  m.beta[0] = 1.0;
  m.beta[1] = 0.5;
  return calibrate_intercept(m, field(), kWindow, target_n);
}

const PointPattern& pattern_250() {
  static const PointPattern p = [] {
    Rng rng(42);
    return sample_poisson(truth_model(250.0), field(), kWindow, rng);
  }();
  return p;
}

const FitData& fit_data() {
  static const FitData fit = build_fit_data(pattern_250(), field(), kWindow);
  return fit;
}

void bm_loglik_score(benchmark::State& state) {
  const FitData& fit = fit_data();
  const LogLinearModel model = truth_model(250.0);
  Eigen::VectorXd grad(1 + fit.p());
  LikWorkspace ws;
  for (auto _ : state) {
    const double value = loglik_and_score(fit, model.log_omega, model.beta, grad, ws);
    benchmark::DoNotOptimize(value);
    benchmark::DoNotOptimize(grad);
  }
  state.SetItemsProcessed(state.iterations() * fit.m());
}
BENCHMARK(bm_loglik_score);

void bm_fit_unpenalized(benchmark::State& state) {
  const FitData& fit = fit_data();
  for (auto _ : state) {
    LogLinearModel model = fit_unpenalized(fit);
    benchmark::DoNotOptimize(model);
  }
}
BENCHMARK(bm_fit_unpenalized);

void bm_solve_path(benchmark::State& state) {
  const FitData& fit = fit_data();
  const PenaltyKind kind = state.range(0) == 0 ? PenaltyKind::L0 : PenaltyKind::L1;
  const Eigen::VectorXd weights = adaptive_weights(fit_unpenalized(fit));
  PathConfig pc;
  pc.lambda_grid = lambda_grid(1e-4, 5e2, 35);
  for (auto _ : state) {
    PathResult path = solve_path(fit, kind, weights, pc);
    benchmark::DoNotOptimize(path);
  }
}
BENCHMARK(bm_solve_path)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void bm_sample_poisson(benchmark::State& state) {
  const LogLinearModel model = truth_model(static_cast<double>(state.range(0)));
  Rng rng(11);
  for (auto _ : state) {
    PointPattern p = sample_poisson(model, field(), kWindow, rng);
    benchmark::DoNotOptimize(p);
  }
}
BENCHMARK(bm_sample_poisson)->Arg(250)->Arg(1000);

void bm_sample_thomas(benchmark::State& state) {
  const LogLinearModel model = truth_model(static_cast<double>(state.range(0)));
  const ThomasParams params{4e-3, 1.5};
  Rng rng(11);
  for (auto _ : state) {
    PointPattern p = sample_thomas(model, params, field(), kWindow, rng);
    benchmark::DoNotOptimize(p);
  }
}
BENCHMARK(bm_sample_thomas)->Arg(250)->Arg(1000);

void bm_k_inhom(benchmark::State& state) {
  const PointPattern& pattern = pattern_250();
  const LogLinearModel model = truth_model(250.0);
  const std::vector<double> r = default_r_grid();
  for (auto _ : state) {
    KEstimate k = k_inhom(pattern, model, field(), kWindow, r);
    benchmark::DoNotOptimize(k);
  }
  state.SetItemsProcessed(state.iterations() * pattern.size() * pattern.size());
}
BENCHMARK(bm_k_inhom)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
