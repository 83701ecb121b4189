#include <doctest.h>

#include <cmath>
#include <functional>

#include "ppsel/solver.hpp"

using namespace ppsel;

namespace {

struct Problem {
  CovariateField field;
  PointPattern pattern;
  FitData fit;
};

// Small Poisson draw with the leading covariates active, for solver checks.
Problem make_problem(std::uint64_t seed, int p, double target,
                     std::initializer_list<double> beta_true) {
  const Window win{0, 0, 20, 10};
  Problem pr{synth_covariates(seed, p, 40, 20, win, 2.0), {}, {}};
  LogLinearModel truth;
  truth.beta = Eigen::VectorXd::Zero(p);
  int i = 0;
  for (double b : beta_true) truth.beta[i++] = b;
  truth = calibrate_intercept(truth, pr.field, win, target);
  Rng rng = Rng::derive(seed, {99});
  pr.pattern = sample_poisson(truth, pr.field, win, rng);
  pr.fit = build_fit_data(pr.pattern, pr.field, win);
  return pr;
}

double objective(const FitData& fit, const PenaltySpec& spec,
                 const LogLinearModel& m) {
  return loglik(fit, m) - penalty_value(spec, m.beta);
}

// Ternary search for the maximizer of a concave 1-d function.
double line_max(const std::function<double(double)>& f, double lo, double hi) {
  for (int it = 0; it < 150; ++it) {
    const double m1 = lo + (hi - lo) / 3.0, m2 = hi - (hi - lo) / 3.0;
    if (f(m1) < f(m2))
      lo = m1;
    else
      hi = m2;
  }
  return 0.5 * (lo + hi);
}

// Cyclic coordinate ascent on the soft-penalized objective; exact for the
// convex case, used as an independent oracle.
LogLinearModel cd_solve_l1(const FitData& fit, double lambda) {
  LogLinearModel m;
  m.log_omega = std::log(fit.n_points / (fit.p_thin * fit.sv));
  m.beta = Eigen::VectorXd::Zero(fit.p());
  PenaltySpec spec{PenaltyKind::L1, lambda, {}};
  for (int sweep = 0; sweep < 400; ++sweep) {
    double moved = 0.0;
    for (int coord = 0; coord <= fit.p(); ++coord) {
      auto f = [&](double v) {
        LogLinearModel mm = m;
        if (coord == 0)
          mm.log_omega = v;
        else
          mm.beta[coord - 1] = v;
        return objective(fit, spec, mm);
      };
      const double old = coord == 0 ? m.log_omega : m.beta[coord - 1];
      double next = line_max(f, old - 8.0, old + 8.0);
      if (std::abs(next) < 1e-11) next = 0.0;
      moved = std::max(moved, std::abs(next - old));
      if (coord == 0)
        m.log_omega = next;
      else
        m.beta[coord - 1] = next;
    }
    if (moved < 1e-11) break;
  }
  return m;
}

}  // namespace

TEST_SUITE("solver") {

TEST_CASE("hard threshold keeps only decisively large coordinates") {
  CHECK(prox_hard(2.0, 0.5) == 2.0);
  CHECK(prox_hard(0.9, 0.5) == 0.0);
  CHECK(prox_hard(0.0, 0.5) == 0.0);
  CHECK(prox_hard(-2.0, 0.5) == -2.0);
  // Boundary x² = 2t resolves to the sparse branch.
  CHECK(prox_hard(1.0, 0.5) == 0.0);
  CHECK(prox_hard(3.0, 0.0) == 3.0);
  CHECK_THROWS_AS(prox_hard(1.0, -0.1), ConfigError);
}

TEST_CASE("soft threshold shrinks toward zero") {
  CHECK(prox_soft(2.0, 0.5) == 1.5);
  CHECK(prox_soft(-0.3, 0.5) == 0.0);
  CHECK(prox_soft(0.0, 0.5) == 0.0);
  CHECK(prox_soft(-2.0, 0.5) == -1.5);
  CHECK(prox_soft(0.5, 0.5) == 0.0);
  CHECK_THROWS_AS(prox_soft(1.0, -0.1), ConfigError);
}

TEST_CASE("prox maps match a dense grid search of their minimizations") {
  Rng rng(71);
  const double step = 1e-4;
  for (int trial = 0; trial < 100; ++trial) {
    const double x = rng.uniform(-8.0, 8.0);
    const double t = rng.uniform(0.0, 6.0);

    double best_hard = 0.0, best_hard_val = 1e300;
    double best_soft = 0.0, best_soft_val = 1e300;
    for (double v = -10.0; v <= 10.0 + step / 2; v += step) {
      const double quad = 0.5 * (v - x) * (v - x);
      const double hard = quad + (std::abs(v) > step / 2 ? t : 0.0);
      const double soft = quad + t * std::abs(v);
      if (hard < best_hard_val) best_hard_val = hard, best_hard = v;
      if (soft < best_soft_val) best_soft_val = soft, best_soft = v;
    }
    CHECK(std::abs(prox_hard(x, t) - best_hard) <= step + 1e-12);
    CHECK(std::abs(prox_soft(x, t) - best_soft) <= step + 1e-12);
  }
}

TEST_CASE("bb_step evaluates the scalar secant ratio with clamping") {
  Eigen::VectorXd db(2), dg(2);
  db << 1, 0;
  dg << 2, 0;
  CHECK(bb_step(db, dg, 1e-3) == doctest::Approx(0.5).epsilon(1e-15));

  db << 1, 0;
  dg << 0, 3;  // orthogonal: ratio 0 clamps to the floor
  CHECK(bb_step(db, dg, 1e-3) == 1e-8);

  for (double c : {1e-6, 0.02, 1.0, 37.0}) {
    dg << 1.3, -0.7;
    db = c * dg;
    CHECK(bb_step(db, dg, 1e-3) == doctest::Approx(std::max(c, 1e-8)).epsilon(1e-12));
  }

  dg.setZero();
  CHECK(bb_step(db, dg, 0.025) == 0.025);  // degenerate secant keeps the old step

  dg << 1.3, -0.7;
  CHECK(bb_step(1e9 * dg, dg, 1e-3) == 1e2);  // ceiling
}

TEST_CASE("penalty bookkeeping: value, support, adaptive weights, grid") {
  Eigen::VectorXd beta(4);
  beta << 0.5, 0.0, -2.0, 1e-14;
  CHECK(support_of(beta) == std::vector<int>{0, 2, 3});

  PenaltySpec l0{PenaltyKind::L0, 2.0, {}};
  CHECK(penalty_value(l0, beta) == doctest::Approx(6.0).epsilon(1e-15));
  PenaltySpec l1{PenaltyKind::L1, 2.0, {}};
  CHECK(penalty_value(l1, beta) == doctest::Approx(5.0 + 2e-14).epsilon(1e-12));

  Eigen::VectorXd w(4);
  w << 1, 10, 100, 1000;
  l1.adaptive_weights = w;
  CHECK(penalty_value(l1, beta) ==
        doctest::Approx(2.0 * (0.5 + 200.0 + 1e-11)).epsilon(1e-12));

  LogLinearModel pilot;
  pilot.beta = beta;
  const Eigen::VectorXd aw = adaptive_weights(pilot);
  CHECK(aw[0] == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(aw[1] == kExcludedWeight);
  CHECK(aw[2] == doctest::Approx(0.5).epsilon(1e-15));

  const std::vector<double> grid = lambda_grid(1e-4, 5e2, 35);
  CHECK(grid.size() == 35);
  CHECK(grid.front() == 5e2);
  CHECK(grid.back() == 1e-4);
  for (std::size_t i = 1; i < grid.size(); ++i) {
    CHECK(grid[i] < grid[i - 1]);
    if (i >= 2)
      CHECK(grid[i] / grid[i - 1] ==
            doctest::Approx(grid[i - 1] / grid[i - 2]).epsilon(1e-9));
  }
  CHECK_THROWS_AS(lambda_grid(0.0, 1.0, 5), ConfigError);
  CHECK_THROWS_AS(lambda_grid(2.0, 1.0, 5), ConfigError);
}

TEST_CASE("pgd at lambda=0 agrees with the unpenalized fit") {
  const Problem pr = make_problem(301, 3, 120.0, {0.8, -0.5});
  const LogLinearModel direct = fit_unpenalized(pr.fit);

  PathConfig cfg;
  cfg.tol = 1e-8;
  LogLinearModel init;
  init.log_omega = std::log(pr.fit.n_points / pr.fit.sv);
  init.beta = Eigen::VectorXd::Zero(3);
  for (PenaltyKind kind : {PenaltyKind::L1, PenaltyKind::L0}) {
    cfg.step_policy = StepPolicy::BB;  // lambda=0 makes both penalties vacuous
    const PgdResult res = pgd_solve(pr.fit, {kind, 0.0, {}}, init, cfg);
    CHECK(std::abs(res.model.log_omega - direct.log_omega) < 1e-4);
    for (int i = 0; i < 3; ++i)
      CHECK(std::abs(res.model.beta[i] - direct.beta[i]) < 1e-4);
  }
}

TEST_CASE("a dominating lambda yields the intercept-only model") {
  const Problem pr = make_problem(302, 4, 100.0, {0.7, -0.4});
  PathConfig cfg;
  LogLinearModel init;
  init.log_omega = std::log(pr.fit.n_points / pr.fit.sv);
  init.beta = Eigen::VectorXd::Zero(4);
  for (PenaltyKind kind : {PenaltyKind::L1, PenaltyKind::L0}) {
    const PgdResult res = pgd_solve(pr.fit, {kind, 1e6, {}}, init, cfg);
    CHECK(support_of(res.model.beta).empty());
    CHECK(res.model.omega() ==
          doctest::Approx(pr.fit.n_points / pr.fit.sv).epsilon(1e-3));
    CHECK(res.diag.converged);
  }
}

TEST_CASE("pgd L1 solutions match coordinate descent") {
  const Problem pr = make_problem(303, 2, 90.0, {0.9, -0.6});
  PathConfig cfg;
  cfg.tol = 1e-9;
  LogLinearModel init;
  init.log_omega = std::log(pr.fit.n_points / pr.fit.sv);
  init.beta = Eigen::VectorXd::Zero(2);

  for (double lambda : {0.5, 2.0, 8.0}) {
    const PgdResult res = pgd_solve(pr.fit, {PenaltyKind::L1, lambda, {}}, init, cfg);
    const LogLinearModel oracle = cd_solve_l1(pr.fit, lambda);
    CHECK(std::abs(res.model.log_omega - oracle.log_omega) < 1e-4);
    for (int i = 0; i < 2; ++i)
      CHECK(std::abs(res.model.beta[i] - oracle.beta[i]) < 1e-4);
  }
}

TEST_CASE("pgd L1 satisfies the subgradient conditions at convergence") {
  const Problem pr = make_problem(304, 5, 150.0, {0.8, -0.5});
  PathConfig cfg;
  cfg.tol = 1e-9;
  LogLinearModel init;
  init.log_omega = std::log(pr.fit.n_points / pr.fit.sv);
  init.beta = Eigen::VectorXd::Zero(5);

  for (double lambda : {1.0, 5.0, 20.0}) {
    const PgdResult res = pgd_solve(pr.fit, {PenaltyKind::L1, lambda, {}}, init, cfg);
    const Eigen::VectorXd g = score(pr.fit, res.model);
    CHECK(std::abs(g[0]) < 1e-3);
    for (int i = 0; i < 5; ++i) {
      const double b = res.model.beta[i];
      if (b != 0.0)
        CHECK(std::abs(g[1 + i] - lambda * (b > 0 ? 1.0 : -1.0)) < 1e-3);
      else
        CHECK(std::abs(g[1 + i]) < lambda + 1e-3);
    }
  }
}

TEST_CASE("pgd L0 lands on a hard-threshold fixed point") {
  const Problem pr = make_problem(305, 4, 140.0, {0.9, -0.6});
  PathConfig cfg;
  cfg.tol = 1e-9;
  LogLinearModel init;
  init.log_omega = std::log(pr.fit.n_points / pr.fit.sv);
  init.beta = Eigen::VectorXd::Zero(4);

  for (double lambda : {2.0, 5.0, 10.0}) {
    const PenaltySpec spec{PenaltyKind::L0, lambda, {}};
    const PgdResult res = pgd_solve(pr.fit, spec, init, cfg);
    const Eigen::VectorXd g = score(pr.fit, res.model);
    CHECK(std::abs(g[0]) < 1e-3);
    for (int i = 0; i < 4; ++i) {
      if (res.model.beta[i] != 0.0)
        CHECK(std::abs(g[1 + i]) < 1e-3);  // active coordinates are stationary
      else  // zeroed coordinates fail the keep test x² > 2γλw
        CHECK(cfg.fixed_step * g[1 + i] * g[1 + i] <= 2.0 * lambda + 1e-6);
    }
  }
}

TEST_CASE("pgd L0 output is a single-coordinate local maximum") {
  const Problem pr = make_problem(305, 4, 140.0, {0.9, -0.6});
  PathConfig cfg;
  cfg.tol = 1e-9;
  LogLinearModel init;
  init.log_omega = std::log(pr.fit.n_points / pr.fit.sv);
  init.beta = Eigen::VectorXd::Zero(4);

  // The probe is the quadratic keep test evaluated on the exact objective, so
  // it binds where γ matches the local curvature; λ here keeps every zeroed
  // coordinate's γ·g² below λw, outside the model-mismatch band (λw, 2λw).
  for (double lambda : {2.0, 5.0}) {
    const PenaltySpec spec{PenaltyKind::L0, lambda, {}};
    const PgdResult res = pgd_solve(pr.fit, spec, init, cfg);
    const double base = objective(pr.fit, spec, res.model);
    const Eigen::VectorXd g = score(pr.fit, res.model);

    for (int i = 0; i < 4; ++i) {
      LogLinearModel probe = res.model;
      if (res.model.beta[i] != 0.0)
        probe.beta[i] = 0.0;  // drop an active term
      else
        probe.beta[i] = cfg.fixed_step * g[1 + i];  // restore at its step value
      CHECK(objective(pr.fit, spec, probe) <= base + 1e-6);
    }
  }
}

TEST_CASE("adaptive weights exclude covariates with huge penalties") {
  const Problem pr = make_problem(306, 3, 130.0, {1.0, 0.0});
  Eigen::VectorXd w(3);
  w << 1.0, kExcludedWeight, kExcludedWeight;
  PathConfig cfg;
  LogLinearModel init;
  init.log_omega = std::log(pr.fit.n_points / pr.fit.sv);
  init.beta = Eigen::VectorXd::Zero(3);
  const PgdResult res =
      pgd_solve(pr.fit, {PenaltyKind::L1, 1e-4, w}, init, cfg);
  CHECK(res.model.beta[0] != 0.0);
  CHECK(res.model.beta[1] == 0.0);
  CHECK(res.model.beta[2] == 0.0);
}

TEST_CASE("the path starts empty and ends at the full support") {
  const Problem pr = make_problem(307, 4, 160.0, {0.9, -0.7});
  const LogLinearModel full = fit_unpenalized(pr.fit);

  PathConfig cfg;
  cfg.lambda_grid = lambda_grid(1e-6, 1e4, 25);
  const PathResult path =
      solve_path(pr.fit, PenaltyKind::L1, Eigen::VectorXd(), cfg);

  CHECK(path.supports.front().empty());
  std::vector<int> want;
  for (int i = 0; i < 4; ++i)
    if (std::abs(full.beta[i]) > 1e-8) want.push_back(i);
  CHECK(path.supports.back() == want);
  CHECK(path.models.size() == 25);
  CHECK(path.diagnostics.size() == 25);
  for (const auto& d : path.diagnostics) CHECK(d.converged);
}

TEST_CASE("warm and cold starts agree on a convex path") {
  const Problem pr = make_problem(308, 5, 150.0, {0.9, -0.6});
  PathConfig cfg;
  cfg.tol = 1e-6;
  cfg.lambda_grid = lambda_grid(1e-3, 50.0, 20);

  const PathResult warm =
      solve_path(pr.fit, PenaltyKind::L1, Eigen::VectorXd(), cfg);

  LogLinearModel cold_init;
  cold_init.log_omega = std::log(pr.fit.n_points / pr.fit.sv);
  cold_init.beta = Eigen::VectorXd::Zero(5);
  for (std::size_t k = 0; k < cfg.lambda_grid.size(); ++k) {
    const PgdResult cold = pgd_solve(
        pr.fit, {PenaltyKind::L1, cfg.lambda_grid[k], {}}, cold_init, cfg);
    CHECK(support_of(cold.model.beta) == warm.supports[k]);
  }
}

TEST_CASE("stall detection ends flat optimizations") {
  const Problem pr = make_problem(309, 2, 80.0, {0.5});
  PathConfig cfg;
  cfg.tol = 0.0;  // unreachable: force the stall path
  cfg.stall_window = 50;
  LogLinearModel init;
  init.log_omega = std::log(pr.fit.n_points / pr.fit.sv);
  init.beta = Eigen::VectorXd::Zero(2);
  const PgdResult res = pgd_solve(pr.fit, {PenaltyKind::L1, 1.0, {}}, init, cfg);
  CHECK(res.diag.converged);
  CHECK(res.diag.stalled);
  CHECK(res.diag.iterations < cfg.max_iter);
}

TEST_CASE("hitting max_iter reports non-convergence without throwing") {
  const Problem pr = make_problem(310, 2, 80.0, {0.5});
  PathConfig cfg;
  cfg.tol = 0.0;
  cfg.max_iter = 3;
  LogLinearModel init;
  init.log_omega = std::log(pr.fit.n_points / pr.fit.sv);
  init.beta = Eigen::VectorXd::Zero(2);
  const PgdResult res = pgd_solve(pr.fit, {PenaltyKind::L1, 1.0, {}}, init, cfg);
  CHECK_FALSE(res.diag.converged);
  CHECK(res.diag.iterations == 3);
}

TEST_CASE("an absurd fixed step diverges loudly") {
  const Problem pr = make_problem(311, 2, 80.0, {0.5});
  PathConfig cfg;
  cfg.step_policy = StepPolicy::Fixed;
  cfg.fixed_step = 1e6;
  LogLinearModel init;
  init.log_omega = std::log(pr.fit.n_points / pr.fit.sv);
  init.beta = Eigen::VectorXd::Zero(2);
  CHECK_THROWS_AS(pgd_solve(pr.fit, {PenaltyKind::L1, 1e-3, {}}, init, cfg),
                  DivergenceError);
}

TEST_CASE("configuration errors are rejected up front") {
  const Problem pr = make_problem(312, 2, 80.0, {0.5});
  LogLinearModel init;
  init.log_omega = 0.0;
  init.beta = Eigen::VectorXd::Zero(2);
  PathConfig cfg;

  CHECK_THROWS_AS(pgd_solve(pr.fit, {PenaltyKind::L1, -1.0, {}}, init, cfg),
                  ConfigError);
  Eigen::VectorXd bad(3);
  bad.setOnes();
  CHECK_THROWS_AS(pgd_solve(pr.fit, {PenaltyKind::L1, 1.0, bad}, init, cfg),
                  ConfigError);

  cfg.lambda_grid = {1.0, 2.0};  // increasing
  CHECK_THROWS_AS(solve_path(pr.fit, PenaltyKind::L1, Eigen::VectorXd(), cfg),
                  ConfigError);
  cfg.lambda_grid.clear();
  CHECK_THROWS_AS(solve_path(pr.fit, PenaltyKind::L1, Eigen::VectorXd(), cfg),
                  ConfigError);

  PointPattern empty;
  empty.window = pr.pattern.window;
  const FitData nofit = build_fit_data(empty, pr.field, empty.window);
  cfg.lambda_grid = {2.0, 1.0};
  CHECK_THROWS_AS(solve_path(nofit, PenaltyKind::L1, Eigen::VectorXd(), cfg),
                  DegenerateDataError);
}

}  // TEST_SUITE
