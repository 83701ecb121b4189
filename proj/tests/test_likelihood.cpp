#include <doctest.h>

#include <cmath>
#include <memory>

#include "ppsel/likelihood.hpp"
#include "ppsel/noise.hpp"

using namespace ppsel;

namespace {

LogLinearModel make_model(double log_omega, std::initializer_list<double> beta) {
  LogLinearModel m;
  m.log_omega = log_omega;
  m.beta = Eigen::VectorXd::Zero(static_cast<long>(beta.size()));
  int i = 0;
  for (double b : beta) m.beta[i++] = b;
  return m;
}

// Dense, implementation-independent restatement of the discretized objective.
double loglik_direct(const FitData& fit, const LogLinearModel& model) {
  double acc = 0.0;
  for (long j = 0; j < fit.m(); ++j) {
    double eta = model.log_omega;
    for (int k = 0; k < fit.p(); ++k) eta += model.beta[k] * fit.quad->z(j, k);
    acc += fit.quad->w[j] * (fit.y[j] * eta - fit.p_thin * std::exp(eta));
  }
  return acc;
}

}  // namespace

TEST_SUITE("likelihood") {

TEST_CASE("empty pattern gives zero responses and the closed-form objective") {
  const CovariateField field = synth_covariates(31, 2, 20, 10, {0, 0, 10, 5}, 1.0);
  PointPattern empty;
  empty.window = {0, 0, 10, 5};
  const FitData fit = build_fit_data(empty, field, empty.window, 0.5);

  CHECK(fit.y.cwiseAbs().maxCoeff() == 0.0);
  CHECK(fit.n_points == 0);

  const LogLinearModel m = make_model(std::log(0.3), {0.0, 0.0});
  CHECK(loglik(fit, m) == doctest::Approx(-0.5 * 0.3 * 50.0).epsilon(1e-12));
}

TEST_CASE("a single point loads exactly its owning node") {
  const CovariateField field = synth_covariates(31, 1, 20, 10, {0, 0, 10, 5}, 1.0);
  PointPattern one;
  one.window = {0, 0, 10, 5};
  one.add(3.3, 2.2);
  const FitData fit = build_fit_data(one, field, one.window);

  const int node = fit.quad->node_of(3.3, 2.2);
  for (long j = 0; j < fit.m(); ++j) {
    if (j == node)
      CHECK(fit.y[j] == doctest::Approx(1.0 / fit.quad->w[j]).epsilon(1e-12));
    else
      CHECK(fit.y[j] == 0.0);
  }
}

TEST_CASE("responses conserve the point count") {
  const CovariateField field = synth_covariates(32, 3, 33, 17, {0, 0, 250, 125}, 20.0);
  LogLinearModel m = make_model(0.0, {0.8, -0.4, 0.0});
  m = calibrate_intercept(m, field, {0, 0, 250, 125}, 140.0);

  Rng rng(41);
  for (int rep = 0; rep < 10; ++rep) {
    const PointPattern pat = sample_poisson(m, field, {0, 0, 250, 125}, rng);
    const Window eroded = erode({0, 0, 250, 125}, 11.0);
    PointPattern inside;
    inside.window = eroded;
    for (int i = 0; i < pat.size(); ++i)
      if (eroded.contains(pat.x[i], pat.y[i])) inside.add(pat.x[i], pat.y[i]);

    const FitData fit = build_fit_data(inside, field, eroded);
    CHECK(std::abs(fit.quad->w.dot(fit.y) - inside.size()) < 1e-9);
    CHECK(fit.g_data[0] == static_cast<double>(inside.size()));
  }
}

TEST_CASE("a point outside the window has no owning node") {
  const CovariateField field = synth_covariates(31, 1, 20, 10, {0, 0, 10, 5}, 1.0);
  PointPattern stray;
  stray.window = {0, 0, 10, 5};
  stray.add(11.0, 2.0);
  CHECK_THROWS_AS(build_fit_data(stray, field, stray.window), DegenerateDataError);
}

TEST_CASE("the data term is invariant to the (v, y) factorization") {
  const CovariateField field = synth_covariates(33, 2, 16, 8, {0, 0, 8, 4}, 1.0);
  PointPattern pat;
  pat.window = {0, 0, 8, 4};
  Rng rng(42);
  for (int i = 0; i < 25; ++i) pat.add(rng.uniform(0.0, 8.0), rng.uniform(0.0, 4.0));
  const FitData fit = build_fit_data(pat, field, pat.window);

  const LogLinearModel m = make_model(-0.7, {0.4, -0.2});
  auto data_term = [&](const Eigen::VectorXd& v, const Eigen::VectorXd& y) {
    double acc = 0.0;
    for (long j = 0; j < fit.m(); ++j) {
      double eta = m.log_omega;
      for (int k = 0; k < fit.p(); ++k) eta += m.beta[k] * fit.quad->z(j, k);
      acc += v[j] * y[j] * eta;
    }
    return acc;
  };
  const double a = data_term(fit.quad->w, fit.y);
  const double b = data_term(2.0 * fit.quad->w, 0.5 * fit.y);
  CHECK(a == doctest::Approx(b).epsilon(1e-12));
}

TEST_CASE("loglik agrees with the dense restatement") {
  const CovariateField field = synth_covariates(34, 3, 16, 8, {0, 0, 8, 4}, 1.0);
  PointPattern pat;
  pat.window = {0, 0, 8, 4};
  Rng rng(43);
  for (int i = 0; i < 30; ++i) pat.add(rng.uniform(0.0, 8.0), rng.uniform(0.0, 4.0));
  const FitData fit = build_fit_data(pat, field, pat.window, 0.5);

  for (int trial = 0; trial < 5; ++trial) {
    LogLinearModel m = make_model(rng.normal(0, 0.5),
                                  {rng.normal(0, 0.5), rng.normal(0, 0.5), 0.0});
    CHECK(loglik(fit, m) == doctest::Approx(loglik_direct(fit, m)).epsilon(1e-10));
  }
}

TEST_CASE("loglik is concave along random segments") {
  const CovariateField field = synth_covariates(35, 2, 16, 8, {0, 0, 8, 4}, 1.0);
  PointPattern pat;
  pat.window = {0, 0, 8, 4};
  Rng rng(44);
  for (int i = 0; i < 40; ++i) pat.add(rng.uniform(0.0, 8.0), rng.uniform(0.0, 4.0));
  const FitData fit = build_fit_data(pat, field, pat.window);

  for (int trial = 0; trial < 20; ++trial) {
    const LogLinearModel a = make_model(rng.normal(0, 1), {rng.normal(0, 1), rng.normal(0, 1)});
    const LogLinearModel b = make_model(rng.normal(0, 1), {rng.normal(0, 1), rng.normal(0, 1)});
    LogLinearModel mid;
    mid.log_omega = 0.5 * (a.log_omega + b.log_omega);
    mid.beta = 0.5 * (a.beta + b.beta);
    CHECK(loglik(fit, mid) >= 0.5 * (loglik(fit, a) + loglik(fit, b)) - 1e-9);
  }
}

TEST_CASE("score matches central finite differences of loglik") {
  Rng rng(45);
  const CovariateField field = synth_covariates(36, 4, 24, 12, {0, 0, 12, 6}, 1.5);
  for (int trial = 0; trial < 20; ++trial) {
    PointPattern pat;
    pat.window = {0, 0, 12, 6};
    const int n = 10 + static_cast<int>(rng.uniform() * 40);
    for (int i = 0; i < n; ++i) pat.add(rng.uniform(0.0, 12.0), rng.uniform(0.0, 6.0));
    const double p_thin = trial % 2 ? 0.5 : 1.0;
    const FitData fit = build_fit_data(pat, field, pat.window, p_thin);

    LogLinearModel m = make_model(rng.normal(0, 0.6),
                                  {rng.normal(0, 0.6), rng.normal(0, 0.6),
                                   rng.normal(0, 0.6), rng.normal(0, 0.6)});
    const Eigen::VectorXd g = score(fit, m);

    const double h = 1e-5;
    auto eval = [&](int coord, double shift) {
      LogLinearModel mm = m;
      if (coord == 0)
        mm.log_omega += shift;
      else
        mm.beta[coord - 1] += shift;
      return loglik(fit, mm);
    };
    for (int coord = 0; coord < 5; ++coord) {
      const double fd = (eval(coord, h) - eval(coord, -h)) / (2.0 * h);
      const double scale = std::max({std::abs(g[coord]), std::abs(fd), 1.0});
      CHECK(std::abs(g[coord] - fd) / scale < 1e-4);
    }
  }
}

TEST_CASE("homogeneous score has the closed form") {
  const CovariateField field = synth_covariates(37, 2, 20, 10, {0, 0, 10, 5}, 1.0);
  PointPattern pat;
  pat.window = {0, 0, 10, 5};
  Rng rng(46);
  for (int i = 0; i < 35; ++i) pat.add(rng.uniform(0.0, 10.0), rng.uniform(0.0, 5.0));
  const FitData fit = build_fit_data(pat, field, pat.window, 0.5);

  const double log_omega = -0.3;
  const LogLinearModel m = make_model(log_omega, {0.0, 0.0});
  const Eigen::VectorXd g = score(fit, m);

  const double omega = std::exp(log_omega);
  CHECK(g[0] == doctest::Approx(pat.size() - 0.5 * omega * fit.sv).epsilon(1e-10));
  for (int k = 0; k < 2; ++k) {
    double sum_data = 0.0;
    for (int i = 0; i < pat.size(); ++i) sum_data += field.at(pat.x[i], pat.y[i])[k];
    const double want = sum_data - 0.5 * omega * fit.svz[k];
    CHECK(g[1 + k] == doctest::Approx(want).epsilon(1e-9));
  }
}

TEST_CASE("fit_unpenalized reaches a stationary point") {
  const CovariateField field = synth_covariates(38, 3, 40, 20, {0, 0, 100, 50}, 10.0);
  LogLinearModel truth = make_model(0.0, {0.9, -0.5, 0.0});
  truth = calibrate_intercept(truth, field, {0, 0, 100, 50}, 300.0);

  Rng rng(47);
  const PointPattern pat = sample_poisson(truth, field, {0, 0, 100, 50}, rng);
  const FitData fit = build_fit_data(pat, field, pat.window);
  const LogLinearModel hat = fit_unpenalized(fit);
  CHECK(score(fit, hat).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("intercept-only fit recovers the closed-form rate") {
  const CovariateField field = synth_covariates(39, 2, 20, 10, {0, 0, 10, 5}, 1.0);
  PointPattern pat;
  pat.window = {0, 0, 10, 5};
  Rng rng(48);
  for (int i = 0; i < 60; ++i) pat.add(rng.uniform(0.0, 10.0), rng.uniform(0.0, 5.0));
  const FitData fit = build_fit_data(pat, field, pat.window, 0.5);

  const LogLinearModel hat = fit_unpenalized_on(fit, {});
  CHECK(hat.omega() == doctest::Approx(60.0 / (0.5 * 50.0)).epsilon(1e-6));
  CHECK(hat.beta.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("large-sample fit recovers the generating coefficients") {
  const CovariateField field = synth_covariates(40, 2, 101, 51, {0, 0, 250, 125}, 20.0);
  const Window win{0, 0, 250, 125};
  LogLinearModel truth = make_model(0.0, {1.0, 0.5});
  truth = calibrate_intercept(truth, field, win, 2000.0);

  Rng rng = Rng::derive(2000, {7});
  const PointPattern pat = sample_poisson(truth, field, win, rng);
  const FitData fit = build_fit_data(pat, field, win);
  const LogLinearModel hat = fit_unpenalized(fit);

  // Asymptotic standard errors from the inverse sensitivity matrix.
  Eigen::VectorXd eta = Eigen::VectorXd::Constant(fit.m(), hat.log_omega);
  for (int k = 0; k < 2; ++k) eta += hat.beta[k] * fit.quad->z.col(k);
  const Eigen::VectorXd rho_w = fit.quad->w.array() * eta.array().exp();
  Eigen::MatrixXd ztil(fit.m(), 3);
  ztil.col(0).setOnes();
  ztil.col(1) = fit.quad->z.col(0);
  ztil.col(2) = fit.quad->z.col(1);
  const Eigen::MatrixXd S = ztil.transpose() * rho_w.asDiagonal() * ztil;
  const Eigen::MatrixXd cov = S.inverse();

  CHECK(std::abs(hat.log_omega - truth.log_omega) < 3.0 * std::sqrt(cov(0, 0)));
  CHECK(std::abs(hat.beta[0] - truth.beta[0]) < 3.0 * std::sqrt(cov(1, 1)));
  CHECK(std::abs(hat.beta[1] - truth.beta[1]) < 3.0 * std::sqrt(cov(2, 2)));
}

TEST_CASE("thinned fits are centered on the full-data fit") {
  const CovariateField field = synth_covariates(41, 2, 64, 32, {0, 0, 160, 80}, 15.0);
  const Window win{0, 0, 160, 80};
  LogLinearModel truth = make_model(0.0, {0.8, -0.6});
  truth = calibrate_intercept(truth, field, win, 1500.0);

  Rng rng = Rng::derive(2001, {3});
  const PointPattern pat = sample_poisson(truth, field, win, rng);
  auto quad = std::make_shared<QuadratureScheme>(make_quadrature(field, win));
  const LogLinearModel full = fit_unpenalized(build_fit_data(pat, quad));

  const int reps = 200;
  Eigen::MatrixXd draws(reps, 2);
  for (int i = 0; i < reps; ++i) {
    Rng sub = Rng::derive(2001, {4, static_cast<std::uint64_t>(i)});
    const PointPattern thinned = p_thin(pat, 0.5, sub);
    const LogLinearModel hat = fit_unpenalized(build_fit_data(thinned, quad, 0.5));
    draws(i, 0) = hat.beta[0];
    draws(i, 1) = hat.beta[1];
  }
  for (int k = 0; k < 2; ++k) {
    const double mean = draws.col(k).mean();
    const double sd = std::sqrt((draws.col(k).array() - mean).square().sum() / (reps - 1));
    CHECK(std::abs(mean - full.beta[k]) < 4.0 * sd / std::sqrt(static_cast<double>(reps)));
  }
}

TEST_CASE("an empty pattern cannot be fitted") {
  const CovariateField field = synth_covariates(42, 2, 16, 8, {0, 0, 8, 4}, 1.0);
  PointPattern empty;
  empty.window = {0, 0, 8, 4};
  const FitData fit = build_fit_data(empty, field, empty.window);
  CHECK_THROWS_AS(fit_unpenalized(fit), DegenerateDataError);
}

}  // TEST_SUITE
