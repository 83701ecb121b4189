#include "ppsel/likelihood.hpp"

#include <cmath>

namespace ppsel {

FitData build_fit_data(const PointPattern& pattern,
                       std::shared_ptr<const QuadratureScheme> quad,
                       double p_thin_factor) {
  if (!quad) throw ConfigError("build_fit_data: missing quadrature");
  // Thinned data scale the integral by the retention probability; replicated
  // bootstrap samples scale it by the number of drawn patterns, so any
  // positive finite factor is admissible.
  if (!(p_thin_factor > 0.0) || !std::isfinite(p_thin_factor))
    throw ConfigError("build_fit_data: the integral factor must be positive");

  FitData fit;
  fit.quad = std::move(quad);
  fit.p_thin = p_thin_factor;
  fit.n_points = pattern.size();

  const long m = fit.quad->node_count();
  const int p = fit.p();
  Eigen::VectorXd counts = Eigen::VectorXd::Zero(m);
  for (int i = 0; i < pattern.size(); ++i)
    counts[fit.quad->node_of(pattern.x[i], pattern.y[i])] += 1.0;

  fit.y = counts.cwiseQuotient(fit.quad->w);
  fit.g_data = Eigen::VectorXd::Zero(1 + p);
  fit.g_data[0] = static_cast<double>(pattern.size());
  for (long j = 0; j < m; ++j)
    if (counts[j] != 0.0) fit.g_data.tail(p) += counts[j] * fit.quad->z.row(j).transpose();
  fit.sv = fit.quad->w.sum();
  fit.svz = fit.quad->z.transpose() * fit.quad->w;
  return fit;
}

FitData build_fit_data(const PointPattern& pattern, const CovariateField& field,
                       const Window& window, double p_thin_factor) {
  auto quad = std::make_shared<QuadratureScheme>(make_quadrature(field, window));
  return build_fit_data(pattern, std::move(quad), p_thin_factor);
}

namespace {

void check_sizes(const FitData& fit, const Eigen::VectorXd& beta) {
  if (!fit.quad) throw ConfigError("likelihood: fit data has no quadrature");
  if (beta.size() != fit.p())
    throw ConfigError("likelihood: coefficient size does not match the covariates");
}

}  // namespace

double loglik_and_score(const FitData& fit, double log_omega,
                        const Eigen::VectorXd& beta, Eigen::VectorXd& grad,
                        LikWorkspace& ws) {
  check_sizes(fit, beta);
  const int p = fit.p();
  grad.resize(1 + p);

  const bool any_active = (beta.array() != 0.0).any();
  if (!any_active) {
    // Constant intensity omega: integral pieces collapse to cached totals.
    const double omega = std::exp(log_omega);
    const double integral = fit.p_thin * omega * fit.sv;
    grad[0] = fit.g_data[0] - integral;
    grad.tail(p) = fit.g_data.tail(p) - fit.p_thin * omega * fit.svz;
    return fit.g_data[0] * log_omega - integral;
  }

  // One blocked pass: z streams through cache once per evaluation, while the
  // linear predictor, weights, and gradient partials stay resident. This is
  // the whole cost of a proximal-gradient iteration, so it is written for the
  // memory system rather than for brevity.
  const long m = fit.m();
  constexpr long kBlock = 1024;
  ws.eta.resize(m);
  ws.r.resize(m);

  double integral = 0.0;
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(p);
  const Eigen::MatrixXd& z = fit.quad->z;
  for (long lo = 0; lo < m; lo += kBlock) {
    const long len = std::min(kBlock, m - lo);
    auto eta_b = ws.eta.segment(lo, len);
    eta_b.setConstant(log_omega);
    for (int k = 0; k < p; ++k)
      if (beta[k] != 0.0) eta_b += beta[k] * z.col(k).segment(lo, len);
    auto r_b = ws.r.segment(lo, len);
    r_b = fit.quad->w.segment(lo, len).array() * eta_b.array().exp();
    integral += r_b.sum();
    for (int k = 0; k < p; ++k) acc[k] += z.col(k).segment(lo, len).dot(r_b);
  }
  integral *= fit.p_thin;

  double data_term = fit.g_data[0] * log_omega;
  for (int k = 0; k < p; ++k)
    if (beta[k] != 0.0) data_term += fit.g_data[1 + k] * beta[k];

  grad[0] = fit.g_data[0] - integral;
  grad.tail(p) = fit.g_data.tail(p) - fit.p_thin * acc;
  return data_term - integral;
}

double loglik_and_score_on(const FitData& fit, double log_omega,
                           const Eigen::VectorXd& beta_s,
                           const std::vector<int>& support,
                           Eigen::VectorXd& grad, LikWorkspace& ws) {
  if (!fit.quad) throw ConfigError("likelihood: fit data has no quadrature");
  const int k = static_cast<int>(support.size());
  if (beta_s.size() != k)
    throw ConfigError("likelihood: restricted coefficients do not match the support");
  for (int idx : support)
    if (idx < 0 || idx >= fit.p())
      throw ConfigError("likelihood: support index out of range");
  grad.resize(1 + k);

  if (k == 0 || (beta_s.array() == 0.0).all()) {
    const double omega = std::exp(log_omega);
    const double integral = fit.p_thin * omega * fit.sv;
    grad[0] = fit.g_data[0] - integral;
    for (int i = 0; i < k; ++i)
      grad[1 + i] = fit.g_data[1 + support[i]] - fit.p_thin * omega * fit.svz[support[i]];
    return fit.g_data[0] * log_omega - integral;
  }

  ws.eta.resize(fit.m());
  ws.eta.setConstant(log_omega);
  for (int i = 0; i < k; ++i)
    if (beta_s[i] != 0.0) ws.eta += beta_s[i] * fit.quad->z.col(support[i]);
  ws.r = fit.quad->w.array() * ws.eta.array().exp();
  const double integral = fit.p_thin * ws.r.sum();

  double data_term = fit.g_data[0] * log_omega;
  for (int i = 0; i < k; ++i) data_term += fit.g_data[1 + support[i]] * beta_s[i];

  grad[0] = fit.g_data[0] - integral;
  for (int i = 0; i < k; ++i)
    grad[1 + i] = fit.g_data[1 + support[i]] -
                  fit.p_thin * fit.quad->z.col(support[i]).dot(ws.r);
  return data_term - integral;
}

double loglik(const FitData& fit, const LogLinearModel& model) {
  LikWorkspace ws;
  Eigen::VectorXd grad;
  return loglik_and_score(fit, model.log_omega, model.beta, grad, ws);
}

Eigen::VectorXd score(const FitData& fit, const LogLinearModel& model) {
  LikWorkspace ws;
  Eigen::VectorXd grad;
  loglik_and_score(fit, model.log_omega, model.beta, grad, ws);
  return grad;
}

LogLinearModel fit_unpenalized_on(const FitData& fit, const std::vector<int>& support,
                                  const FitOptions& opts) {
  if (fit.n_points < 1)
    throw DegenerateDataError("fit_unpenalized: empty pattern");
  for (int idx : support)
    if (idx < 0 || idx >= fit.p())
      throw ConfigError("fit_unpenalized: support index out of range");

  // Damped Newton ascent. The composite log-likelihood is strictly concave in
  // (log omega, beta): its Hessian is -p_thin * D' diag(r) D for the design
  // D = [1, z_S] and r = w .* exp(eta) > 0, so the Newton direction always
  // ascends and backtracking guarantees global convergence.
  const int k = static_cast<int>(support.size());
  const long m = fit.m();
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(1 + k);
  theta[0] = std::log(fit.n_points / (fit.p_thin * fit.sv));
  if (opts.init) {
    if (opts.init->beta.size() != fit.p())
      throw ConfigError("fit_unpenalized: warm start has the wrong dimension");
    theta[0] = opts.init->log_omega;
    for (int i = 0; i < k; ++i) theta[1 + i] = opts.init->beta[support[i]];
  }

  bool full_support = (k == fit.p());
  for (int i = 0; full_support && i < k; ++i) full_support = (support[i] == i);
  Eigen::MatrixXd zs_store;
  if (!full_support) {
    zs_store.resize(m, k);
    for (int i = 0; i < k; ++i) zs_store.col(i) = fit.quad->z.col(support[i]);
  }
  const Eigen::Ref<const Eigen::MatrixXd> zs =
      full_support ? Eigen::Ref<const Eigen::MatrixXd>(fit.quad->z)
                   : Eigen::Ref<const Eigen::MatrixXd>(zs_store);
  Eigen::VectorXd g_data(1 + k);
  g_data[0] = fit.g_data[0];
  for (int i = 0; i < k; ++i) g_data[1 + i] = fit.g_data[1 + support[i]];

  constexpr long kBlock = 1024;
  Eigen::VectorXd eta(m), r(m), grad(1 + k), delta(1 + k), theta_new(1 + k);
  Eigen::MatrixXd hess(1 + k, 1 + k);
  Eigen::MatrixXd zr_panel(std::min(kBlock, m), k);

  // Objective, score, and the integral weights r at theta. Blocked so the
  // covariates stream through cache once per evaluation.
  const auto evaluate = [&](const Eigen::VectorXd& at, Eigen::VectorXd& g) {
    double integral = 0.0;
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(k);
    for (long lo = 0; lo < m; lo += kBlock) {
      const long len = std::min(kBlock, m - lo);
      auto eta_b = eta.segment(lo, len);
      eta_b.setConstant(at[0]);
      for (int i = 0; i < k; ++i)
        if (at[1 + i] != 0.0) eta_b += at[1 + i] * zs.col(i).segment(lo, len);
      auto r_b = r.segment(lo, len);
      r_b = fit.p_thin * fit.quad->w.segment(lo, len).array() * eta_b.array().exp();
      integral += r_b.sum();
      for (int i = 0; i < k; ++i) acc[i] += zs.col(i).segment(lo, len).dot(r_b);
    }
    g[0] = g_data[0] - integral;
    g.tail(k) = g_data.tail(k) - acc;
    return g_data.dot(at) - integral;
  };

  double ll = evaluate(theta, grad);
  if (!std::isfinite(ll) && opts.init) {
    // A bad warm start is not an error; restart from the homogeneous model.
    theta.setZero();
    theta[0] = std::log(fit.n_points / (fit.p_thin * fit.sv));
    ll = evaluate(theta, grad);
  }
  if (!std::isfinite(ll))
    throw DivergenceError("fit_unpenalized: non-finite objective at the start", 0);

  Eigen::VectorXd grad_new(1 + k);
  for (int iter = 0; iter < opts.max_iter; ++iter) {
    if (grad.cwiseAbs().maxCoeff() < opts.tol) {
      LogLinearModel out;
      out.log_omega = theta[0];
      out.beta = Eigen::VectorXd::Zero(fit.p());
      for (int i = 0; i < k; ++i) out.beta[support[i]] = theta[1 + i];
      return out;
    }

    // Newton system: [D' diag(r) D] delta = grad, assembled from the r of the
    // last evaluation. The first row and column are the gradient's integral
    // parts, already in hand; only the k×k block needs a pass over the
    // covariates, taken in cache-sized panels. The tiny ridge keeps a
    // rank-degenerate design solvable; it only biases the direction, never
    // the stationarity test.
    hess(0, 0) = g_data[0] - grad[0];
    if (k > 0) {
      hess.block(1, 0, k, 1) = g_data.tail(k) - grad.tail(k);
      hess.block(0, 1, 1, k) = hess.block(1, 0, k, 1).transpose();
      hess.block(1, 1, k, k).setZero();
      for (long lo = 0; lo < m; lo += kBlock) {
        const long len = std::min(kBlock, m - lo);
        auto panel = zr_panel.topRows(len);
        panel = zs.middleRows(lo, len).array().colwise() * r.segment(lo, len).array();
        hess.block(1, 1, k, k).noalias() +=
            zs.middleRows(lo, len).transpose() * panel;
      }
    }
    hess.diagonal().array() += 1e-12 * (1.0 + hess.diagonal().maxCoeff());
    delta = hess.ldlt().solve(grad);
    if (!delta.allFinite() || grad.dot(delta) <= 0.0)
      delta = grad / std::max(1.0, hess(0, 0));  // gradient fallback

    // Backtracking on the objective; concavity makes full steps typical.
    double step = 1.0;
    double ll_new = -std::numeric_limits<double>::infinity();
    for (int half = 0; half < 60; ++half) {
      theta_new = theta + step * delta;
      ll_new = evaluate(theta_new, grad_new);
      if (std::isfinite(ll_new) && ll_new >= ll - 1e-12 * std::abs(ll)) break;
      step *= 0.5;
    }
    if (!std::isfinite(ll_new))
      throw DivergenceError("fit_unpenalized: objective left the finite range", iter);

    theta.swap(theta_new);
    grad.swap(grad_new);
    ll = ll_new;
  }

  std::vector<double> last(theta.data(), theta.data() + theta.size());
  throw NonConvergenceError("fit_unpenalized: no stationary point within the iteration budget",
                            opts.max_iter, std::move(last));
}

LogLinearModel fit_unpenalized(const FitData& fit, const FitOptions& opts) {
  std::vector<int> all(fit.p());
  for (int i = 0; i < fit.p(); ++i) all[i] = i;
  return fit_unpenalized_on(fit, all, opts);
}

}  // namespace ppsel
