#include "ppsel/solver.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ppsel/errors.hpp"

namespace ppsel {

double prox_hard(double x, double t) {
  if (t < 0.0) throw ConfigError("prox_hard: negative threshold");
  return (x * x > 2.0 * t) ? x : 0.0;
}

double prox_soft(double x, double t) {
  if (t < 0.0) throw ConfigError("prox_soft: negative shift");
  const double mag = std::abs(x) - t;
  return mag > 0.0 ? (x < 0.0 ? -mag : mag) : 0.0;
}

double bb_step(const Eigen::VectorXd& dtheta, const Eigen::VectorXd& dgrad,
               double fallback) {
  const double denom = dgrad.squaredNorm();
  if (denom == 0.0) return fallback;
  return std::clamp(std::abs(dtheta.dot(dgrad)) / denom, 1e-8, 1e2);
}

double penalty_value(const PenaltySpec& spec, const Eigen::VectorXd& beta) {
  double acc = 0.0;
  for (long i = 0; i < beta.size(); ++i) {
    const double w = spec.adaptive_weights.size() ? spec.adaptive_weights[i] : 1.0;
    if (spec.kind == PenaltyKind::L1)
      acc += w * std::abs(beta[i]);
    else if (beta[i] != 0.0)
      acc += w;
  }
  return spec.lambda * acc;
}

std::vector<int> support_of(const Eigen::VectorXd& beta) {
  std::vector<int> s;
  for (long i = 0; i < beta.size(); ++i)
    if (beta[i] != 0.0) s.push_back(static_cast<int>(i));
  return s;
}

Eigen::VectorXd adaptive_weights(const LogLinearModel& pilot) {
  Eigen::VectorXd w(pilot.beta.size());
  for (long i = 0; i < w.size(); ++i)
    w[i] = pilot.beta[i] == 0.0 ? kExcludedWeight : 1.0 / std::abs(pilot.beta[i]);
  return w;
}

std::vector<double> lambda_grid(double lo, double hi, int n) {
  if (!(lo > 0.0) || !(hi > lo)) throw ConfigError("lambda_grid: need 0 < lo < hi");
  if (n < 2) throw ConfigError("lambda_grid: need at least two points");
  std::vector<double> grid(n);
  const double llo = std::log(lo), lhi = std::log(hi);
  for (int i = 0; i < n; ++i)
    grid[i] = std::exp(lhi + (llo - lhi) * i / (n - 1.0));
  grid.front() = hi;
  grid.back() = lo;
  return grid;
}

namespace {

void validate_spec(const FitData& fit, const PenaltySpec& spec) {
  if (spec.lambda < 0.0) throw ConfigError("pgd_solve: negative lambda");
  if (spec.adaptive_weights.size() &&
      spec.adaptive_weights.size() != fit.p())
    throw ConfigError("pgd_solve: adaptive weight count does not match covariates");
  for (long i = 0; i < spec.adaptive_weights.size(); ++i)
    if (!(spec.adaptive_weights[i] >= 0.0) ||
        !std::isfinite(spec.adaptive_weights[i]))
      throw ConfigError("pgd_solve: adaptive weights must be finite and nonnegative");
}

double homogeneous_log_rate(const FitData& fit) {
  if (fit.n_points < 1)
    throw DegenerateDataError("solve_path: empty pattern");
  return std::log(fit.n_points / (fit.p_thin * fit.sv));
}

// The (log-likelihood, score) pair at a path iterate. Carrying it from one
// λ to the next skips re-evaluating the warm start: the numbers are the same
// doubles the previous solve already produced, so path results are bitwise
// unchanged, one evaluation cheaper per grid point.
struct PgdCarry {
  double ll = 0.0;
  Eigen::VectorXd grad;  // empty: nothing carried
};

PgdResult pgd_solve_carry(const FitData& fit, const PenaltySpec& spec,
                          const LogLinearModel& init, const PathConfig& config,
                          PgdCarry* carry) {
  validate_spec(fit, spec);
  if (config.max_iter < 1) throw ConfigError("pgd_solve: max_iter must be positive");
  if (!(config.fixed_step > 0.0)) throw ConfigError("pgd_solve: fixed step must be positive");
  if (init.beta.size() != fit.p())
    throw ConfigError("pgd_solve: init coefficient count does not match covariates");
  if (!std::isfinite(init.log_omega) || !init.beta.allFinite())
    throw ConfigError("pgd_solve: init must be finite");

  const int p = fit.p();
  const bool use_bb = config.step_policy != StepPolicy::Fixed &&
                      !(config.step_policy == StepPolicy::Auto &&
                        spec.kind == PenaltyKind::L0);
  const bool l1 = spec.kind == PenaltyKind::L1;

  Eigen::VectorXd theta(p + 1), grad(p + 1);
  theta[0] = init.log_omega;
  theta.tail(p) = init.beta;

  LikWorkspace ws;
  Eigen::VectorXd beta = theta.tail(p);
  double ll;
  if (carry && carry->grad.size() == p + 1) {
    ll = carry->ll;
    grad = carry->grad;
  } else {
    ll = loglik_and_score(fit, theta[0], beta, grad, ws);
  }
  if (!std::isfinite(ll))
    throw DivergenceError("pgd_solve: non-finite objective at the initial point", 0);

  double best = ll - penalty_value(spec, beta);
  double gamma = use_bb ? config.bb_init : config.fixed_step;
  int stall = 0;

  PgdDiagnostics diag;
  diag.lambda = spec.lambda;
  diag.objective = best;

  Eigen::VectorXd theta_new(p + 1), grad_new(p + 1), beta_new(p);
  for (int t = 0; t < config.max_iter; ++t) {
    theta_new[0] = theta[0] + gamma * grad[0];
    for (int i = 0; i < p; ++i) {
      const double w = spec.adaptive_weights.size() ? spec.adaptive_weights[i] : 1.0;
      const double raw = theta[i + 1] + gamma * grad[i + 1];
      const double gl = gamma * spec.lambda * w;
      theta_new[i + 1] = l1 ? prox_soft(raw, gl) : prox_hard(raw, gl);
    }

    beta_new = theta_new.tail(p);
    const double ll_new = loglik_and_score(fit, theta_new[0], beta_new, grad_new, ws);
    if (!std::isfinite(ll_new))
      throw DivergenceError("pgd_solve: non-finite objective (lambda=" +
                                std::to_string(spec.lambda) + ")",
                            t + 1);
    const double obj_new = ll_new - penalty_value(spec, beta_new);

    diag.iterations = t + 1;
    diag.objective = obj_new;

    const double rel = (theta_new - theta).norm() / std::max(1.0, theta.norm());
    if (use_bb) gamma = bb_step(theta_new - theta, grad_new - grad, gamma);

    theta.swap(theta_new);
    grad.swap(grad_new);
    ll = ll_new;

    if (rel < config.tol) {
      diag.converged = true;
      break;
    }
    if (obj_new > best + config.stall_eps) {
      best = obj_new;
      stall = 0;
    } else if (++stall >= config.stall_window) {
      diag.converged = true;
      diag.stalled = true;
      break;
    }
  }

  if (carry) {
    carry->ll = ll;
    carry->grad = grad;
  }

  PgdResult out;
  out.model.log_omega = theta[0];
  out.model.beta = theta.tail(p);
  out.diag = diag;
  return out;
}

}  // namespace

PgdResult pgd_solve(const FitData& fit, const PenaltySpec& spec,
                    const LogLinearModel& init, const PathConfig& config) {
  return pgd_solve_carry(fit, spec, init, config, nullptr);
}

PathResult solve_path(const FitData& fit, PenaltyKind kind,
                      const Eigen::VectorXd& weights, const PathConfig& config) {
  if (config.lambda_grid.empty())
    throw ConfigError("solve_path: empty lambda grid");
  for (std::size_t i = 0; i < config.lambda_grid.size(); ++i) {
    if (!(config.lambda_grid[i] > 0.0))
      throw ConfigError("solve_path: lambda grid entries must be positive");
    if (i && !(config.lambda_grid[i] < config.lambda_grid[i - 1]))
      throw ConfigError("solve_path: lambda grid must be strictly decreasing");
  }

  LogLinearModel current;
  current.log_omega = homogeneous_log_rate(fit);
  current.beta = Eigen::VectorXd::Zero(fit.p());

  PathResult path;
  path.lambdas = config.lambda_grid;
  path.models.reserve(config.lambda_grid.size());
  PgdCarry carry;  // each solve ends where the next one starts
  for (std::size_t k = 0; k < config.lambda_grid.size(); ++k) {
    PenaltySpec spec;
    spec.kind = kind;
    spec.lambda = config.lambda_grid[k];
    spec.adaptive_weights = weights;
    try {
      PgdResult res = pgd_solve_carry(fit, spec, current, config, &carry);
      current = res.model;
      path.models.push_back(res.model);
      path.supports.push_back(support_of(res.model.beta));
      path.diagnostics.push_back(res.diag);
    } catch (const DivergenceError& e) {
      throw DivergenceError("solve_path: grid entry " + std::to_string(k) + ": " +
                                e.what(),
                            e.iteration);
    }
  }
  return path;
}

}  // namespace ppsel
