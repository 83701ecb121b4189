#include "ppsel/simulate.hpp"

#include <cmath>
#include <numbers>

namespace ppsel {

namespace {

void check_model(const LogLinearModel& model, const CovariateField& field) {
  if (model.beta.size() != field.p())
    throw ConfigError("model has " + std::to_string(model.beta.size()) +
                      " coefficients for " + std::to_string(field.p()) +
                      " covariates");
}

// Per-cell intensity over the whole raster; one exp per cell so samplers can
// do O(1) lookups.
Eigen::VectorXd cell_intensity(const LogLinearModel& model,
                               const CovariateField& field) {
  const long n = static_cast<long>(field.n_x) * field.n_y;
  Eigen::VectorXd eta = Eigen::VectorXd::Constant(n, model.log_omega);
  for (int k = 0; k < field.p(); ++k)
    if (model.beta[k] != 0.0) eta += model.beta[k] * field.values[k];
  return eta.array().exp();
}

// Upper bound of the intensity over every cell that meets the window: the
// rejection envelope must dominate lookups at window locations whose
// containing cell center falls outside the window.
double window_max_intensity(const Eigen::VectorXd& rho,
                            const CovariateField& field, const Window& window) {
  int lo_x = static_cast<int>(std::floor((window.x0 - field.x0) / field.dx));
  int hi_x = static_cast<int>(std::ceil((window.x1 - field.x0) / field.dx)) - 1;
  int lo_y = static_cast<int>(std::floor((window.y0 - field.y0) / field.dy));
  int hi_y = static_cast<int>(std::ceil((window.y1 - field.y0) / field.dy)) - 1;
  lo_x = std::max(lo_x, 0);
  lo_y = std::max(lo_y, 0);
  hi_x = std::min(hi_x, field.n_x - 1);
  hi_y = std::min(hi_y, field.n_y - 1);
  double best = 0.0;
  for (int iy = lo_y; iy <= hi_y; ++iy)
    for (int ix = lo_x; ix <= hi_x; ++ix)
      best = std::max(best, rho[static_cast<long>(iy) * field.n_x + ix]);
  if (!std::isfinite(best))
    throw DivergenceError("intensity overflows on the window", 0);
  return best;
}

}  // namespace

double intensity_at(const LogLinearModel& model, const CovariateField& field,
                    double x, double y) {
  check_model(model, field);
  double eta = model.log_omega;
  const int cell = field.cell_of(x, y);
  for (int k = 0; k < field.p(); ++k)
    if (model.beta[k] != 0.0) eta += model.beta[k] * field.values[k][cell];
  return std::exp(eta);
}

double expected_count(const LogLinearModel& model, const QuadratureScheme& quad) {
  if (model.beta.size() != quad.z.cols())
    throw ConfigError("model size does not match the quadrature covariates");
  Eigen::VectorXd eta = Eigen::VectorXd::Constant(quad.node_count(), model.log_omega);
  for (int k = 0; k < quad.z.cols(); ++k)
    if (model.beta[k] != 0.0) eta += model.beta[k] * quad.z.col(k);
  return quad.w.dot(eta.array().exp().matrix());
}

double expected_count(const LogLinearModel& model, const CovariateField& field,
                      const Window& window) {
  check_model(model, field);
  return expected_count(model, make_quadrature(field, window));
}

LogLinearModel calibrate_intercept(const LogLinearModel& model,
                                   const CovariateField& field,
                                   const Window& window, double target) {
  if (!(target > 0.0))
    throw ConfigError("calibrate_intercept: target count must be positive");
  const double current = expected_count(model, field, window);
  if (!(current > 0.0) || !std::isfinite(current))
    throw DivergenceError("calibrate_intercept: expected count is not usable", 0);
  LogLinearModel out = model;
  out.log_omega += std::log(target / current);
  return out;
}

PointPattern sample_poisson(const LogLinearModel& model, const CovariateField& field,
                            const Window& window, Rng& rng) {
  check_model(model, field);
  const Eigen::VectorXd rho = cell_intensity(model, field);
  const double rho_max = window_max_intensity(rho, field, window);

  PointPattern pattern;
  pattern.window = window;
  if (rho_max == 0.0) return pattern;

  const double dominating = rho_max * window.area();
  if (dominating > 5e8)
    throw DivergenceError("sample_poisson: dominating intensity too large", 0);
  const long n = rng.poisson(dominating);
  for (long i = 0; i < n; ++i) {
    const double x = rng.uniform(window.x0, window.x1);
    const double y = rng.uniform(window.y0, window.y1);
    const double r = rho[field.cell_of(x, y)];
    if (rng.uniform() * rho_max < r) pattern.add(x, y);
  }
  return pattern;
}

PointPattern sample_thomas(const LogLinearModel& model, const ThomasParams& params,
                           const CovariateField& field, const Window& window,
                           Rng& rng) {
  check_model(model, field);
  if (!(params.kappa > 0.0) || params.sigma < 0.0)
    throw ConfigError("sample_thomas: kappa must be positive and sigma non-negative");

  const Eigen::VectorXd rho = cell_intensity(model, field);
  const double rho_max = window_max_intensity(rho, field, window);

  PointPattern pattern;
  pattern.window = window;
  if (rho_max == 0.0) return pattern;

  const Window parent_window = dilate(window, 4.0 * params.sigma);
  const double parent_mean = params.kappa * parent_window.area();
  const double per_parent = rho_max / params.kappa;
  if (parent_mean > 5e8 || parent_mean * per_parent > 5e8)
    throw DivergenceError("sample_thomas: dominating intensity too large", 0);

  const long n_parents = rng.poisson(parent_mean);
  for (long i = 0; i < n_parents; ++i) {
    const double px = rng.uniform(parent_window.x0, parent_window.x1);
    const double py = rng.uniform(parent_window.y0, parent_window.y1);
    const long n_prop = rng.poisson(per_parent);
    for (long m = 0; m < n_prop; ++m) {
      const double x = px + rng.normal(0.0, params.sigma);
      const double y = py + rng.normal(0.0, params.sigma);
      if (!window.contains(x, y)) continue;
      const double r = rho[field.cell_of(x, y)];
      if (rng.uniform() * rho_max < r) pattern.add(x, y);
    }
  }
  return pattern;
}

double thomas_pcf(const ThomasParams& params, double r) {
  if (!(params.kappa > 0.0) || !(params.sigma > 0.0))
    throw ConfigError("thomas_pcf: kappa and sigma must be positive");
  const double s2 = params.sigma * params.sigma;
  return 1.0 + std::exp(-r * r / (4.0 * s2)) /
                   (4.0 * std::numbers::pi * params.kappa * s2);
}

double thomas_K(const ThomasParams& params, double r) {
  if (!(params.kappa > 0.0) || !(params.sigma > 0.0))
    throw ConfigError("thomas_K: kappa and sigma must be positive");
  const double s2 = params.sigma * params.sigma;
  return std::numbers::pi * r * r +
         (1.0 - std::exp(-r * r / (4.0 * s2))) / params.kappa;
}

}  // namespace ppsel
