#pragma once

#include <Eigen/Dense>

#include "ppsel/geometry.hpp"
#include "ppsel/rng.hpp"

namespace ppsel {

// Log-linear intensity rho(u) = omega * exp(beta' z(u)) with covariates read
// from the raster stack by containing cell. beta has one entry per raster;
// exact zeros mark excluded covariates.
struct LogLinearModel {
  double log_omega = 0.0;
  Eigen::VectorXd beta;

  double omega() const { return std::exp(log_omega); }
};

// Thomas cluster process: parents homogeneous Poisson(kappa), each daughter
// displaced by an isotropic Gaussian of scale sigma.
struct ThomasParams {
  double kappa = 0.0;
  double sigma = 0.0;
};

double intensity_at(const LogLinearModel& model, const CovariateField& field,
                    double x, double y);

// Integral of the intensity over the window via midpoint quadrature.
double expected_count(const LogLinearModel& model, const CovariateField& field,
                      const Window& window);
double expected_count(const LogLinearModel& model, const QuadratureScheme& quad);

// Shift log omega so the expected count over the window equals target.
LogLinearModel calibrate_intercept(const LogLinearModel& model,
                                   const CovariateField& field,
                                   const Window& window, double target);

// Inhomogeneous Poisson sampler: rejection against the homogeneous process
// at the maximum cell intensity.
PointPattern sample_poisson(const LogLinearModel& model, const CovariateField& field,
                            const Window& window, Rng& rng);

// Thomas sampler with intensity-reweighted daughters: parents are drawn on
// the window dilated by 4 sigma, each parent proposes Poisson(rho_max/kappa)
// Gaussian offsets, and proposals are thinned by rho(u)/rho_max. Daughters
// outside the window are discarded; the resulting first-order intensity is
// rho(u) up to the truncated parent halo.
PointPattern sample_thomas(const LogLinearModel& model, const ThomasParams& params,
                           const CovariateField& field, const Window& window,
                           Rng& rng);

// Pair correlation g(r) = 1 + exp(-r^2/(4 sigma^2)) / (4 pi kappa sigma^2).
double thomas_pcf(const ThomasParams& params, double r);

// K(r) = pi r^2 + (1 - exp(-r^2/(4 sigma^2))) / kappa.
double thomas_K(const ThomasParams& params, double r);

}  // namespace ppsel
