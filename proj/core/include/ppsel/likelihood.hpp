#pragma once

#include <Eigen/Dense>
#include <memory>
#include <optional>
#include <vector>

#include "ppsel/geometry.hpp"
#include "ppsel/simulate.hpp"

namespace ppsel {

// Discretized composite log-likelihood data. Responses follow the
// Berman-Turner device: y_j = count_j / v_j for the count of points owned by
// node j, so sum_j v_j y_j reproduces the point count exactly. p_thin scales
// the intensity integral for data that are a p-thinning of the full pattern.
struct FitData {
  std::shared_ptr<const QuadratureScheme> quad;
  Eigen::VectorXd y;
  double p_thin = 1.0;
  int n_points = 0;

  // Cached sufficient pieces: g_data = [N, sum over points of z(node)] is the
  // gradient of the data term; sv and svz are the weight totals used by the
  // all-zero-coefficient fast path.
  Eigen::VectorXd g_data;
  double sv = 0.0;
  Eigen::VectorXd svz;

  int p() const { return quad ? static_cast<int>(quad->z.cols()) : 0; }
  long m() const { return quad ? quad->node_count() : 0; }
};

FitData build_fit_data(const PointPattern& pattern, const CovariateField& field,
                       const Window& window, double p_thin_factor = 1.0);
FitData build_fit_data(const PointPattern& pattern,
                       std::shared_ptr<const QuadratureScheme> quad,
                       double p_thin_factor = 1.0);

double loglik(const FitData& fit, const LogLinearModel& model);

// Gradient with respect to (log_omega, beta); intercept first.
Eigen::VectorXd score(const FitData& fit, const LogLinearModel& model);

// Reusable buffers for the fused evaluation below; sized on first use.
struct LikWorkspace {
  Eigen::VectorXd eta, r;
};

// Objective and full gradient in one pass over the nodes. Exploits exact
// zeros in beta and degenerates to O(p) work when beta is entirely zero.
double loglik_and_score(const FitData& fit, double log_omega,
                        const Eigen::VectorXd& beta, Eigen::VectorXd& grad,
                        LikWorkspace& ws);

// Same evaluation restricted to (log_omega, beta[support]); beta_s is compact
// with one entry per support index, grad is sized 1 + |support|.
double loglik_and_score_on(const FitData& fit, double log_omega,
                           const Eigen::VectorXd& beta_s,
                           const std::vector<int>& support,
                           Eigen::VectorXd& grad, LikWorkspace& ws);

struct FitOptions {
  double tol = 1e-6;   // sup-norm of the score at the solution
  int max_iter = 10000;
  // Warm start; coefficients off the requested support are ignored. Absent:
  // zero coefficients with the intercept at the homogeneous estimate.
  std::optional<LogLinearModel> init;
};

// Maximum composite-likelihood fit by gradient ascent with Barzilai-Borwein
// steps. Throws DegenerateDataError on an empty pattern and
// NonConvergenceError (carrying the last iterate) past max_iter.
LogLinearModel fit_unpenalized(const FitData& fit, const FitOptions& opts = {});

// Unpenalized fit constrained to a covariate subset; entries off the support
// stay exactly zero. An empty support gives the intercept-only model.
LogLinearModel fit_unpenalized_on(const FitData& fit, const std::vector<int>& support,
                                  const FitOptions& opts = {});

}  // namespace ppsel
