#pragma once

#include <Eigen/Dense>
#include <functional>
#include <limits>
#include <vector>

#include "ppsel/likelihood.hpp"
#include "ppsel/solver.hpp"

namespace ppsel {

enum class CriterionKind { BIC, ERIC, CBIC, CERIC };

struct CriterionValue {
  CriterionKind kind = CriterionKind::BIC;
  double value = std::numeric_limits<double>::quiet_NaN();
  double df = 0.0;
  double lambda = 0.0;
  // Set when the ERIC multiplier log(N/λ) is nonpositive (λ ≥ N); the value
  // is still computed.
  bool flagged_multiplier = false;
};

// Pair-correlation model for the composite corrections. `range` is a cutoff
// beyond which g(r) − 1 is treated as exactly zero; the Thomas helper picks
// it where the Gaussian tail is below 1e-16 of its peak, so truncation error
// is far below the quadrature error of the double sum.
struct SecondOrderSpec {
  std::function<double(double)> pcf;
  int coarsen = 2;
  double range = std::numeric_limits<double>::infinity();
};

SecondOrderSpec poisson_second_order(int coarsen = 2);
SecondOrderSpec thomas_second_order(double kappa, double sigma, int coarsen = 2);

// Coarse re-blocking of a quadrature scheme: every `factor`×`factor` block of
// nodes collapses onto a representative member carrying the block's total
// weight, so the coarse weights still partition the window exactly.
struct CoarseNodes {
  std::vector<int> node;  // indices into the fine scheme
  Eigen::VectorXd w;      // block weights
};

CoarseNodes coarsen_scheme(const QuadratureScheme& quad, int factor);

// Negative Hessian of the discretized log-likelihood at `model`, on the
// intercept plus the given covariates: Σ_j v_j p ρ_j z̃_j z̃_j᙮.
Eigen::MatrixXd sensitivity(const FitData& fit, const LogLinearModel& model,
                            const std::vector<int>& support);

// Double sum over coarsened nodes of z̃(u)z̃(v)᙮ λ(u)λ(v)(g(‖u−v‖)−1)v_u v_v,
// with λ the observed-process intensity p·ρ; includes the u = v terms.
Eigen::MatrixXd t2_matrix(const FitData& fit, const LogLinearModel& model,
                          const std::vector<int>& support,
                          const SecondOrderSpec& spec);

// k + tr(S⁻¹T₂). Throws DegenerateDataError when S is not positive definite.
double effective_df(const Eigen::MatrixXd& S, const Eigen::MatrixXd& T2, int k);

// Criterion at an unpenalized refit on `support`. Plain kinds use df = k
// (support size plus intercept); composite kinds use effective_df with the
// second-order spec.
CriterionValue criterion_value(CriterionKind kind, const FitData& fit,
                               const LogLinearModel& refit,
                               const std::vector<int>& support, double lambda,
                               const SecondOrderSpec& spec = poisson_second_order());

struct SelectionResult {
  std::vector<int> support;
  LogLinearModel model;  // unpenalized refit on the selected support
  double lambda = 0.0;
  int index = -1;  // position in the path
  std::vector<CriterionValue> values;  // one per path entry
  std::vector<bool> evaluated;         // false where the refit failed
};

// Refits every path support without penalty, scores it, and returns the
// minimizer; ties resolve toward the larger λ. Identical supports share one
// refit, so their plain-criterion values tie exactly.
SelectionResult select_by_criterion(const PathResult& path, const FitData& fit,
                                    CriterionKind kind,
                                    const SecondOrderSpec& spec = poisson_second_order());

}  // namespace ppsel
