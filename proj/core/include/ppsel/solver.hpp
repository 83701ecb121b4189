#pragma once

#include <Eigen/Dense>
#include <vector>

#include "ppsel/likelihood.hpp"

namespace ppsel {

enum class PenaltyKind { L0, L1 };
enum class StepPolicy { Auto, BB, Fixed };

// Penalty λ·Σ_i w_i·pen(β_i); w_i defaults to 1 when adaptive_weights is empty.
// Excluded covariates carry w_i = kExcludedWeight instead of an infinity.
struct PenaltySpec {
  PenaltyKind kind = PenaltyKind::L1;
  double lambda = 0.0;
  Eigen::VectorXd adaptive_weights;
};

inline constexpr double kExcludedWeight = 1e12;

struct PathConfig {
  std::vector<double> lambda_grid;           // strictly decreasing, all > 0
  StepPolicy step_policy = StepPolicy::Auto; // Auto: BB for L1, Fixed for L0
  double fixed_step = 1e-3;
  double bb_init = 1e-4;
  int max_iter = 10000;
  double tol = 1e-4;      // relative iterate change
  int stall_window = 1000;
  double stall_eps = 1e-10;
};

struct PgdDiagnostics {
  double lambda = 0.0;
  int iterations = 0;
  double objective = 0.0;  // penalized log-likelihood at the returned iterate
  bool converged = false;
  bool stalled = false;    // stopped by the stall window rather than the tolerance
};

struct PgdResult {
  LogLinearModel model;
  PgdDiagnostics diag;
};

struct PathResult {
  std::vector<double> lambdas;
  std::vector<LogLinearModel> models;
  std::vector<std::vector<int>> supports;
  std::vector<PgdDiagnostics> diagnostics;
};

// Scalar proximal maps for penalty weight t = γλw ≥ 0. The hard map keeps x
// iff x² > 2t (boundary ties map to zero); the soft map shrinks by t.
double prox_hard(double x, double t);
double prox_soft(double x, double t);

// Barzilai–Borwein scalar step |Δθ᙮Δg| / ‖Δg‖², clamped to [1e-8, 1e2].
// A vanishing ‖Δg‖ returns `fallback` unchanged.
double bb_step(const Eigen::VectorXd& dtheta, const Eigen::VectorXd& dgrad,
               double fallback);

// λ·Σ_i w_i·pen(β_i) for the spec's penalty kind.
double penalty_value(const PenaltySpec& spec, const Eigen::VectorXd& beta);

// Indices of exactly nonzero coefficients, ascending.
std::vector<int> support_of(const Eigen::VectorXd& beta);

// w_i = 1/|β̂_i| from a pilot fit; coefficients at exactly zero are excluded
// via kExcludedWeight.
Eigen::VectorXd adaptive_weights(const LogLinearModel& pilot);

// n log-equidistant values spanning [lo, hi], returned in decreasing order.
std::vector<double> lambda_grid(double lo, double hi, int n);

// Proximal gradient ascent on the penalized log-likelihood from `init`.
// The intercept takes plain gradient steps; only β₁..β_p are proximated.
// Stops on relative iterate change < tol, on an objective stall over
// stall_window iterations, or at max_iter (flagged, not an error).
PgdResult pgd_solve(const FitData& fit, const PenaltySpec& spec,
                    const LogLinearModel& init, const PathConfig& config);

// Warm-started descent over config.lambda_grid. The first solve starts from
// all-zero coefficients with the intercept at the homogeneous estimate; each
// later λ starts from the previous solution.
PathResult solve_path(const FitData& fit, PenaltyKind kind,
                      const Eigen::VectorXd& weights, const PathConfig& config);

}  // namespace ppsel
