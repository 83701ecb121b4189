#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "ppsel/noise.hpp"
#include "ppsel/solver.hpp"

namespace ppsel {

struct StabilityConfig {
  int K = 50;               // bootstrap replicates
  double p_thin = 0.5;      // retention probability of the thinning subsampler
  double pi_th = 0.9;       // selection threshold on inclusion frequencies
  double pfer_target = 1.0; // per-family error-rate budget
  std::uint64_t seed = 0;
  int threads = 0;          // replicate workers; 0 = hardware concurrency.
                            // Results are identical for every thread count.
};

// One bootstrap draw together with the factor its estimating equation puts on
// the intensity integral: the retention probability for a thinned pattern,
// the number of drawn patterns for a replicated-experiment resample.
struct Subsample {
  PointPattern pattern;
  double integral_factor = 1.0;
};
using Subsampler = std::function<Subsample(Rng&)>;

// Independent p-thinning of a single observed pattern.
Subsampler thinning_subsampler(const PointPattern& pattern, double retain);

// Replicated experiments: draws as many patterns as observed, with
// replacement, and concatenates them. All patterns must share one window.
Subsampler replicate_subsampler(const std::vector<PointPattern>& patterns);

struct StabilityPath {
  std::vector<double> lambda_grid;  // decreasing
  Eigen::MatrixXd pi;               // inclusion frequency, grid index by covariate
  std::vector<double> q_profile;    // mean size of ∪_{λ' ≥ λ_i} S^λ' per grid index
  double q_lambda = 0.0;            // q_profile over the whole grid
  StabilityConfig config;
  int empty_subsamples = 0;   // replicates whose draw had zero points
  int failed_subsamples = 0;  // replicates whose pilot fit or path did not converge
};

// Algorithm: for each of K replicates, draw a subsample, build its fit data
// with the subsample's integral factor, take adaptive weights from the
// replicate's own unpenalized fit, and run the warm-started path. Π is the
// fraction of replicates selecting each covariate at each λ; empty or failed
// replicates contribute empty supports. Deterministic given config.seed.
StabilityPath stability_path(const PointPattern& pattern, const CovariateField& field,
                             const Window& window, PenaltyKind kind,
                             const StabilityConfig& config,
                             const PathConfig& path_config);
StabilityPath stability_path_with(const Subsampler& subsampler,
                                  const CovariateField& field, const Window& window,
                                  PenaltyKind kind, const StabilityConfig& config,
                                  const PathConfig& path_config);

// q_Λ² / (p · (2 π_th − 1)), the exchangeability bound on the expected number
// of falsely selected covariates.
double pfer_bound(double pi_th, double q_lambda, int p);

struct LambdaRange {
  double lambda_max = 0.0;
  double lambda_min = 0.0;
  double q_target = 0.0;        // √(pfer_target · p · (2 π_th − 1))
  bool q_target_reached = true; // false: λ_min fell back to the grid minimum
  bool empty_at_max = true;     // false: no grid value had all-empty pilot supports
};

// Ten pilot subsamples over path_config.lambda_grid pick the working range:
// λ_max is the smallest grid value at which every pilot support is empty,
// λ_min the largest grid value where the mean union size q̂ first reaches the
// target implied by inverting the error bound.
LambdaRange calibrate_lambda_range(const PointPattern& pattern,
                                   const CovariateField& field, const Window& window,
                                   PenaltyKind kind, const StabilityConfig& config,
                                   const PathConfig& path_config);
LambdaRange calibrate_lambda_range_with(const Subsampler& subsampler,
                                        const CovariateField& field,
                                        const Window& window, PenaltyKind kind,
                                        const StabilityConfig& config,
                                        const PathConfig& path_config);

// Support after re-thresholding a fixed path for a new error budget: the λ
// range is cut at the first grid index whose q̂ reaches the implied target,
// and a covariate is kept when its Π within that range reaches π_th.
// Nondecreasing in pfer_target.
std::vector<int> threshold_support(const StabilityPath& path, double pfer_target);

struct StabilitySelection {
  std::vector<int> support;
  LogLinearModel model;        // unpenalized refit on the full data
  double pfer_bound = 0.0;
  double q_lambda = 0.0;
  std::vector<double> max_pi;  // per-covariate max of Π over the grid
  StabilityConfig config;
};

// Keeps every covariate whose Π reaches π_th anywhere on the grid and refits
// without penalty on the full data; an empty support yields the
// intercept-only model.
StabilitySelection select_stable(const StabilityPath& path, const FitData& fit);

// Long-format CSV: lambda,covariate,pi.
void write_stability_csv(const std::string& path, const StabilityPath& sp);

}  // namespace ppsel
