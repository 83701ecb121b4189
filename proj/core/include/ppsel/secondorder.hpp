#pragma once

#include <string>
#include <vector>

#include "ppsel/criteria.hpp"
#include "ppsel/simulate.hpp"

namespace ppsel {

struct KEstimate {
  std::vector<double> r_grid;          // increasing, starting at 0
  std::vector<double> k_hat;           // cumulative, k_hat[0] = 0
  std::string correction = "translation";
  std::vector<double> intensity_used;  // ρ(u;β̂) at each data point
};

// 1/area(W ∩ W shifted by (dx, dy)); the translation edge-correction weight.
double translation_weight(const Window& window, double dx, double dy);

// n equispaced distances on [0, r_max], beginning at 0.
std::vector<double> default_r_grid(double r_max = 25.0, int n = 128);

// Inhomogeneous K with translation correction:
// K̂(r) = Σ_{u≠v} 1(‖u−v‖ ≤ r) / (ρ(u) ρ(v) area(W ∩ W_{v−u})).
KEstimate k_inhom(const PointPattern& pattern, const LogLinearModel& model,
                  const CovariateField& field, const Window& window,
                  const std::vector<double>& r_grid);

// Contrast ∫_{r_min}^{r_max} (K(r;κ,σ)^b − K̂(r)^b)² dr, trapezoid rule on the
// estimate's grid.
double thomas_contrast(const KEstimate& k_est, double r_min, double r_max,
                       double b, const ThomasParams& params);

// Restart points for the bounded search, spread over
// log κ ∈ [−12, 2] × log σ ∈ [−3, 4].
std::vector<ThomasParams> contrast_restart_grid();

// Minimum-contrast fit of (κ, σ): projected quasi-Newton descents in
// (log κ, log σ) from the best restart points; the returned optimum scores
// no worse than every restart point.
ThomasParams min_contrast_thomas(const KEstimate& k_est, double r_min = 0.0,
                                 double r_max = 25.0, double b = 0.25);

struct TwoStepFit {
  ThomasParams params;
  KEstimate k_est;
  SecondOrderSpec spec;
};

// First-step intensity from `model`, then K̂ on [0, 25] and minimum contrast,
// wrapped as a pair-correlation spec for the composite criteria.
TwoStepFit two_step_fit(const PointPattern& pattern, const CovariateField& field,
                        const Window& window, const LogLinearModel& model);

void write_k_csv(const std::string& path, const KEstimate& k_est);

}  // namespace ppsel
