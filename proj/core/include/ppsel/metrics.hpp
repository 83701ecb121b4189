#pragma once

#include <vector>

#include "ppsel/errors.hpp"

namespace ppsel {

// One Monte Carlo repetition: which covariates were selected, which are true.
struct SelectionOutcome {
  std::vector<bool> selected;
  std::vector<bool> truth;
};

SelectionOutcome outcome_from_support(const std::vector<int>& support,
                                      const std::vector<int>& truth, int p);

struct ConfusionMetrics {
  double tpr = 0.0;
  double fpr = 0.0;
  double ppv = 0.0;
  double f1 = 0.0;
  double empirical_pfer = 0.0;  // mean count of selected noise covariates
};

// Per-repetition rates averaged over the list. Degenerate repetitions follow
// fixed conventions: an empty selection has PPV 0 against a nonempty truth
// (and 1 against an empty truth, where TPR is also vacuously 1); F1 is 0
// whenever TPR + PPV is 0.
ConfusionMetrics confusion_metrics(const std::vector<SelectionOutcome>& outcomes);

// Selection-stability statistic 1 − (mean_f s_f²) / ((k̄/p)(1 − k̄/p)) with
// s_f² = M/(M−1)·p̂_f(1−p̂_f). Undefined cases (fewer than two repetitions,
// or a mean selection count of 0 or p) return a quiet NaN.
double phi_s(const std::vector<SelectionOutcome>& outcomes);

struct MetricsReport {
  double tpr = 0.0, fpr = 0.0, ppv = 0.0, f1 = 0.0;
  double phi_s = 0.0;
  double empirical_pfer = 0.0;
  bool phi_s_defined = false;
  int rep_count = 0;
};

MetricsReport metrics_report(const std::vector<SelectionOutcome>& outcomes);

}  // namespace ppsel
