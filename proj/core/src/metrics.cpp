#include "ppsel/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace ppsel {

namespace {

void validate(const std::vector<SelectionOutcome>& outcomes) {
  if (outcomes.empty()) throw ConfigError("metrics: no outcomes");
  const std::size_t p = outcomes.front().truth.size();
  if (p == 0) throw ConfigError("metrics: zero covariates");
  for (const SelectionOutcome& o : outcomes) {
    if (o.selected.size() != p || o.truth.size() != p)
      throw ConfigError("metrics: outcome vectors disagree on p");
  }
}

}  // namespace

SelectionOutcome outcome_from_support(const std::vector<int>& support,
                                      const std::vector<int>& truth, int p) {
  if (p < 1) throw ConfigError("metrics: p must be at least 1");
  SelectionOutcome out;
  out.selected.assign(p, false);
  out.truth.assign(p, false);
  for (int j : support) {
    if (j < 0 || j >= p) throw ConfigError("metrics: support index out of range");
    out.selected[j] = true;
  }
  for (int j : truth) {
    if (j < 0 || j >= p) throw ConfigError("metrics: truth index out of range");
    out.truth[j] = true;
  }
  return out;
}

ConfusionMetrics confusion_metrics(const std::vector<SelectionOutcome>& outcomes) {
  validate(outcomes);
  const int p = static_cast<int>(outcomes.front().truth.size());

  ConfusionMetrics sum;
  for (const SelectionOutcome& o : outcomes) {
    int tp = 0, fp = 0, positives = 0, selected = 0;
    for (int j = 0; j < p; ++j) {
      positives += o.truth[j];
      selected += o.selected[j];
      if (o.selected[j] && o.truth[j]) ++tp;
      if (o.selected[j] && !o.truth[j]) ++fp;
    }
    const int noise = p - positives;
    const double tpr = positives == 0 ? 1.0 : double(tp) / positives;
    const double fpr = noise == 0 ? 0.0 : double(fp) / noise;
    const double ppv = selected > 0 ? double(tp) / selected
                                    : (positives == 0 ? 1.0 : 0.0);
    const double f1 = tpr + ppv > 0.0 ? 2.0 * tpr * ppv / (tpr + ppv) : 0.0;
    sum.tpr += tpr;
    sum.fpr += fpr;
    sum.ppv += ppv;
    sum.f1 += f1;
    sum.empirical_pfer += fp;
  }

  const double m = static_cast<double>(outcomes.size());
  sum.tpr /= m;
  sum.fpr /= m;
  sum.ppv /= m;
  sum.f1 /= m;
  sum.empirical_pfer /= m;
  return sum;
}

double phi_s(const std::vector<SelectionOutcome>& outcomes) {
  validate(outcomes);
  const double m = static_cast<double>(outcomes.size());
  const int p = static_cast<int>(outcomes.front().truth.size());
  if (outcomes.size() < 2) return std::numeric_limits<double>::quiet_NaN();

  double s2_mean = 0.0, k_bar = 0.0;
  for (int j = 0; j < p; ++j) {
    double p_hat = 0.0;
    for (const SelectionOutcome& o : outcomes) p_hat += o.selected[j];
    p_hat /= m;
    s2_mean += m / (m - 1.0) * p_hat * (1.0 - p_hat);
    k_bar += p_hat;
  }
  s2_mean /= p;

  const double rate = k_bar / p;
  const double denom = rate * (1.0 - rate);
  if (denom == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return 1.0 - s2_mean / denom;
}

MetricsReport metrics_report(const std::vector<SelectionOutcome>& outcomes) {
  const ConfusionMetrics cm = confusion_metrics(outcomes);
  MetricsReport report;
  report.tpr = cm.tpr;
  report.fpr = cm.fpr;
  report.ppv = cm.ppv;
  report.f1 = cm.f1;
  report.empirical_pfer = cm.empirical_pfer;
  report.phi_s = phi_s(outcomes);
  report.phi_s_defined = !std::isnan(report.phi_s);
  report.rep_count = static_cast<int>(outcomes.size());
  return report;
}

}  // namespace ppsel
