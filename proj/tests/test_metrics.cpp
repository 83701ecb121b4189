#include <doctest.h>

#include <cmath>
#include <vector>

#include "ppsel/metrics.hpp"
#include "ppsel/rng.hpp"

using namespace ppsel;

TEST_SUITE("metrics") {

TEST_CASE("support lists convert to indicator outcomes") {
  const SelectionOutcome o = outcome_from_support({0, 3}, {0, 1}, 5);
  CHECK(o.selected == std::vector<bool>{true, false, false, true, false});
  CHECK(o.truth == std::vector<bool>{true, true, false, false, false});
  CHECK_THROWS_AS(outcome_from_support({5}, {0}, 5), ConfigError);
  CHECK_THROWS_AS(outcome_from_support({0}, {-1}, 5), ConfigError);
  CHECK_THROWS_AS(outcome_from_support({}, {}, 0), ConfigError);
}

TEST_CASE("perfect selection scores perfectly") {
  const std::vector<SelectionOutcome> outcomes(
      3, outcome_from_support({0, 1}, {0, 1}, 15));
  const ConfusionMetrics cm = confusion_metrics(outcomes);
  CHECK(cm.tpr == 1.0);
  CHECK(cm.fpr == 0.0);
  CHECK(cm.ppv == 1.0);
  CHECK(cm.f1 == 1.0);
  CHECK(cm.empirical_pfer == 0.0);
  CHECK(phi_s(outcomes) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("empty selections follow the stated conventions") {
  const std::vector<SelectionOutcome> outcomes(
      2, outcome_from_support({}, {0, 1}, 15));
  const ConfusionMetrics cm = confusion_metrics(outcomes);
  CHECK(cm.tpr == 0.0);
  CHECK(cm.fpr == 0.0);
  CHECK(cm.ppv == 0.0);
  CHECK(cm.f1 == 0.0);
  CHECK(cm.empirical_pfer == 0.0);
}

TEST_CASE("a single extra noise covariate is counted exactly") {
  const std::vector<SelectionOutcome> outcomes(
      1, outcome_from_support({0, 1, 7}, {0, 1}, 15));
  const ConfusionMetrics cm = confusion_metrics(outcomes);
  CHECK(cm.tpr == 1.0);
  CHECK(cm.fpr == doctest::Approx(1.0 / 13.0).epsilon(1e-12));
  CHECK(cm.ppv == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(cm.f1 == doctest::Approx(0.8).epsilon(1e-12));
  CHECK(cm.empirical_pfer == 1.0);
}

TEST_CASE("rates are per-repetition averages") {
  std::vector<SelectionOutcome> outcomes = {
      outcome_from_support({0, 1}, {0, 1}, 4),  // perfect: f1 = 1
      outcome_from_support({2}, {0, 1}, 4),     // miss: tpr 0, ppv 0, f1 0
  };
  const ConfusionMetrics cm = confusion_metrics(outcomes);
  CHECK(cm.tpr == 0.5);
  CHECK(cm.fpr == 0.25);
  CHECK(cm.ppv == 0.5);
  CHECK(cm.f1 == 0.5);
  CHECK(cm.empirical_pfer == 0.5);
}

TEST_CASE("vacuous truth makes empty selection perfect") {
  const std::vector<SelectionOutcome> outcomes(2, outcome_from_support({}, {}, 6));
  const ConfusionMetrics cm = confusion_metrics(outcomes);
  CHECK(cm.tpr == 1.0);
  CHECK(cm.ppv == 1.0);
  CHECK(cm.f1 == 1.0);
  CHECK(cm.fpr == 0.0);
}

TEST_CASE("disjoint halves give the textbook negative stability") {
  const std::vector<SelectionOutcome> outcomes = {
      outcome_from_support({0}, {0}, 2),
      outcome_from_support({1}, {0}, 2),
  };
  CHECK(phi_s(outcomes) == doctest::Approx(-1.0).epsilon(1e-12));
}

TEST_CASE("independent random selection has near-zero stability") {
  Rng rng(300);
  const int p = 10, m = 1000;
  std::vector<SelectionOutcome> outcomes;
  outcomes.reserve(m);
  for (int i = 0; i < m; ++i) {
    std::vector<int> support;
    for (int j = 0; j < p; ++j)
      if (rng.uniform() < 0.3) support.push_back(j);
    outcomes.push_back(outcome_from_support(support, {0, 1}, p));
  }
  CHECK(std::abs(phi_s(outcomes)) < 0.1);
}

TEST_CASE("stability is invariant to feature relabeling") {
  Rng rng(301);
  const int p = 7, m = 40;
  std::vector<SelectionOutcome> base, relabeled;
  const int perm[7] = {3, 0, 6, 1, 5, 2, 4};
  for (int i = 0; i < m; ++i) {
    std::vector<int> support, mapped;
    for (int j = 0; j < p; ++j)
      if (rng.uniform() < 0.4) {
        support.push_back(j);
        mapped.push_back(perm[j]);
      }
    std::sort(mapped.begin(), mapped.end());
    base.push_back(outcome_from_support(support, {0}, p));
    relabeled.push_back(outcome_from_support(mapped, {perm[0]}, p));
  }
  CHECK(phi_s(base) == doctest::Approx(phi_s(relabeled)).epsilon(1e-12));
}

TEST_CASE("duplicating the outcome list barely moves stability") {
  // Doubling M keeps every p̂_f, so the statistic moves only through the
  // M/(M−1) small-sample factor: Δφ = (1−φ)(1 − 2(M−1)/(2M−1)).
  Rng rng(302);
  const int p = 9, m = 120;
  std::vector<SelectionOutcome> outcomes;
  for (int i = 0; i < m; ++i) {
    std::vector<int> support = {0, 1, 4};  // mostly stable selections
    for (int j = 0; j < p; ++j)
      if (rng.uniform() < 0.03) support.push_back(j);
    std::sort(support.begin(), support.end());
    support.erase(std::unique(support.begin(), support.end()), support.end());
    outcomes.push_back(outcome_from_support(support, {0, 1}, p));
  }
  std::vector<SelectionOutcome> doubled = outcomes;
  doubled.insert(doubled.end(), outcomes.begin(), outcomes.end());

  const double one = phi_s(outcomes);
  const double two = phi_s(doubled);
  CHECK(std::abs(two - one) < 1e-3);
  const double factor_drift = (1.0 - one) * (1.0 - 2.0 * (m - 1.0) / (2.0 * m - 1.0));
  CHECK(two - one == doctest::Approx(factor_drift).epsilon(1e-9));
}

TEST_CASE("degenerate selection rates flag the statistic as missing") {
  const std::vector<SelectionOutcome> none(4, outcome_from_support({}, {0}, 5));
  CHECK(std::isnan(phi_s(none)));
  const std::vector<SelectionOutcome> all(
      4, outcome_from_support({0, 1, 2, 3, 4}, {0}, 5));
  CHECK(std::isnan(phi_s(all)));
  const std::vector<SelectionOutcome> single(1, outcome_from_support({0}, {0}, 5));
  CHECK(std::isnan(phi_s(single)));

  const MetricsReport report = metrics_report(none);
  CHECK_FALSE(report.phi_s_defined);
  CHECK(report.rep_count == 4);
  CHECK(report.tpr == 0.0);
}

TEST_CASE("random outcomes satisfy the range invariants") {
  Rng rng(303);
  for (int trial = 0; trial < 30; ++trial) {
    const int p = 2 + int(rng.uniform() * 12);
    const int m = 1 + int(rng.uniform() * 20);
    std::vector<int> truth;
    for (int j = 0; j < p; ++j)
      if (rng.uniform() < 0.3) truth.push_back(j);
    const int noise = p - static_cast<int>(truth.size());
    std::vector<SelectionOutcome> outcomes;
    for (int i = 0; i < m; ++i) {
      std::vector<int> support;
      for (int j = 0; j < p; ++j)
        if (rng.uniform() < 0.4) support.push_back(j);
      outcomes.push_back(outcome_from_support(support, truth, p));
    }
    const ConfusionMetrics cm = confusion_metrics(outcomes);
    for (double v : {cm.tpr, cm.fpr, cm.ppv, cm.f1}) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
    CHECK(cm.empirical_pfer >= 0.0);
    CHECK(cm.empirical_pfer <= noise);
  }
}

TEST_CASE("reports aggregate both statistic families") {
  const std::vector<SelectionOutcome> outcomes(
      5, outcome_from_support({0, 2}, {0, 1}, 6));
  const MetricsReport report = metrics_report(outcomes);
  const ConfusionMetrics cm = confusion_metrics(outcomes);
  CHECK(report.tpr == cm.tpr);
  CHECK(report.fpr == cm.fpr);
  CHECK(report.ppv == cm.ppv);
  CHECK(report.f1 == cm.f1);
  CHECK(report.empirical_pfer == cm.empirical_pfer);
  CHECK(report.phi_s == 1.0);
  CHECK(report.phi_s_defined);
  CHECK(report.rep_count == 5);
}

TEST_CASE("malformed outcome lists are rejected") {
  CHECK_THROWS_AS(confusion_metrics({}), ConfigError);
  CHECK_THROWS_AS(phi_s({}), ConfigError);
  std::vector<SelectionOutcome> bad = {outcome_from_support({0}, {0}, 3),
                                       outcome_from_support({0}, {0}, 4)};
  CHECK_THROWS_AS(confusion_metrics(bad), ConfigError);
}

}  // TEST_SUITE
