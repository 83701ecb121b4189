#include "ppsel/secondorder.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "ppsel/errors.hpp"

namespace ppsel {

double translation_weight(const Window& window, double dx, double dy) {
  const double ox = window.width() - std::abs(dx);
  const double oy = window.height() - std::abs(dy);
  if (!(ox > 0.0) || !(oy > 0.0))
    throw ConfigError("translation_weight: offset exceeds the window span");
  return 1.0 / (ox * oy);
}

std::vector<double> default_r_grid(double r_max, int n) {
  if (!(r_max > 0.0) || n < 2) throw ConfigError("default_r_grid: bad arguments");
  std::vector<double> r(n);
  for (int i = 0; i < n; ++i) r[i] = r_max * i / (n - 1.0);
  return r;
}

KEstimate k_inhom(const PointPattern& pattern, const LogLinearModel& model,
                  const CovariateField& field, const Window& window,
                  const std::vector<double>& r_grid) {
  if (pattern.size() < 2)
    throw DegenerateDataError("k_inhom: need at least two points");
  if (r_grid.empty() || r_grid.front() < 0.0)
    throw ConfigError("k_inhom: distance grid must start at a nonnegative value");
  for (std::size_t i = 1; i < r_grid.size(); ++i)
    if (!(r_grid[i] > r_grid[i - 1]))
      throw ConfigError("k_inhom: distance grid must be increasing");

  const int n = pattern.size();
  KEstimate est;
  est.r_grid = r_grid;
  est.k_hat.assign(r_grid.size(), 0.0);
  est.intensity_used.resize(n);
  for (int i = 0; i < n; ++i) {
    if (!window.contains(pattern.x[i], pattern.y[i]))
      throw DegenerateDataError("k_inhom: point outside the window");
    est.intensity_used[i] =
        intensity_at(model, field, pattern.x[i], pattern.y[i]);
    if (!(est.intensity_used[i] > 0.0))
      throw DegenerateDataError("k_inhom: nonpositive intensity at a data point");
  }

  const double r_max = r_grid.back();
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const double dx = pattern.x[j] - pattern.x[i];
      const double dy = pattern.y[j] - pattern.y[i];
      if (std::abs(dx) > r_max || std::abs(dy) > r_max) continue;
      const double d = std::hypot(dx, dy);
      if (d > r_max) continue;
      const auto bin = std::lower_bound(r_grid.begin(), r_grid.end(), d);
      const double contribution =
          2.0 * translation_weight(window, dx, dy) /
          (est.intensity_used[i] * est.intensity_used[j]);
      est.k_hat[bin - r_grid.begin()] += contribution;
    }
  }
  for (std::size_t k = 1; k < est.k_hat.size(); ++k)
    est.k_hat[k] += est.k_hat[k - 1];
  return est;
}

double thomas_contrast(const KEstimate& k_est, double r_min, double r_max,
                       double b, const ThomasParams& params) {
  if (!(r_max > r_min) || r_min < 0.0)
    throw ConfigError("thomas_contrast: need r_max > r_min >= 0");
  if (!(b > 0.0)) throw ConfigError("thomas_contrast: exponent must be positive");
  if (k_est.r_grid.size() != k_est.k_hat.size() || k_est.r_grid.size() < 2)
    throw ConfigError("thomas_contrast: malformed K estimate");

  double acc = 0.0;
  bool any = false;
  double prev_r = 0.0, prev_f = 0.0;
  for (std::size_t i = 0; i < k_est.r_grid.size(); ++i) {
    const double r = k_est.r_grid[i];
    if (r < r_min || r > r_max) continue;
    const double diff = std::pow(thomas_K(params, r), b) -
                        std::pow(std::max(k_est.k_hat[i], 0.0), b);
    const double f = diff * diff;
    if (any) acc += 0.5 * (prev_f + f) * (r - prev_r);
    prev_r = r;
    prev_f = f;
    any = true;
  }
  if (!any) throw ConfigError("thomas_contrast: no grid points inside [r_min, r_max]");
  return acc;
}

namespace {

constexpr double kLogKappaLo = -12.0, kLogKappaHi = 2.0;
constexpr double kLogSigmaLo = -3.0, kLogSigmaHi = 4.0;

double clampd(double x, double lo, double hi) { return std::min(std::max(x, lo), hi); }

struct ContrastFn {
  const KEstimate& k_est;
  double r_min, r_max, b;

  double operator()(double lk, double ls) const {
    return thomas_contrast(k_est, r_min, r_max, b,
                           {std::exp(lk), std::exp(ls)});
  }
};

// Projected gradient descent with a BB step and Armijo backtracking on the
// box; gradients by central differences.
bool descend(const ContrastFn& f, double& lk, double& ls, double& value) {
  const double h = 1e-6;
  double x0 = lk, x1 = ls;
  double fx = f(x0, x1);
  if (!std::isfinite(fx)) return false;

  double gamma = 1e-2;
  double px0 = 0.0, px1 = 0.0, pg0 = 0.0, pg1 = 0.0;
  bool have_prev = false;
  for (int iter = 0; iter < 300; ++iter) {
    const double g0 = (f(x0 + h, x1) - f(x0 - h, x1)) / (2.0 * h);
    const double g1 = (f(x0, x1 + h) - f(x0, x1 - h)) / (2.0 * h);
    if (!std::isfinite(g0) || !std::isfinite(g1)) break;

    if (have_prev) {
      const double dg0 = g0 - pg0, dg1 = g1 - pg1;
      const double denom = dg0 * dg0 + dg1 * dg1;
      if (denom > 0.0)
        gamma = clampd(std::abs((x0 - px0) * dg0 + (x1 - px1) * dg1) / denom,
                       1e-10, 1e3);
    }

    double t = 1.0;
    double n0 = x0, n1 = x1, fn = fx;
    bool improved = false;
    for (int back = 0; back < 60; ++back) {
      n0 = clampd(x0 - t * gamma * g0, kLogKappaLo, kLogKappaHi);
      n1 = clampd(x1 - t * gamma * g1, kLogSigmaLo, kLogSigmaHi);
      fn = f(n0, n1);
      if (std::isfinite(fn) && fn <= fx - 1e-12 * std::abs(fx)) {
        improved = true;
        break;
      }
      t *= 0.5;
    }
    if (!improved) break;

    px0 = x0;
    px1 = x1;
    pg0 = g0;
    pg1 = g1;
    have_prev = true;
    const double moved = std::hypot(n0 - x0, n1 - x1);
    x0 = n0;
    x1 = n1;
    fx = fn;
    if (moved < 1e-12) break;
  }
  lk = x0;
  ls = x1;
  value = fx;
  return std::isfinite(fx);
}

}  // namespace

std::vector<ThomasParams> contrast_restart_grid() {
  std::vector<ThomasParams> grid;
  for (double lk : {-12.0, -8.5, -5.0, -1.5, 2.0})
    for (double ls : {-3.0, -1.25, 0.5, 2.25, 4.0})
      grid.push_back({std::exp(lk), std::exp(ls)});
  return grid;
}

ThomasParams min_contrast_thomas(const KEstimate& k_est, double r_min,
                                 double r_max, double b) {
  const ContrastFn f{k_est, r_min, r_max, b};

  // Rank the restart points and descend from the five best.
  struct Start {
    double value, lk, ls;
  };
  std::vector<Start> starts;
  for (const ThomasParams& pt : contrast_restart_grid()) {
    const double lk = std::log(pt.kappa), ls = std::log(pt.sigma);
    const double v = f(lk, ls);
    if (std::isfinite(v)) starts.push_back({v, lk, ls});
  }
  if (starts.empty())
    throw DivergenceError("min_contrast_thomas: contrast not finite at any restart", 0);
  std::sort(starts.begin(), starts.end(),
            [](const Start& a, const Start& b) { return a.value < b.value; });

  double best_value = starts.front().value;
  double best_lk = starts.front().lk, best_ls = starts.front().ls;
  bool any = false;
  for (std::size_t s = 0; s < starts.size() && s < 5; ++s) {
    double lk = starts[s].lk, ls = starts[s].ls, v = starts[s].value;
    if (!descend(f, lk, ls, v)) continue;
    any = true;
    if (v < best_value) {
      best_value = v;
      best_lk = lk;
      best_ls = ls;
    }
  }
  if (!any)
    throw DivergenceError("min_contrast_thomas: every descent failed", 0);
  return {std::exp(best_lk), std::exp(best_ls)};
}

TwoStepFit two_step_fit(const PointPattern& pattern, const CovariateField& field,
                        const Window& window, const LogLinearModel& model) {
  TwoStepFit out;
  out.k_est = k_inhom(pattern, model, field, window, default_r_grid());
  out.params = min_contrast_thomas(out.k_est);
  out.spec = thomas_second_order(out.params.kappa, out.params.sigma);
  return out;
}

void write_k_csv(const std::string& path, const KEstimate& k_est) {
  std::ofstream out(path);
  if (!out) throw ConfigError("write_k_csv: cannot open " + path);
  out << "r,k_hat\n";
  for (std::size_t i = 0; i < k_est.r_grid.size(); ++i)
    out << format_real(k_est.r_grid[i]) << ',' << format_real(k_est.k_hat[i])
        << '\n';
}

}  // namespace ppsel
