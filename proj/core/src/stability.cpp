#include "ppsel/stability.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <optional>
#include <random>

#include "parallel.hpp"

namespace ppsel {

namespace {

// Stream tags separating the K path replicates, the calibration pilots, and
// the warm-start draw from one another.
constexpr std::uint64_t kPathStream = 0x70617468;   // "path"
constexpr std::uint64_t kPilotStream = 0x70696c74;  // "pilt"
constexpr std::uint64_t kWarmStream = 0x7761726d;   // "warm"
constexpr int kPilotCount = 10;

void validate_config(const StabilityConfig& config) {
  if (config.K < 2) throw ConfigError("stability: K must be at least 2");
  if (!(config.p_thin > 0.0 && config.p_thin < 1.0))
    throw ConfigError("stability: p_thin must lie strictly inside (0, 1)");
  if (!(config.pi_th > 0.5 && config.pi_th <= 1.0))
    throw ConfigError("stability: pi_th must lie in (0.5, 1]");
  if (!(config.pfer_target > 0.0))
    throw ConfigError("stability: pfer_target must be positive");
}

void validate_grid(const std::vector<double>& grid) {
  if (grid.empty()) throw ConfigError("stability: empty lambda grid");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!(grid[i] > 0.0)) throw ConfigError("stability: lambda values must be positive");
    if (i > 0 && !(grid[i] < grid[i - 1]))
      throw ConfigError("stability: lambda grid must be strictly decreasing");
  }
}

// Supports along the path for one subsample; empty at every λ when the draw
// has no points or the replicate fails numerically.
struct ReplicateSupports {
  std::vector<std::vector<int>> supports;
  bool empty_draw = false;
  bool failed = false;
};

// Warm start shared by every replicate pilot: the fit of one extra subsample
// drawn from its own stream. Subsamples are exchangeable, so this stationary
// point is a near-solution for each of them, and sharing one warm start keeps
// the replicates independent of one another. Absent on any failure.
std::optional<LogLinearModel> shared_warm_start(
    const Subsampler& subsampler, std::shared_ptr<const QuadratureScheme> quad,
    std::uint64_t seed) {
  Rng rng = Rng::derive(seed, {kWarmStream});
  const Subsample sub = subsampler(rng);
  if (sub.pattern.size() == 0) return std::nullopt;
  try {
    const FitData fd =
        build_fit_data(sub.pattern, std::move(quad), sub.integral_factor);
    return fit_unpenalized(fd);
  } catch (const Error&) {
    return std::nullopt;
  }
}

// A warm start that fails falls back to the cold start before the replicate
// is declared failed, so the warm start can only save iterations, never lose
// a replicate.
LogLinearModel pilot_fit(const FitData& fd, const std::optional<LogLinearModel>& warm) {
  if (warm) {
    FitOptions opts;
    opts.init = warm;
    try {
      return fit_unpenalized(fd, opts);
    } catch (const NonConvergenceError&) {
    } catch (const DivergenceError&) {
    }
  }
  return fit_unpenalized(fd);
}

ReplicateSupports replicate_supports(const Subsample& sub,
                                     std::shared_ptr<const QuadratureScheme> quad,
                                     PenaltyKind kind, const PathConfig& path_config,
                                     const std::optional<LogLinearModel>& warm) {
  ReplicateSupports out;
  out.supports.assign(path_config.lambda_grid.size(), {});
  if (sub.pattern.size() == 0) {
    out.empty_draw = true;
    return out;
  }
  try {
    const FitData fd = build_fit_data(sub.pattern, std::move(quad), sub.integral_factor);
    const LogLinearModel pilot = pilot_fit(fd, warm);
    const PathResult path = solve_path(fd, kind, adaptive_weights(pilot), path_config);
    out.supports = path.supports;
  } catch (const NonConvergenceError&) {
    out.failed = true;
    out.supports.assign(path_config.lambda_grid.size(), {});
  } catch (const DivergenceError&) {
    out.failed = true;
    out.supports.assign(path_config.lambda_grid.size(), {});
  }
  return out;
}

}  // namespace

Subsampler thinning_subsampler(const PointPattern& pattern, double retain) {
  if (!(retain > 0.0 && retain < 1.0))
    throw ConfigError("thinning_subsampler: retention must lie inside (0, 1)");
  return [pattern, retain](Rng& rng) {
    return Subsample{p_thin(pattern, retain, rng), retain};
  };
}

Subsampler replicate_subsampler(const std::vector<PointPattern>& patterns) {
  if (patterns.empty())
    throw ConfigError("replicate_subsampler: no patterns to resample");
  const Window& win = patterns.front().window;
  for (const PointPattern& pat : patterns) {
    if (pat.window.x0 != win.x0 || pat.window.y0 != win.y0 ||
        pat.window.x1 != win.x1 || pat.window.y1 != win.y1)
      throw ConfigError("replicate_subsampler: patterns must share one window");
  }
  return [patterns](Rng& rng) {
    const int n = static_cast<int>(patterns.size());
    Subsample sub;
    sub.pattern.window = patterns.front().window;
    std::uniform_int_distribution<int> pick(0, n - 1);
    for (int i = 0; i < n; ++i) {
      const PointPattern& chosen = patterns[pick(rng)];
      for (int j = 0; j < chosen.size(); ++j) sub.pattern.add(chosen.x[j], chosen.y[j]);
    }
    sub.integral_factor = static_cast<double>(n);
    return sub;
  };
}

StabilityPath stability_path_with(const Subsampler& subsampler,
                                  const CovariateField& field, const Window& window,
                                  PenaltyKind kind, const StabilityConfig& config,
                                  const PathConfig& path_config) {
  validate_config(config);
  validate_grid(path_config.lambda_grid);
  if (!subsampler) throw ConfigError("stability: missing subsampler");

  const auto quad =
      std::make_shared<const QuadratureScheme>(make_quadrature(field, window));
  const int p = static_cast<int>(quad->z.cols());
  const int n_lambda = static_cast<int>(path_config.lambda_grid.size());

  StabilityPath out;
  out.lambda_grid = path_config.lambda_grid;
  out.config = config;
  out.pi = Eigen::MatrixXd::Zero(n_lambda, p);
  out.q_profile.assign(n_lambda, 0.0);

  // Replicates are independent given the shared warm start; they fill their
  // own slots, and the Π reduction below runs in replicate order so the
  // result does not depend on the thread count.
  const std::optional<LogLinearModel> warm = shared_warm_start(subsampler, quad, config.seed);
  std::vector<ReplicateSupports> slots(static_cast<std::size_t>(config.K));
  detail::parallel_for_index(config.K, config.threads, [&](int k) {
    Rng rng = Rng::derive(config.seed, {kPathStream, static_cast<std::uint64_t>(k)});
    slots[static_cast<std::size_t>(k)] =
        replicate_supports(subsampler(rng), quad, kind, path_config, warm);
  });

  for (const ReplicateSupports& rep : slots) {
    if (rep.empty_draw) ++out.empty_subsamples;
    if (rep.failed) ++out.failed_subsamples;

    std::vector<char> in_union(p, 0);
    int union_size = 0;
    for (int i = 0; i < n_lambda; ++i) {
      for (int j : rep.supports[i]) {
        out.pi(i, j) += 1.0;
        if (!in_union[j]) {
          in_union[j] = 1;
          ++union_size;
        }
      }
      out.q_profile[i] += union_size;
    }
  }

  out.pi /= static_cast<double>(config.K);
  for (double& q : out.q_profile) q /= static_cast<double>(config.K);
  out.q_lambda = out.q_profile.back();
  return out;
}

StabilityPath stability_path(const PointPattern& pattern, const CovariateField& field,
                             const Window& window, PenaltyKind kind,
                             const StabilityConfig& config,
                             const PathConfig& path_config) {
  validate_config(config);
  if (pattern.size() == 0)
    throw DegenerateDataError("stability: the observed pattern is empty");
  return stability_path_with(thinning_subsampler(pattern, config.p_thin), field,
                             window, kind, config, path_config);
}

double pfer_bound(double pi_th, double q_lambda, int p) {
  if (!(pi_th > 0.5 && pi_th <= 1.0))
    throw ConfigError("pfer_bound: pi_th must lie in (0.5, 1]");
  if (p < 1) throw ConfigError("pfer_bound: p must be at least 1");
  if (!(q_lambda >= 0.0)) throw ConfigError("pfer_bound: q must be nonnegative");
  return q_lambda * q_lambda / (static_cast<double>(p) * (2.0 * pi_th - 1.0));
}

LambdaRange calibrate_lambda_range_with(const Subsampler& subsampler,
                                        const CovariateField& field,
                                        const Window& window, PenaltyKind kind,
                                        const StabilityConfig& config,
                                        const PathConfig& path_config) {
  validate_config(config);
  validate_grid(path_config.lambda_grid);
  if (!subsampler) throw ConfigError("stability: missing subsampler");

  const auto quad =
      std::make_shared<const QuadratureScheme>(make_quadrature(field, window));
  const int p = static_cast<int>(quad->z.cols());
  const int n_lambda = static_cast<int>(path_config.lambda_grid.size());

  std::vector<int> nonempty(n_lambda, 0);   // pilots with a nonempty support at λ_i
  std::vector<double> q_hat(n_lambda, 0.0); // mean union size down to λ_i
  const std::optional<LogLinearModel> warm = shared_warm_start(subsampler, quad, config.seed);
  std::vector<ReplicateSupports> slots(static_cast<std::size_t>(kPilotCount));
  detail::parallel_for_index(kPilotCount, config.threads, [&](int k) {
    Rng rng = Rng::derive(config.seed, {kPilotStream, static_cast<std::uint64_t>(k)});
    slots[static_cast<std::size_t>(k)] =
        replicate_supports(subsampler(rng), quad, kind, path_config, warm);
  });
  for (const ReplicateSupports& rep : slots) {
    std::vector<char> in_union(p, 0);
    int union_size = 0;
    for (int i = 0; i < n_lambda; ++i) {
      if (!rep.supports[i].empty()) ++nonempty[i];
      for (int j : rep.supports[i]) {
        if (!in_union[j]) {
          in_union[j] = 1;
          ++union_size;
        }
      }
      q_hat[i] += union_size;
    }
  }
  for (double& q : q_hat) q /= static_cast<double>(kPilotCount);

  LambdaRange range;
  range.q_target =
      std::sqrt(config.pfer_target * p * (2.0 * config.pi_th - 1.0));

  // Smallest grid value at which no pilot selected anything.
  range.empty_at_max = false;
  range.lambda_max = path_config.lambda_grid.front();
  for (int i = n_lambda - 1; i >= 0; --i) {
    if (nonempty[i] == 0) {
      range.lambda_max = path_config.lambda_grid[i];
      range.empty_at_max = true;
      break;
    }
  }

  // Largest grid value where the mean union size first reaches the target.
  range.q_target_reached = false;
  range.lambda_min = path_config.lambda_grid.back();
  for (int i = 0; i < n_lambda; ++i) {
    if (q_hat[i] >= range.q_target) {
      range.lambda_min = path_config.lambda_grid[i];
      range.q_target_reached = true;
      break;
    }
  }
  range.lambda_min = std::min(range.lambda_min, range.lambda_max);
  return range;
}

LambdaRange calibrate_lambda_range(const PointPattern& pattern,
                                   const CovariateField& field, const Window& window,
                                   PenaltyKind kind, const StabilityConfig& config,
                                   const PathConfig& path_config) {
  validate_config(config);
  if (pattern.size() == 0)
    throw DegenerateDataError("stability: the observed pattern is empty");
  return calibrate_lambda_range_with(thinning_subsampler(pattern, config.p_thin),
                                     field, window, kind, config, path_config);
}

std::vector<int> threshold_support(const StabilityPath& path, double pfer_target) {
  if (!(pfer_target > 0.0))
    throw ConfigError("threshold_support: pfer_target must be positive");
  const int n_lambda = static_cast<int>(path.lambda_grid.size());
  const int p = static_cast<int>(path.pi.cols());
  const double target =
      std::sqrt(pfer_target * p * (2.0 * path.config.pi_th - 1.0));

  int last = n_lambda - 1;  // grid minimum when the target is unreachable
  for (int i = 0; i < n_lambda; ++i) {
    if (path.q_profile[i] >= target) {
      last = i;
      break;
    }
  }

  std::vector<int> support;
  for (int j = 0; j < p; ++j) {
    const double max_pi = path.pi.col(j).head(last + 1).maxCoeff();
    if (max_pi >= path.config.pi_th) support.push_back(j);
  }
  return support;
}

StabilitySelection select_stable(const StabilityPath& path, const FitData& fit) {
  if (path.lambda_grid.empty() || path.pi.rows() == 0)
    throw ConfigError("select_stable: empty stability path");
  const int p = static_cast<int>(path.pi.cols());
  if (fit.p() != p)
    throw ConfigError("select_stable: path and fit data disagree on p");

  StabilitySelection sel;
  sel.config = path.config;
  sel.q_lambda = path.q_lambda;
  sel.pfer_bound = pfer_bound(path.config.pi_th, path.q_lambda, p);
  sel.max_pi.resize(p);
  for (int j = 0; j < p; ++j) {
    sel.max_pi[j] = path.pi.col(j).maxCoeff();
    if (sel.max_pi[j] >= path.config.pi_th) sel.support.push_back(j);
  }
  sel.model = fit_unpenalized_on(fit, sel.support);
  return sel;
}

void write_stability_csv(const std::string& path, const StabilityPath& sp) {
  std::ofstream out(path);
  if (!out) throw ConfigError("write_stability_csv: cannot open " + path);
  out << "lambda,covariate,pi\n";
  for (std::size_t i = 0; i < sp.lambda_grid.size(); ++i)
    for (int j = 0; j < sp.pi.cols(); ++j)
      out << format_real(sp.lambda_grid[i]) << ',' << j << ','
          << format_real(sp.pi(static_cast<int>(i), j)) << '\n';
  if (!out) throw ConfigError("write_stability_csv: write failed for " + path);
}

}  // namespace ppsel
