#include "ppsel/bench.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "parallel.hpp"
#include "ppsel/noise.hpp"

namespace ppsel {

namespace {

// Fixed benchmark geometry: a 201 x 101 raster stack over [0,250] x [0,125]
// with 15 covariates, of which the first two are informative.
constexpr int kBenchP = 15;
constexpr int kGridNx = 201;
constexpr int kGridNy = 101;
constexpr double kFieldSmoothness = 12.0;
const Window kBenchWindow{0.0, 0.0, 250.0, 125.0};

constexpr std::uint64_t kFieldStream = 0x666c64;  // "fld"
constexpr std::uint64_t kSimStream = 1;
constexpr std::uint64_t kNoiseStream = 2;
constexpr std::uint64_t kStabilityStream = 3;

std::uint64_t scenario_code(const std::string& scenario) {
  if (scenario == "P1") return 1;
  if (scenario == "P2") return 2;
  if (scenario == "T1") return 3;
  if (scenario == "T2") return 4;
  throw ConfigError("bench: unknown scenario '" + scenario + "'");
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return s;
}

CriterionKind criterion_of(Selector s) {
  switch (s) {
    case Selector::BIC: return CriterionKind::BIC;
    case Selector::ERIC: return CriterionKind::ERIC;
    case Selector::CBIC: return CriterionKind::CBIC;
    case Selector::CERIC: return CriterionKind::CERIC;
    default: throw ConfigError("bench: stability has no criterion kind");
  }
}

}  // namespace

Selector parse_selector(const std::string& name) {
  const std::string s = lower(name);
  if (s == "bic") return Selector::BIC;
  if (s == "eric") return Selector::ERIC;
  if (s == "cbic") return Selector::CBIC;
  if (s == "ceric") return Selector::CERIC;
  if (s == "stability") return Selector::Stability;
  throw ConfigError("bench: unknown selector '" + name + "'");
}

PenaltyKind parse_penalty(const std::string& name) {
  const std::string s = lower(name);
  if (s == "l0") return PenaltyKind::L0;
  if (s == "l1") return PenaltyKind::L1;
  throw ConfigError("bench: unknown penalty '" + name + "'");
}

std::string selector_name(Selector s) {
  switch (s) {
    case Selector::BIC: return "bic";
    case Selector::ERIC: return "eric";
    case Selector::CBIC: return "cbic";
    case Selector::CERIC: return "ceric";
    case Selector::Stability: return "stability";
  }
  return "?";
}

std::string penalty_name(PenaltyKind kind) {
  return kind == PenaltyKind::L0 ? "L0" : "L1";
}

void validate_config(const ExperimentConfig& config) {
  scenario_code(config.scenario);
  if (config.n_grid.empty()) throw ConfigError("bench: empty n_grid");
  for (double n : config.n_grid)
    if (!(n > 0.0)) throw ConfigError("bench: expected counts must be positive");
  if (config.c_grid.empty()) throw ConfigError("bench: empty c_grid");
  for (int c : config.c_grid)
    if (c < 0) throw ConfigError("bench: noise magnitudes must be nonnegative");
  if (config.reps < 1) throw ConfigError("bench: reps must be at least 1");
  if (config.second_order != "none" && config.second_order != "oracle" &&
      config.second_order != "estimated")
    throw ConfigError("bench: second_order must be none, oracle, or estimated");
  if (config.lambda_count < 2) throw ConfigError("bench: lambda_count must be >= 2");
  if (config.lambda_min < 0.0 || config.lambda_max < 0.0 ||
      (config.lambda_min > 0.0 && config.lambda_max <= config.lambda_min))
    throw ConfigError("bench: invalid lambda range override");
  if (config.true_beta.size() > kBenchP)
    throw ConfigError("bench: true_beta longer than the covariate stack");
  if (!(config.thomas.kappa > 0.0 && config.thomas.sigma > 0.0))
    throw ConfigError("bench: Thomas parameters must be positive");
  if (!(config.pfer > 0.0) || config.k_boot < 2 ||
      !(config.p_thin > 0.0 && config.p_thin < 1.0) ||
      !(config.pi_th > 0.5 && config.pi_th <= 1.0))
    throw ConfigError("bench: invalid stability settings");
  if (config.threads < 0) throw ConfigError("bench: threads must be nonnegative");
}

BenchContext make_bench_context(const ExperimentConfig& config) {
  validate_config(config);
  BenchContext ctx;
  const std::uint64_t code = scenario_code(config.scenario);
  ctx.thomas = code >= 3;
  ctx.detection = (code == 2) || (code == 4);

  Rng field_rng = Rng::derive(config.seed, {kFieldStream});
  ctx.field = synth_covariates(field_rng(), kBenchP, kGridNx, kGridNy,
                               kBenchWindow, kFieldSmoothness);
  ctx.dx = ctx.field.dx;

  // The Thomas benchmark observes on the 4σ-eroded window to dodge cluster
  // edge effects; Poisson uses the full raster extent.
  if (ctx.thomas) {
    const double m = 4.0 * config.thomas.sigma;
    ctx.window = Window{kBenchWindow.x0 + m, kBenchWindow.y0 + m,
                        kBenchWindow.x1 - m, kBenchWindow.y1 - m};
  } else {
    ctx.window = kBenchWindow;
  }
  ctx.quad = std::make_shared<const QuadratureScheme>(
      make_quadrature(ctx.field, ctx.window));

  const double lo =
      config.lambda_min > 0.0 ? config.lambda_min : (ctx.thomas ? 1e-3 : 1e-4);
  const double hi =
      config.lambda_max > 0.0 ? config.lambda_max : (ctx.thomas ? 1e3 : 5e2);
  ctx.lambda_grid = lambda_grid(lo, hi, config.lambda_count);

  ctx.true_beta = Eigen::VectorXd::Zero(kBenchP);
  if (config.true_beta.size() > 0) {
    ctx.true_beta.head(config.true_beta.size()) = config.true_beta;
  } else if (ctx.thomas) {
    ctx.true_beta[0] = 2.0;
    ctx.true_beta[1] = 0.75;
  } else {
    ctx.true_beta[0] = 1.0;
    ctx.true_beta[1] = 0.5;
  }
  ctx.truth = support_of(ctx.true_beta);
  return ctx;
}

RepOutcome run_cell(const ExperimentConfig& config, const BenchContext& ctx,
                    double n, int c, std::uint64_t rep) {
  const std::uint64_t code = scenario_code(config.scenario);
  const std::uint64_t nn = static_cast<std::uint64_t>(std::llround(n));
  const std::uint64_t cc = static_cast<std::uint64_t>(c);

  RepOutcome out;
  out.outcome = outcome_from_support({}, ctx.truth, kBenchP);
  try {
    LogLinearModel truth;
    truth.beta = ctx.true_beta;
    truth = calibrate_intercept(truth, ctx.field, ctx.window, n);

    Rng sim_rng = Rng::derive(config.seed, {code, nn, cc, rep, kSimStream});
    PointPattern pattern =
        ctx.thomas
            ? sample_thomas(truth, config.thomas, ctx.field, ctx.window, sim_rng)
            : sample_poisson(truth, ctx.field, ctx.window, sim_rng);

    NoiseSpec noise;
    noise.c = static_cast<double>(c);
    noise.dx = ctx.dx;
    Rng noise_rng = Rng::derive(config.seed, {code, nn, cc, rep, kNoiseStream});
    pattern = ctx.detection ? hardcore_thin(pattern, noise, noise_rng)
                            : displace(pattern, noise, noise_rng);
    out.n_observed = pattern.size();
    if (pattern.size() == 0)
      throw DegenerateDataError("no points survived the noise");

    const FitData fit = build_fit_data(pattern, ctx.quad, 1.0);
    PathConfig pc;
    pc.lambda_grid = ctx.lambda_grid;

    if (config.selector == Selector::Stability) {
      StabilityConfig sc;
      sc.K = config.k_boot;
      sc.p_thin = config.p_thin;
      sc.pi_th = config.pi_th;
      sc.pfer_target = config.pfer;
      sc.seed = Rng::derive(config.seed, {code, nn, cc, rep, kStabilityStream})();
      sc.threads = 1;  // the grid is already concurrent at the rep level

      const LambdaRange range = calibrate_lambda_range(
          pattern, ctx.field, ctx.window, config.penalty, sc, pc);
      PathConfig used = pc;
      used.lambda_grid.clear();
      for (double l : pc.lambda_grid)
        if (l <= range.lambda_max && l >= range.lambda_min)
          used.lambda_grid.push_back(l);
      if (used.lambda_grid.empty()) used.lambda_grid = {range.lambda_max};

      const StabilityPath path = stability_path(pattern, ctx.field, ctx.window,
                                                config.penalty, sc, used);
      out.support = select_stable(path, fit).support;
    } else {
      const LogLinearModel pilot = fit_unpenalized(fit);
      const PathResult path =
          solve_path(fit, config.penalty, adaptive_weights(pilot), pc);

      SecondOrderSpec spec = poisson_second_order();
      if (config.second_order == "oracle") {
        spec = thomas_second_order(config.thomas.kappa, config.thomas.sigma);
      } else if (config.second_order == "estimated") {
        spec = two_step_fit(pattern, ctx.field, ctx.window, pilot).spec;
      }
      out.support =
          select_by_criterion(path, fit, criterion_of(config.selector), spec)
              .support;
    }
    out.outcome = outcome_from_support(out.support, ctx.truth, kBenchP);
  } catch (const Error& e) {
    out.failed = true;
    out.error = e.what();
    out.support.clear();
    out.outcome = outcome_from_support({}, ctx.truth, kBenchP);
  }
  return out;
}

GridResult run_grid(const ExperimentConfig& config) {
  const BenchContext ctx = make_bench_context(config);

  // Every (cell, rep) task is independent with its own derived seed; tasks
  // fill indexed slots, and aggregation plus output assembly below run in
  // grid order, so the result is byte-identical for every thread count.
  const int n_cells = static_cast<int>(config.n_grid.size() * config.c_grid.size());
  const int n_tasks = n_cells * config.reps;
  std::vector<RepOutcome> slots(static_cast<std::size_t>(n_tasks));
  detail::parallel_for_index(n_tasks, config.threads, [&](int t) {
    const int cell = t / config.reps;
    const int rep = t % config.reps;
    const double n = config.n_grid[static_cast<std::size_t>(
        cell / static_cast<int>(config.c_grid.size()))];
    const int c = config.c_grid[static_cast<std::size_t>(
        cell % static_cast<int>(config.c_grid.size()))];
    slots[static_cast<std::size_t>(t)] =
        run_cell(config, ctx, n, c, static_cast<std::uint64_t>(rep));
  });

  GridResult result;
  result.config = config;
  int cell_index = 0;
  for (double n : config.n_grid) {
    for (int c : config.c_grid) {
      std::vector<SelectionOutcome> outcomes;
      outcomes.reserve(config.reps);
      for (int rep = 0; rep < config.reps; ++rep) {
        const RepOutcome& ro =
            slots[static_cast<std::size_t>(cell_index * config.reps + rep)];
        outcomes.push_back(ro.outcome);
        if (ro.failed) {
          std::ostringstream row;
          row << config.scenario << ',' << penalty_name(config.penalty) << ','
              << selector_name(config.selector) << ',' << format_real(n) << ','
              << c << ',' << rep << ',' << ro.error;
          result.diagnostics.push_back(row.str());
        }
      }
      CellMetrics cell;
      cell.n = n;
      cell.c = c;
      cell.report = metrics_report(outcomes);
      result.cells.push_back(std::move(cell));
      ++cell_index;
    }
  }

  // Unweighted grand means; Φ_S averages its defined cells only.
  MetricsReport& g = result.grand;
  int phi_cells = 0;
  for (const CellMetrics& cell : result.cells) {
    g.tpr += cell.report.tpr;
    g.fpr += cell.report.fpr;
    g.ppv += cell.report.ppv;
    g.f1 += cell.report.f1;
    g.empirical_pfer += cell.report.empirical_pfer;
    if (cell.report.phi_s_defined) {
      g.phi_s += cell.report.phi_s;
      ++phi_cells;
    }
  }
  const double m = static_cast<double>(result.cells.size());
  g.tpr /= m;
  g.fpr /= m;
  g.ppv /= m;
  g.f1 /= m;
  g.empirical_pfer /= m;
  if (phi_cells > 0) {
    g.phi_s /= phi_cells;
    g.phi_s_defined = true;
  } else {
    g.phi_s = std::numeric_limits<double>::quiet_NaN();
    g.phi_s_defined = false;
  }
  g.rep_count = config.reps;
  return result;
}

namespace {

void metrics_row(std::ostream& out, const GridResult& grid, const std::string& n,
                 const std::string& c, const MetricsReport& r) {
  out << grid.config.scenario << ',' << penalty_name(grid.config.penalty) << ','
      << selector_name(grid.config.selector) << ',' << n << ',' << c << ','
      << format_real(r.tpr) << ',' << format_real(r.fpr) << ','
      << format_real(r.ppv) << ',' << format_real(r.f1) << ','
      << format_real(r.phi_s) << ',' << format_real(r.empirical_pfer) << ','
      << r.rep_count << '\n';
}

}  // namespace

void write_metrics_csv(const std::string& path, const GridResult& grid) {
  std::ofstream out(path);
  if (!out) throw ConfigError("write_metrics_csv: cannot open " + path);
  out << "scenario,penalty,selector,n,c,tpr,fpr,ppv,f1,phi_s,pfer,reps\n";
  for (const CellMetrics& cell : grid.cells)
    metrics_row(out, grid, format_real(cell.n), std::to_string(cell.c),
                cell.report);
  metrics_row(out, grid, "all", "all", grid.grand);
  if (!out) throw ConfigError("write_metrics_csv: write failed for " + path);
}

void write_diagnostics_csv(const std::string& path, const GridResult& grid) {
  std::ofstream out(path);
  if (!out) throw ConfigError("write_diagnostics_csv: cannot open " + path);
  out << "scenario,penalty,selector,n,c,rep,error\n";
  for (const std::string& row : grid.diagnostics) out << row << '\n';
  if (!out) throw ConfigError("write_diagnostics_csv: write failed for " + path);
}

namespace {

std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

double parse_real(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("bench config: bad number for '" + key + "': " + value);
  }
}

long long parse_int(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const long long v = std::stoll(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("bench config: bad integer for '" + key + "': " + value);
  }
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> parts;
  std::string cur;
  std::istringstream in(value);
  while (std::getline(in, cur, ',')) parts.push_back(trim(cur));
  return parts;
}

void apply_key(ExperimentConfig& config, const std::string& key,
               const std::string& value) {
  if (key == "reps") {
    config.reps = static_cast<int>(parse_int(key, value));
  } else if (key == "seed") {
    config.seed = static_cast<std::uint64_t>(parse_int(key, value));
  } else if (key == "penalty") {
    config.penalty = parse_penalty(value);
  } else if (key == "selector") {
    config.selector = parse_selector(value);
  } else if (key == "second_order") {
    config.second_order = lower(value);
  } else if (key == "n_grid") {
    config.n_grid.clear();
    for (const std::string& part : split_list(value))
      config.n_grid.push_back(parse_real(key, part));
  } else if (key == "c_grid") {
    config.c_grid.clear();
    for (const std::string& part : split_list(value))
      config.c_grid.push_back(static_cast<int>(parse_int(key, part)));
  } else if (key == "true_beta") {
    const std::vector<std::string> parts = split_list(value);
    config.true_beta.resize(static_cast<int>(parts.size()));
    for (std::size_t i = 0; i < parts.size(); ++i)
      config.true_beta[static_cast<int>(i)] = parse_real(key, parts[i]);
  } else if (key == "kappa") {
    config.thomas.kappa = parse_real(key, value);
  } else if (key == "sigma") {
    config.thomas.sigma = parse_real(key, value);
  } else if (key == "lambda_min") {
    config.lambda_min = parse_real(key, value);
  } else if (key == "lambda_max") {
    config.lambda_max = parse_real(key, value);
  } else if (key == "lambda_count") {
    config.lambda_count = static_cast<int>(parse_int(key, value));
  } else if (key == "pfer") {
    config.pfer = parse_real(key, value);
  } else if (key == "k_boot") {
    config.k_boot = static_cast<int>(parse_int(key, value));
  } else if (key == "p_thin") {
    config.p_thin = parse_real(key, value);
  } else if (key == "pi_th") {
    config.pi_th = parse_real(key, value);
  } else if (key == "threads") {
    config.threads = static_cast<int>(parse_int(key, value));
  } else {
    throw ConfigError("bench config: unknown key '" + key + "'");
  }
}

}  // namespace

std::vector<ExperimentConfig> parse_experiment_configs(const std::string& text) {
  std::vector<ExperimentConfig> configs;
  ExperimentConfig defaults;
  bool in_section = false;

  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = trim(raw);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;

    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigError("bench config: unterminated section at line " +
                          std::to_string(line_no));
      const std::string header = trim(line.substr(1, line.size() - 2));
      const std::size_t cut = header.find_first_of(". \t:");
      const std::string scenario =
          cut == std::string::npos ? header : header.substr(0, cut);
      ExperimentConfig config = defaults;
      config.scenario = scenario;
      scenario_code(scenario);
      configs.push_back(std::move(config));
      in_section = true;
      continue;
    }

    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("bench config: expected key = value at line " +
                        std::to_string(line_no));
    const std::string key = lower(trim(line.substr(0, eq)));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty())
      throw ConfigError("bench config: empty key or value at line " +
                        std::to_string(line_no));
    apply_key(in_section ? configs.back() : defaults, key, value);
  }

  if (configs.empty())
    throw ConfigError("bench config: no scenario sections found");
  for (const ExperimentConfig& config : configs) validate_config(config);
  return configs;
}

std::vector<ExperimentConfig> load_experiment_configs(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("bench config: cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_experiment_configs(buf.str());
}

}  // namespace ppsel
