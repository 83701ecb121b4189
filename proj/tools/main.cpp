// ppsel command line tool: simulate point patterns, fit penalized intensity
// models, run covariate selection, and execute benchmark experiment grids.
//
// Exit codes: 0 success, 2 configuration/input error, 3 numerical failure.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ppsel/bench.hpp"
#include "ppsel/criteria.hpp"
#include "ppsel/errors.hpp"
#include "ppsel/geometry.hpp"
#include "ppsel/likelihood.hpp"
#include "ppsel/rng.hpp"
#include "ppsel/secondorder.hpp"
#include "ppsel/simulate.hpp"
#include "ppsel/solver.hpp"
#include "ppsel/stability.hpp"

namespace {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Shared input handling

// Loads one or more covariate CSVs and stacks their rasters on a common grid.
ppsel::CovariateField load_covariates(const std::vector<std::string>& paths,
                                      bool do_standardize) {
  if (paths.empty()) throw ppsel::ConfigError("no covariate file given");
  ppsel::CovariateField field = ppsel::read_covariates_csv(paths.front());
  for (std::size_t i = 1; i < paths.size(); ++i) {
    ppsel::CovariateField next = ppsel::read_covariates_csv(paths[i]);
    const bool compatible = next.n_x == field.n_x && next.n_y == field.n_y &&
                            std::abs(next.x0 - field.x0) < 1e-9 &&
                            std::abs(next.y0 - field.y0) < 1e-9 &&
                            std::abs(next.dx - field.dx) < 1e-9 &&
                            std::abs(next.dy - field.dy) < 1e-9;
    if (!compatible)
      throw ppsel::ConfigError("covariate file '" + paths[i] +
                               "' disagrees with '" + paths.front() +
                               "' on grid geometry");
    for (int k = 0; k < next.p(); ++k) {
      field.values.push_back(std::move(next.values[k]));
      field.names.push_back(next.names[k]);
    }
    field.standardized = false;
  }
  for (std::size_t a = 0; a < field.names.size(); ++a)
    for (std::size_t b = a + 1; b < field.names.size(); ++b)
      if (field.names[a] == field.names[b])
        throw ppsel::ConfigError("duplicate covariate name '" + field.names[a] + "'");
  return do_standardize ? ppsel::standardize(field) : field;
}

std::vector<double> parse_real_list(const std::string& text, const char* what) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      throw ppsel::ConfigError(std::string(what) + ": cannot parse '" + item + "'");
    }
    while (used < item.size() && std::isspace(static_cast<unsigned char>(item[used])))
      ++used;
    if (used != item.size())
      throw ppsel::ConfigError(std::string(what) + ": cannot parse '" + item + "'");
    out.push_back(v);
  }
  if (out.empty())
    throw ppsel::ConfigError(std::string(what) + ": empty list");
  return out;
}

ppsel::Window parse_window(const std::string& text) {
  const std::vector<double> v = parse_real_list(text, "--window");
  if (v.size() != 4)
    throw ppsel::ConfigError("--window expects x0,y0,x1,y1");
  const ppsel::Window w{v[0], v[1], v[2], v[3]};
  if (!(w.width() > 0.0) || !(w.height() > 0.0))
    throw ppsel::ConfigError("--window must have positive extent");
  return w;
}

// "min,max,count" -> decreasing log-equidistant grid.
std::vector<double> parse_lambda_path(const std::string& text) {
  const std::vector<double> v = parse_real_list(text, "--path");
  if (v.size() != 3)
    throw ppsel::ConfigError("--path expects min,max,count");
  const int count = static_cast<int>(std::llround(v[2]));
  if (std::abs(v[2] - count) > 1e-9 || count < 1)
    throw ppsel::ConfigError("--path count must be a positive integer");
  if (count == 1) {
    if (!(v[0] > 0.0)) throw ppsel::ConfigError("--path values must be positive");
    return {v[0]};
  }
  return ppsel::lambda_grid(v[0], v[1], count);
}

Eigen::VectorXd padded_beta(const std::string& text, int p) {
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  if (text.empty()) return beta;
  const std::vector<double> v = parse_real_list(text, "--beta");
  if (static_cast<int>(v.size()) > p)
    throw ppsel::ConfigError("--beta has more entries than covariates");
  for (std::size_t i = 0; i < v.size(); ++i) beta[static_cast<int>(i)] = v[i];
  return beta;
}

json model_json(const ppsel::LogLinearModel& model,
                const std::vector<std::string>& names) {
  json j;
  j["log_omega"] = model.log_omega;
  j["beta"] = std::vector<double>(model.beta.data(),
                                  model.beta.data() + model.beta.size());
  j["names"] = names;
  return j;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw ppsel::ConfigError("cannot open '" + path + "' for writing");
  out << text;
  if (!out) throw ppsel::ConfigError("failed writing '" + path + "'");
}

// ---------------------------------------------------------------------------
// simulate

struct SimulateArgs {
  std::string process = "poisson";
  std::vector<std::string> covariates{"synth"};
  double target_n = 0.0;
  std::uint64_t seed = 0;
  std::string out;
  std::string covariates_out;
  std::string beta;
  std::string window;
  double kappa = 4e-3;
  double sigma = 1.5;
  int synth_p = 15;
  int synth_nx = 201;
  int synth_ny = 101;
  double synth_smoothness = 12.0;
  std::string synth_window = "0,0,250,125";
  bool no_standardize = false;
};

void run_simulate(const SimulateArgs& args) {
  ppsel::CovariateField field;
  if (args.covariates.size() == 1 && args.covariates[0] == "synth") {
    const ppsel::Window extent = parse_window(args.synth_window);
    field = ppsel::synth_covariates(args.seed, args.synth_p, args.synth_nx,
                                    args.synth_ny, extent, args.synth_smoothness);
  } else {
    field = load_covariates(args.covariates, !args.no_standardize);
  }
  const ppsel::Window window =
      args.window.empty() ? field.extent() : parse_window(args.window);

  ppsel::LogLinearModel model;
  model.beta = padded_beta(args.beta, field.p());
  model = ppsel::calibrate_intercept(model, field, window, args.target_n);

  ppsel::Rng rng = ppsel::Rng::derive(args.seed, {0x73696d});
  ppsel::PointPattern pattern;
  if (args.process == "thomas") {
    const ppsel::ThomasParams params{args.kappa, args.sigma};
    pattern = ppsel::sample_thomas(model, params, field, window, rng);
  } else {
    pattern = ppsel::sample_poisson(model, field, window, rng);
  }

  ppsel::write_pattern_csv(args.out, pattern);
  if (!args.covariates_out.empty())
    ppsel::write_covariates_csv(args.covariates_out, field);

  std::cout << "process=" << args.process << " expected_n="
            << ppsel::format_real(args.target_n) << " realized_n="
            << pattern.size() << " -> " << args.out << "\n";
}

// ---------------------------------------------------------------------------
// fit

struct FitArgs {
  std::string pattern;
  std::vector<std::string> covariates;
  std::string penalty = "l1";
  double lambda = -1.0;
  std::string path;
  std::string out;
  bool no_standardize = false;
  bool no_adaptive = false;
  int max_iter = 10000;
  double tol = 1e-4;
};

void run_fit(const FitArgs& args) {
  const ppsel::CovariateField field =
      load_covariates(args.covariates, !args.no_standardize);
  const ppsel::Window window = field.extent();
  const ppsel::PointPattern pattern = ppsel::read_pattern_csv(args.pattern, window);
  const ppsel::FitData fit = ppsel::build_fit_data(pattern, field, window);

  const bool have_lambda = args.lambda >= 0.0;
  const bool have_path = !args.path.empty();
  if (have_lambda == have_path)
    throw ppsel::ConfigError("fit: give exactly one of --lambda or --path");

  ppsel::PathConfig pc;
  pc.lambda_grid = have_path ? parse_lambda_path(args.path)
                             : std::vector<double>{args.lambda};
  pc.max_iter = args.max_iter;
  pc.tol = args.tol;

  const ppsel::PenaltyKind kind = ppsel::parse_penalty(args.penalty);
  const ppsel::LogLinearModel pilot = ppsel::fit_unpenalized(fit);
  const Eigen::VectorXd weights = args.no_adaptive
                                      ? Eigen::VectorXd::Ones(fit.p())
                                      : ppsel::adaptive_weights(pilot);
  const ppsel::PathResult path = ppsel::solve_path(fit, kind, weights, pc);

  std::ostringstream csv;
  csv << "lambda,term,value\n";
  for (std::size_t i = 0; i < path.lambdas.size(); ++i) {
    const std::string l = ppsel::format_real(path.lambdas[i]);
    csv << l << ",log_omega," << ppsel::format_real(path.models[i].log_omega)
        << '\n';
    for (int j = 0; j < fit.p(); ++j)
      csv << l << ',' << field.names[j] << ','
          << ppsel::format_real(path.models[i].beta[j]) << '\n';
  }
  write_text(args.out, csv.str());

  for (const ppsel::PgdDiagnostics& d : path.diagnostics)
    std::cout << "lambda=" << ppsel::format_real(d.lambda)
              << " iterations=" << d.iterations
              << " objective=" << ppsel::format_real(d.objective)
              << " converged=" << (d.converged ? "yes" : "no")
              << (d.stalled ? " (stalled)" : "") << "\n";
  std::cout << "n=" << pattern.size() << " p=" << fit.p() << " path="
            << path.lambdas.size() << " -> " << args.out << "\n";
}

// ---------------------------------------------------------------------------
// select

struct SelectArgs {
  std::string pattern;
  std::vector<std::string> covariates;
  std::string penalty = "l1";
  std::string selector = "stability";
  std::string path = "1e-4,5e2,35";
  double pfer = 1.0;
  int k = 50;
  double p_thin = 0.5;
  double pi_th = 0.9;
  std::uint64_t seed = 0;
  std::string out;
  std::string second_order = "poisson";
  double kappa = 4e-3;
  double sigma = 1.5;
  bool no_standardize = false;
  int threads = 0;
};

void run_select(const SelectArgs& args) {
  const ppsel::CovariateField field =
      load_covariates(args.covariates, !args.no_standardize);
  const ppsel::Window window = field.extent();
  const ppsel::PointPattern pattern = ppsel::read_pattern_csv(args.pattern, window);
  const ppsel::FitData fit = ppsel::build_fit_data(pattern, field, window);
  const ppsel::PenaltyKind kind = ppsel::parse_penalty(args.penalty);

  ppsel::PathConfig pc;
  pc.lambda_grid = parse_lambda_path(args.path);

  json result;
  result["config"] = {
      {"pattern", args.pattern},     {"covariates", args.covariates},
      {"penalty", args.penalty},     {"selector", args.selector},
      {"lambda_path", args.path},    {"standardized", !args.no_standardize},
      {"seed", args.seed},
  };
  result["n_points"] = pattern.size();

  std::vector<int> support;
  if (args.selector == "stability") {
    ppsel::StabilityConfig sc;
    sc.K = args.k;
    sc.p_thin = args.p_thin;
    sc.pi_th = args.pi_th;
    sc.pfer_target = args.pfer;
    sc.seed = args.seed;
    sc.threads = args.threads;
    result["config"]["pfer"] = args.pfer;
    result["config"]["k"] = args.k;
    result["config"]["p_thin"] = args.p_thin;
    result["config"]["pi_th"] = args.pi_th;

    const ppsel::LambdaRange range =
        ppsel::calibrate_lambda_range(pattern, field, window, kind, sc, pc);
    ppsel::PathConfig used = pc;
    used.lambda_grid.clear();
    for (double l : pc.lambda_grid)
      if (l <= range.lambda_max && l >= range.lambda_min)
        used.lambda_grid.push_back(l);
    if (used.lambda_grid.empty()) used.lambda_grid = {range.lambda_max};

    const ppsel::StabilityPath spath =
        ppsel::stability_path(pattern, field, window, kind, sc, used);
    const ppsel::StabilitySelection sel = ppsel::select_stable(spath, fit);

    support = sel.support;
    result["support"] = sel.support;
    result["coefficients"] = model_json(sel.model, field.names);
    result["pfer_bound"] = sel.pfer_bound;
    result["q_lambda"] = sel.q_lambda;
    result["max_pi"] = sel.max_pi;
    result["lambda_range"] = {{"max", range.lambda_max},
                              {"min", range.lambda_min},
                              {"q_target", range.q_target},
                              {"q_target_reached", range.q_target_reached},
                              {"empty_at_max", range.empty_at_max}};
    result["empty_subsamples"] = spath.empty_subsamples;
    result["failed_subsamples"] = spath.failed_subsamples;
  } else {
    ppsel::CriterionKind ck;
    if (args.selector == "bic") ck = ppsel::CriterionKind::BIC;
    else if (args.selector == "eric") ck = ppsel::CriterionKind::ERIC;
    else if (args.selector == "cbic") ck = ppsel::CriterionKind::CBIC;
    else if (args.selector == "ceric") ck = ppsel::CriterionKind::CERIC;
    else throw ppsel::ConfigError("select: unknown selector '" + args.selector + "'");

    const ppsel::LogLinearModel pilot = ppsel::fit_unpenalized(fit);
    const ppsel::PathResult path =
        ppsel::solve_path(fit, kind, ppsel::adaptive_weights(pilot), pc);

    ppsel::SecondOrderSpec spec = ppsel::poisson_second_order();
    if (args.second_order == "thomas") {
      spec = ppsel::thomas_second_order(args.kappa, args.sigma);
    } else if (args.second_order == "estimated") {
      const ppsel::TwoStepFit two = ppsel::two_step_fit(pattern, field, window, pilot);
      spec = two.spec;
      result["thomas_estimate"] = {{"kappa", two.params.kappa},
                                   {"sigma", two.params.sigma}};
    } else if (args.second_order != "poisson") {
      throw ppsel::ConfigError(
          "select: --second-order must be poisson, thomas, or estimated");
    }
    result["config"]["second_order"] = args.second_order;

    const ppsel::SelectionResult sel =
        ppsel::select_by_criterion(path, fit, ck, spec);
    support = sel.support;
    result["support"] = sel.support;
    result["coefficients"] = model_json(sel.model, field.names);
    result["criterion"] = {{"name", args.selector},
                           {"lambda", sel.lambda},
                           {"index", sel.index}};
    std::vector<double> values;
    values.reserve(sel.values.size());
    for (const ppsel::CriterionValue& v : sel.values) values.push_back(v.value);
    result["criterion"]["values"] = values;
    result["criterion"]["lambdas"] = path.lambdas;
  }

  std::vector<std::string> selected_names;
  for (int j : support) selected_names.push_back(field.names[j]);
  result["selected_names"] = selected_names;

  write_text(args.out, result.dump(2) + "\n");
  std::cout << "selected " << support.size() << " of " << field.p()
            << " covariates:";
  for (const std::string& name : selected_names) std::cout << ' ' << name;
  std::cout << " -> " << args.out << "\n";
}

// ---------------------------------------------------------------------------
// bench

struct BenchArgs {
  std::string config;
  std::string out_dir;
  int reps_override = 0;
  int threads = -1;
};

void run_bench(const BenchArgs& args) {
  std::vector<ppsel::ExperimentConfig> configs =
      ppsel::load_experiment_configs(args.config);
  if (args.reps_override > 0)
    for (ppsel::ExperimentConfig& c : configs) c.reps = args.reps_override;
  if (args.threads >= 0)
    for (ppsel::ExperimentConfig& c : configs) c.threads = args.threads;

  std::filesystem::create_directories(args.out_dir);
  for (std::size_t i = 0; i < configs.size(); ++i) {
    const ppsel::ExperimentConfig& config = configs[i];
    const ppsel::GridResult grid = ppsel::run_grid(config);

    std::ostringstream base;
    base << args.out_dir << '/' << (i + 1) << '_' << config.scenario << '_'
         << ppsel::penalty_name(config.penalty) << '_'
         << ppsel::selector_name(config.selector);
    ppsel::write_metrics_csv(base.str() + "_metrics.csv", grid);
    ppsel::write_diagnostics_csv(base.str() + "_diagnostics.csv", grid);

    std::cout << config.scenario << ' ' << ppsel::penalty_name(config.penalty)
              << ' ' << ppsel::selector_name(config.selector)
              << " cells=" << grid.cells.size()
              << " reps=" << config.reps
              << " failures=" << grid.diagnostics.size()
              << " f1=" << ppsel::format_real(grid.grand.f1)
              << " pfer=" << ppsel::format_real(grid.grand.empirical_pfer)
              << " -> " << base.str() << "_metrics.csv\n";
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sparse variable selection for spatial point-process intensity"};
  app.require_subcommand(1);

  SimulateArgs sim;
  CLI::App* simulate = app.add_subcommand(
      "simulate", "draw a point pattern from a log-linear intensity model");
  simulate->add_option("--process", sim.process, "point process")
      ->check(CLI::IsMember({"poisson", "thomas"}))
      ->required();
  simulate->add_option("--covariates", sim.covariates,
                       "covariate CSV file(s), or 'synth'");
  simulate->add_option("--target-n", sim.target_n, "expected number of points")
      ->check(CLI::PositiveNumber)
      ->required();
  simulate->add_option("--seed", sim.seed, "master seed");
  simulate->add_option("--out", sim.out, "output pattern CSV")->required();
  simulate->add_option("--covariates-out", sim.covariates_out,
                       "write the covariate field actually used");
  simulate->add_option("--beta", sim.beta,
                       "comma-separated coefficients, zero-padded to p");
  simulate->add_option("--window", sim.window,
                       "observation window x0,y0,x1,y1 (default: field extent)");
  simulate->add_option("--kappa", sim.kappa, "Thomas parent intensity");
  simulate->add_option("--sigma", sim.sigma, "Thomas dispersion");
  simulate->add_option("--p", sim.synth_p, "synthetic covariate count");
  simulate->add_option("--nx", sim.synth_nx, "synthetic grid width");
  simulate->add_option("--ny", sim.synth_ny, "synthetic grid height");
  simulate->add_option("--smoothness", sim.synth_smoothness,
                       "synthetic correlation length");
  simulate->add_option("--synth-window", sim.synth_window,
                       "synthetic field extent x0,y0,x1,y1");
  simulate->add_flag("--no-standardize", sim.no_standardize,
                     "keep covariate files as-is");
  simulate->callback([&sim] { run_simulate(sim); });

  FitArgs fita;
  CLI::App* fit = app.add_subcommand(
      "fit", "penalized composite-likelihood path over a lambda grid");
  fit->add_option("--pattern", fita.pattern, "point pattern CSV")->required();
  fit->add_option("--covariates", fita.covariates, "covariate CSV file(s)")
      ->required();
  fit->add_option("--penalty", fita.penalty, "penalty")
      ->check(CLI::IsMember({"l0", "l1", "L0", "L1"}))
      ->required();
  fit->add_option("--lambda", fita.lambda, "single penalty level");
  fit->add_option("--path", fita.path, "lambda grid min,max,count");
  fit->add_option("--out", fita.out, "output coefficients CSV")->required();
  fit->add_flag("--no-standardize", fita.no_standardize,
                "keep covariate files as-is");
  fit->add_flag("--no-adaptive", fita.no_adaptive,
                "unit penalty weights instead of adaptive");
  fit->add_option("--max-iter", fita.max_iter, "iteration budget per lambda");
  fit->add_option("--tol", fita.tol, "relative-change stopping tolerance");
  fit->callback([&fita] { run_fit(fita); });

  SelectArgs sel;
  CLI::App* select = app.add_subcommand(
      "select", "covariate selection by stability or an information criterion");
  select->add_option("--pattern", sel.pattern, "point pattern CSV")->required();
  select->add_option("--covariates", sel.covariates, "covariate CSV file(s)")
      ->required();
  select->add_option("--penalty", sel.penalty, "penalty")
      ->check(CLI::IsMember({"l0", "l1", "L0", "L1"}))
      ->required();
  select->add_option("--selector", sel.selector, "selection rule")
      ->check(CLI::IsMember({"bic", "eric", "cbic", "ceric", "stability"}))
      ->required();
  select->add_option("--path", sel.path, "lambda grid min,max,count");
  select->add_option("--pfer", sel.pfer, "per-family error-rate budget");
  select->add_option("--k", sel.k, "bootstrap replicates");
  select->add_option("--pthin", sel.p_thin, "thinning retention probability");
  select->add_option("--pith", sel.pi_th, "inclusion-frequency threshold");
  select->add_option("--seed", sel.seed, "master seed");
  select->add_option("--out", sel.out, "output JSON")->required();
  select->add_option("--second-order", sel.second_order,
                     "pair correlation for cbic/ceric: poisson, thomas, estimated");
  select->add_option("--kappa", sel.kappa, "Thomas parent intensity (thomas)");
  select->add_option("--sigma", sel.sigma, "Thomas dispersion (thomas)");
  select->add_flag("--no-standardize", sel.no_standardize,
                   "keep covariate files as-is");
  select->add_option("--threads", sel.threads,
                     "stability replicate workers (0 = all cores)");
  select->callback([&sel] { run_select(sel); });

  BenchArgs ben;
  CLI::App* bench = app.add_subcommand(
      "bench", "run benchmark experiment grids from a config file");
  bench->add_option("--config", ben.config, "experiment config file")->required();
  bench->add_option("--out-dir", ben.out_dir, "output directory")->required();
  bench->add_option("--reps", ben.reps_override,
                    "override repetitions for every experiment");
  bench->add_option("--threads", ben.threads,
                    "override concurrent reps for every experiment (0 = all cores)");
  bench->callback([&ben] { run_bench(ben); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const ppsel::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const ppsel::Error& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
