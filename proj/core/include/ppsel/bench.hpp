#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ppsel/criteria.hpp"
#include "ppsel/metrics.hpp"
#include "ppsel/secondorder.hpp"
#include "ppsel/stability.hpp"

namespace ppsel {

enum class Selector { BIC, ERIC, CBIC, CERIC, Stability };

Selector parse_selector(const std::string& name);
PenaltyKind parse_penalty(const std::string& name);
std::string selector_name(Selector s);
std::string penalty_name(PenaltyKind kind);

// One benchmark experiment: a scenario crossed with sample sizes and noise
// magnitudes, run for a fixed penalty and selector.
struct ExperimentConfig {
  std::string scenario = "P1";  // P=Poisson, T=Thomas; 1=localization, 2=detection
  std::vector<double> n_grid = {50, 100, 150, 200, 250};
  std::vector<int> c_grid = {0, 1, 2, 3, 4};
  int reps = 20;
  PenaltyKind penalty = PenaltyKind::L0;
  Selector selector = Selector::Stability;
  std::string second_order = "none";  // none | oracle | estimated
  Eigen::VectorXd true_beta;          // empty: scenario default (1,.5) or (2,.75)
  ThomasParams thomas{4e-3, 1.5};
  std::uint64_t seed = 0;
  double lambda_min = 0.0;  // 0: scenario default range
  double lambda_max = 0.0;
  int lambda_count = 35;
  double pfer = 1.0;  // stability-selector knobs
  int k_boot = 50;
  double p_thin = 0.5;
  double pi_th = 0.9;
  int threads = 0;  // concurrent reps; 0 = hardware concurrency. Outputs are
                    // byte-identical for every thread count.
};

void validate_config(const ExperimentConfig& config);

// Scenario-resolved pieces shared by every repetition: the fixed synthetic
// covariate stack, the observation window (4σ-eroded for Thomas), its
// quadrature, the λ grid, and the padded true coefficient vector.
struct BenchContext {
  CovariateField field;
  Window window;
  std::shared_ptr<const QuadratureScheme> quad;
  std::vector<double> lambda_grid;
  Eigen::VectorXd true_beta;
  std::vector<int> truth;  // indices of nonzero true coefficients
  bool thomas = false;
  bool detection = false;
  double dx = 0.0;  // raster spacing, the unit of the noise magnitude
};

BenchContext make_bench_context(const ExperimentConfig& config);

struct RepOutcome {
  SelectionOutcome outcome;
  std::vector<int> support;
  int n_observed = 0;
  bool failed = false;
  std::string error;
};

// One Monte Carlo repetition: simulate at expected count n, corrupt with
// noise level c, fit and select per the config. Failures come back as empty
// selections with the error recorded, never as exceptions.
RepOutcome run_cell(const ExperimentConfig& config, const BenchContext& ctx,
                    double n, int c, std::uint64_t rep);

struct CellMetrics {
  double n = 0.0;
  int c = 0;
  MetricsReport report;
};

struct GridResult {
  ExperimentConfig config;
  std::vector<CellMetrics> cells;  // n-major, then c, matching the grids' order
  MetricsReport grand;             // unweighted mean over cells
  std::vector<std::string> diagnostics;  // one CSV row per failed repetition
};

GridResult run_grid(const ExperimentConfig& config);

// scenario,penalty,selector,n,c,tpr,fpr,ppv,f1,phi_s,pfer,reps; the grand
// mean row writes "all" for n and c.
void write_metrics_csv(const std::string& path, const GridResult& grid);
// scenario,penalty,selector,n,c,rep,error
void write_diagnostics_csv(const std::string& path, const GridResult& grid);

// Flat key = value text with one [section] per experiment; the section header
// names the scenario, optionally with a label after '.' or whitespace
// ("[P1]", "[P1.l1]"). Keys before the first section set shared defaults.
// Unknown keys are errors.
std::vector<ExperimentConfig> parse_experiment_configs(const std::string& text);
std::vector<ExperimentConfig> load_experiment_configs(const std::string& path);

}  // namespace ppsel
