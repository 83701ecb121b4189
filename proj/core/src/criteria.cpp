#include "ppsel/criteria.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "ppsel/errors.hpp"
#include "ppsel/simulate.hpp"

namespace ppsel {

SecondOrderSpec poisson_second_order(int coarsen) {
  SecondOrderSpec spec;
  spec.pcf = [](double) { return 1.0; };
  spec.coarsen = coarsen;
  spec.range = 0.0;
  return spec;
}

SecondOrderSpec thomas_second_order(double kappa, double sigma, int coarsen) {
  const ThomasParams params{kappa, sigma};
  (void)thomas_pcf(params, 0.0);  // validate parameters eagerly
  SecondOrderSpec spec;
  spec.pcf = [params](double r) { return thomas_pcf(params, r); };
  spec.coarsen = coarsen;
  // g(r) − 1 falls below 1e-16 of its peak here.
  spec.range = 2.0 * sigma * std::sqrt(std::log(1e16));
  return spec;
}

CoarseNodes coarsen_scheme(const QuadratureScheme& quad, int factor) {
  if (factor < 1) throw ConfigError("coarsen_scheme: factor must be at least 1");
  const int nx = quad.nx(), ny = quad.ny();
  const int bx_n = (nx + factor - 1) / factor;
  const int by_n = (ny + factor - 1) / factor;

  CoarseNodes out;
  out.node.reserve(static_cast<std::size_t>(bx_n) * by_n);
  out.w.resize(static_cast<long>(bx_n) * by_n);
  long c = 0;
  for (int by = 0; by < by_n; ++by) {
    const int ylo = by * factor, yhi = std::min(ny, ylo + factor);
    const int ry = std::min(ylo + factor / 2, yhi - 1);
    for (int bx = 0; bx < bx_n; ++bx) {
      const int xlo = bx * factor, xhi = std::min(nx, xlo + factor);
      const int rx = std::min(xlo + factor / 2, xhi - 1);
      double w = 0.0;
      for (int iy = ylo; iy < yhi; ++iy)
        for (int ix = xlo; ix < xhi; ++ix)
          w += quad.w[static_cast<long>(iy) * nx + ix];
      out.node.push_back(ry * nx + rx);
      out.w[c++] = w;
    }
  }
  return out;
}

namespace {

void validate_support(const FitData& fit, const std::vector<int>& support,
                      const char* who) {
  for (std::size_t i = 0; i < support.size(); ++i) {
    if (support[i] < 0 || support[i] >= fit.p())
      throw ConfigError(std::string(who) + ": support index out of range");
    if (i && support[i] <= support[i - 1])
      throw ConfigError(std::string(who) + ": support must be strictly increasing");
  }
}

Eigen::VectorXd linear_predictor(const FitData& fit, const LogLinearModel& model) {
  Eigen::VectorXd eta = Eigen::VectorXd::Constant(fit.m(), model.log_omega);
  for (int k = 0; k < fit.p(); ++k)
    if (model.beta[k] != 0.0) eta += model.beta[k] * fit.quad->z.col(k);
  return eta;
}

}  // namespace

Eigen::MatrixXd sensitivity(const FitData& fit, const LogLinearModel& model,
                            const std::vector<int>& support) {
  validate_support(fit, support, "sensitivity");
  const long m = fit.m();
  const int k1 = static_cast<int>(support.size()) + 1;

  const Eigen::VectorXd eta = linear_predictor(fit, model);
  const Eigen::VectorXd r =
      fit.p_thin * (fit.quad->w.array() * eta.array().exp());

  Eigen::MatrixXd ztil(m, k1);
  ztil.col(0).setOnes();
  for (int j = 1; j < k1; ++j) ztil.col(j) = fit.quad->z.col(support[j - 1]);

  Eigen::MatrixXd S = ztil.transpose() * r.asDiagonal() * ztil;
  if (!S.allFinite())
    throw DegenerateDataError("sensitivity: non-finite entries");
  return S;
}

Eigen::MatrixXd t2_matrix(const FitData& fit, const LogLinearModel& model,
                          const std::vector<int>& support,
                          const SecondOrderSpec& spec) {
  validate_support(fit, support, "t2_matrix");
  if (!spec.pcf) throw ConfigError("t2_matrix: missing pair correlation function");
  const QuadratureScheme& quad = *fit.quad;
  const int nx = quad.nx(), ny = quad.ny();
  const int k1 = static_cast<int>(support.size()) + 1;

  const CoarseNodes coarse = coarsen_scheme(quad, spec.coarsen);
  const long nc = static_cast<long>(coarse.node.size());

  // Kernel g(‖Δ‖) − 1 tabulated over node-index offsets; entries beyond the
  // cutoff stay zero and their pairs are skipped.
  Eigen::MatrixXd kern = Eigen::MatrixXd::Zero(nx, ny);
  const double r2max = spec.range * spec.range;
  for (int dyi = 0; dyi < ny; ++dyi) {
    const double dy = dyi * quad.dy;
    for (int dxi = 0; dxi < nx; ++dxi) {
      const double dx = dxi * quad.dx;
      const double d2 = dx * dx + dy * dy;
      if (d2 <= r2max) kern(dxi, dyi) = spec.pcf(std::sqrt(d2)) - 1.0;
    }
  }

  const Eigen::VectorXd eta = linear_predictor(fit, model);
  Eigen::MatrixXd zc(nc, k1);
  Eigen::VectorXd a(nc);
  std::vector<int> rx(nc), ry(nc);
  for (long u = 0; u < nc; ++u) {
    const int node = coarse.node[u];
    rx[u] = node % nx;
    ry[u] = node / nx;
    a[u] = coarse.w[u] * fit.p_thin * std::exp(eta[node]);
    zc(u, 0) = 1.0;
    for (int j = 1; j < k1; ++j) zc(u, j) = quad.z(node, support[j - 1]);
  }

  Eigen::MatrixXd t2 = Eigen::MatrixXd::Zero(k1, k1);
  Eigen::VectorXd s(k1);
  for (long u = 0; u < nc; ++u) {
    s.setZero();
    bool any = false;
    for (long v = 0; v < nc; ++v) {
      const double k = kern(std::abs(rx[u] - rx[v]), std::abs(ry[u] - ry[v]));
      if (k == 0.0) continue;
      s.noalias() += (a[v] * k) * zc.row(v).transpose();
      any = true;
    }
    if (any) t2.noalias() += (a[u] * zc.row(u).transpose()) * s.transpose();
  }
  return t2;
}

double effective_df(const Eigen::MatrixXd& S, const Eigen::MatrixXd& T2, int k) {
  if (S.rows() != S.cols() || T2.rows() != T2.cols() || S.rows() != T2.rows())
    throw ConfigError("effective_df: dimension mismatch");
  if (k < 0) throw ConfigError("effective_df: negative parameter count");
  if (!S.allFinite())
    throw DegenerateDataError("effective_df: sensitivity matrix is not finite");

  Eigen::LLT<Eigen::MatrixXd> llt(S);
  if (llt.info() != Eigen::Success)
    throw DegenerateDataError("effective_df: sensitivity matrix is not positive definite");
  return k + llt.solve(T2).trace();
}

CriterionValue criterion_value(CriterionKind kind, const FitData& fit,
                               const LogLinearModel& refit,
                               const std::vector<int>& support, double lambda,
                               const SecondOrderSpec& spec) {
  if (fit.n_points < 1)
    throw DegenerateDataError("criterion_value: empty pattern");
  const bool eric = kind == CriterionKind::ERIC || kind == CriterionKind::CERIC;
  const bool composite = kind == CriterionKind::CBIC || kind == CriterionKind::CERIC;
  if (eric && !(lambda > 0.0))
    throw ConfigError("criterion_value: ERIC needs a positive lambda");

  const int k = static_cast<int>(support.size()) + 1;
  const double n = static_cast<double>(fit.n_points);
  const double mult = eric ? std::log(n / lambda) : std::log(n);

  CriterionValue out;
  out.kind = kind;
  out.lambda = lambda;
  out.flagged_multiplier = !(mult > 0.0);
  out.df = composite ? effective_df(sensitivity(fit, refit, support),
                                    t2_matrix(fit, refit, support, spec), k)
                     : static_cast<double>(k);
  out.value = -2.0 * loglik(fit, refit) + out.df * mult;
  return out;
}

SelectionResult select_by_criterion(const PathResult& path, const FitData& fit,
                                    CriterionKind kind,
                                    const SecondOrderSpec& spec) {
  if (path.lambdas.empty() || path.supports.size() != path.lambdas.size())
    throw ConfigError("select_by_criterion: empty or inconsistent path");

  struct Entry {
    bool ok = false;
    LogLinearModel model;
    double loglik_value = 0.0;
    double df = 0.0;  // plain k or effective df, by criterion kind
  };
  const bool composite = kind == CriterionKind::CBIC || kind == CriterionKind::CERIC;
  std::map<std::vector<int>, Entry> cache;

  SelectionResult out;
  out.values.resize(path.lambdas.size());
  out.evaluated.assign(path.lambdas.size(), false);

  for (std::size_t i = 0; i < path.lambdas.size(); ++i) {
    const std::vector<int>& support = path.supports[i];
    auto it = cache.find(support);
    if (it == cache.end()) {
      Entry e;
      try {
        e.model = fit_unpenalized_on(fit, support);
        e.loglik_value = loglik(fit, e.model);
        const int k = static_cast<int>(support.size()) + 1;
        e.df = composite
                   ? effective_df(sensitivity(fit, e.model, support),
                                  t2_matrix(fit, e.model, support, spec), k)
                   : static_cast<double>(k);
        e.ok = true;
      } catch (const Error&) {
        e.ok = false;
      }
      it = cache.emplace(support, std::move(e)).first;
    }
    const Entry& e = it->second;
    CriterionValue& val = out.values[i];
    val.kind = kind;
    val.lambda = path.lambdas[i];
    if (!e.ok) continue;

    const bool eric = kind == CriterionKind::ERIC || kind == CriterionKind::CERIC;
    if (eric && !(path.lambdas[i] > 0.0))
      throw ConfigError("select_by_criterion: ERIC needs positive lambdas");
    const double n = static_cast<double>(fit.n_points);
    const double mult = eric ? std::log(n / path.lambdas[i]) : std::log(n);
    val.df = e.df;
    val.value = -2.0 * e.loglik_value + e.df * mult;
    val.flagged_multiplier = !(mult > 0.0);
    out.evaluated[i] = true;

    if (out.index < 0 || val.value < out.values[out.index].value) {
      out.index = static_cast<int>(i);
      out.support = support;
      out.model = e.model;
      out.lambda = path.lambdas[i];
    }
  }

  if (out.index < 0)
    throw DegenerateDataError("select_by_criterion: every support failed to refit");
  return out;
}

}  // namespace ppsel
