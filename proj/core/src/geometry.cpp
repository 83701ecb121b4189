#include "ppsel/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "ppsel/rng.hpp"

namespace ppsel {

Window erode(const Window& w, double margin) {
  if (margin < 0.0) throw ConfigError("erode: margin must be non-negative");
  Window out{w.x0 + margin, w.y0 + margin, w.x1 - margin, w.y1 - margin};
  if (out.x0 >= out.x1 || out.y0 >= out.y1)
    throw DegenerateDataError("erode: margin leaves an empty window");
  return out;
}

Window dilate(const Window& w, double margin) {
  if (margin < 0.0) throw ConfigError("dilate: margin must be non-negative");
  return {w.x0 - margin, w.y0 - margin, w.x1 + margin, w.y1 + margin};
}

int CovariateField::cell_of(double x, double y) const {
  const Window ext = extent();
  if (!ext.contains(x, y))
    throw DegenerateDataError("covariate lookup outside the raster extent");
  int ix = static_cast<int>(std::floor((x - x0) / dx));
  int iy = static_cast<int>(std::floor((y - y0) / dy));
  ix = std::min(std::max(ix, 0), n_x - 1);
  iy = std::min(std::max(iy, 0), n_y - 1);
  return iy * n_x + ix;
}

Eigen::VectorXd CovariateField::at(double x, double y) const {
  const int cell = cell_of(x, y);
  Eigen::VectorXd out(p());
  for (int k = 0; k < p(); ++k) out[k] = values[k][cell];
  return out;
}

CovariateField standardize(const CovariateField& field) {
  CovariateField out = field;
  for (int k = 0; k < field.p(); ++k) {
    const Eigen::VectorXd& v = field.values[k];
    const double n = static_cast<double>(v.size());
    const double mean = v.mean();
    const double var = (v.array() - mean).square().sum() / n;
    const double sd = std::sqrt(var);
    if (!(sd > 1e-12 * std::max(1.0, std::abs(mean))))
      throw DegenerateDataError("standardize: raster '" + field.names[k] +
                                "' has zero variance");
    out.values[k] = (v.array() - mean) / sd;
  }
  out.standardized = true;
  return out;
}

namespace {

int reflect_index(int i, int n) {
  // Mirror boundary without edge repetition; loops to handle kernels wider
  // than the axis.
  while (i < 0 || i >= n) {
    if (i < 0) i = -i - 1;
    if (i >= n) i = 2 * n - 1 - i;
  }
  return i;
}

// Separable Gaussian filter along one axis of a row-major (y outer) raster.
void blur_axis(Eigen::VectorXd& raster, int n_x, int n_y, double sigma_cells,
               bool along_x) {
  if (sigma_cells < 1e-12) return;
  const int radius = static_cast<int>(std::ceil(4.0 * sigma_cells));
  Eigen::VectorXd kernel(2 * radius + 1);
  for (int t = -radius; t <= radius; ++t)
    kernel[t + radius] = std::exp(-0.5 * t * t / (sigma_cells * sigma_cells));
  kernel /= kernel.sum();

  Eigen::VectorXd out(raster.size());
  const int n_line = along_x ? n_x : n_y;
  const int n_lines = along_x ? n_y : n_x;
  for (int line = 0; line < n_lines; ++line) {
    for (int i = 0; i < n_line; ++i) {
      double acc = 0.0;
      for (int t = -radius; t <= radius; ++t) {
        const int j = reflect_index(i + t, n_line);
        const int idx = along_x ? line * n_x + j : j * n_x + line;
        acc += kernel[t + radius] * raster[idx];
      }
      const int idx = along_x ? line * n_x + i : i * n_x + line;
      out[idx] = acc;
    }
  }
  raster = std::move(out);
}

}  // namespace

CovariateField synth_covariates(std::uint64_t seed, int p, int n_x, int n_y,
                                const Window& extent, double smoothness) {
  if (p < 1) throw ConfigError("synth_covariates: p must be at least 1");
  if (n_x < 1 || n_y < 1)
    throw ConfigError("synth_covariates: grid dimensions must be positive");
  if (!(extent.width() > 0.0) || !(extent.height() > 0.0))
    throw ConfigError("synth_covariates: extent must have positive area");
  if (smoothness < 0.0)
    throw ConfigError("synth_covariates: smoothness must be non-negative");

  CovariateField field;
  field.n_x = n_x;
  field.n_y = n_y;
  field.x0 = extent.x0;
  field.y0 = extent.y0;
  field.dx = extent.width() / n_x;
  field.dy = extent.height() / n_y;

  constexpr std::uint64_t kSynthTag = 0x53594E54ULL;
  for (int k = 0; k < p; ++k) {
    Rng rng = Rng::derive(seed, {kSynthTag, static_cast<std::uint64_t>(k)});
    Eigen::VectorXd raster(static_cast<long>(n_x) * n_y);
    for (long i = 0; i < raster.size(); ++i) raster[i] = rng.normal();
    blur_axis(raster, n_x, n_y, smoothness / field.dx, true);
    blur_axis(raster, n_x, n_y, smoothness / field.dy, false);
    field.values.push_back(std::move(raster));
    char name[16];
    std::snprintf(name, sizeof(name), "cov%02d", k + 1);
    field.names.emplace_back(name);
  }
  return standardize(field);
}

int QuadratureScheme::node_of(double x, double y) const {
  if (!window.contains(x, y))
    throw DegenerateDataError("node_of: location outside the window");
  int ix = static_cast<int>(std::floor((x - x0) / dx));
  int iy = static_cast<int>(std::floor((y - y0) / dy));
  ix = std::min(std::max(ix, ix_min), ix_max);
  iy = std::min(std::max(iy, iy_min), iy_max);
  return (iy - iy_min) * nx() + (ix - ix_min);
}

namespace {

// Included cell-center index range along one axis, i.e. centers inside
// [w0, w1]. Returns false when empty.
bool axis_range(double origin, double step, int n, double w0, double w1,
                int& lo, int& hi) {
  lo = static_cast<int>(std::ceil((w0 - origin) / step - 0.5));
  hi = static_cast<int>(std::floor((w1 - origin) / step - 0.5));
  lo = std::max(lo, 0);
  hi = std::min(hi, n - 1);
  // Guard rounding at exact boundaries.
  while (lo <= hi && origin + (lo + 0.5) * step < w0) ++lo;
  while (hi >= lo && origin + (hi + 0.5) * step > w1) --hi;
  return lo <= hi;
}

// Weight of each included node: distance between the window-clipped edges,
// with the first and last node absorbing the boundary slivers. Sums to
// w1 - w0 exactly.
Eigen::VectorXd axis_weights(double origin, double step, int lo, int hi,
                             double w0, double w1) {
  Eigen::VectorXd out(hi - lo + 1);
  for (int i = lo; i <= hi; ++i) {
    const double left = (i == lo) ? w0 : origin + i * step;
    const double right = (i == hi) ? w1 : origin + (i + 1) * step;
    out[i - lo] = right - left;
  }
  return out;
}

}  // namespace

QuadratureScheme make_quadrature(const CovariateField& field, const Window& window) {
  const Window ext = field.extent();
  const double tol = 1e-9 * std::max(1.0, std::max(ext.width(), ext.height()));
  if (window.x0 < ext.x0 - tol || window.x1 > ext.x1 + tol ||
      window.y0 < ext.y0 - tol || window.y1 > ext.y1 + tol)
    throw ConfigError("make_quadrature: the raster grid does not cover the window");
  if (!(window.width() > 0.0) || !(window.height() > 0.0))
    throw DegenerateDataError("make_quadrature: window has empty interior");

  QuadratureScheme q;
  q.window = window;
  q.x0 = field.x0;
  q.y0 = field.y0;
  q.dx = field.dx;
  q.dy = field.dy;
  q.names = field.names;

  if (!axis_range(field.x0, field.dx, field.n_x, window.x0, window.x1, q.ix_min, q.ix_max) ||
      !axis_range(field.y0, field.dy, field.n_y, window.y0, window.y1, q.iy_min, q.iy_max))
    throw DegenerateDataError("make_quadrature: no cell center inside the window");

  const Eigen::VectorXd wx =
      axis_weights(field.x0, field.dx, q.ix_min, q.ix_max, window.x0, window.x1);
  const Eigen::VectorXd wy =
      axis_weights(field.y0, field.dy, q.iy_min, q.iy_max, window.y0, window.y1);

  const int nx = q.nx(), ny = q.ny();
  const long m = static_cast<long>(nx) * ny;
  q.node_x.resize(m);
  q.node_y.resize(m);
  q.w.resize(m);
  q.z.resize(m, field.p());
  for (int jy = 0; jy < ny; ++jy) {
    const int iy = q.iy_min + jy;
    for (int jx = 0; jx < nx; ++jx) {
      const int ix = q.ix_min + jx;
      const long node = static_cast<long>(jy) * nx + jx;
      q.node_x[node] = field.center_x(ix);
      q.node_y[node] = field.center_y(iy);
      q.w[node] = wx[jx] * wy[jy];
      const long cell = static_cast<long>(iy) * field.n_x + ix;
      for (int k = 0; k < field.p(); ++k) q.z(node, k) = field.values[k][cell];
    }
  }
  return q;
}

std::string format_real(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  for (auto& s : out) {
    const auto b = s.find_first_not_of(" \t");
    const auto e = s.find_last_not_of(" \t");
    s = (b == std::string::npos) ? std::string() : s.substr(b, e - b + 1);
  }
  return out;
}

double parse_real(const std::string& s, const std::string& context) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("invalid number '" + s + "' in " + context);
  }
}

}  // namespace

void write_pattern_csv(const std::string& path, const PointPattern& pattern) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open '" + path + "' for writing");
  out << "x,y\n";
  for (int i = 0; i < pattern.size(); ++i)
    out << format_real(pattern.x[i]) << ',' << format_real(pattern.y[i]) << '\n';
  if (!out) throw ConfigError("failed writing '" + path + "'");
}

PointPattern read_pattern_csv(const std::string& path, const Window& window) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open pattern file '" + path + "'");
  std::string line;
  if (!std::getline(in, line))
    throw ConfigError("pattern file '" + path + "' is empty");
  const auto header = split_csv_line(line);
  if (header.size() != 2 || header[0] != "x" || header[1] != "y")
    throw ConfigError("pattern file '" + path + "' must start with header x,y");

  PointPattern pattern;
  pattern.window = window;
  long lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != 2)
      throw ConfigError("pattern file '" + path + "' line " +
                        std::to_string(lineno) + ": expected 2 columns");
    const std::string ctx = path + " line " + std::to_string(lineno);
    pattern.add(parse_real(cells[0], ctx), parse_real(cells[1], ctx));
  }
  return pattern;
}

void write_covariates_csv(const std::string& path, const CovariateField& field) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open '" + path + "' for writing");
  out << "x,y";
  for (const auto& name : field.names) out << ',' << name;
  out << '\n';
  for (int iy = 0; iy < field.n_y; ++iy) {
    for (int ix = 0; ix < field.n_x; ++ix) {
      out << format_real(field.center_x(ix)) << ',' << format_real(field.center_y(iy));
      const long cell = static_cast<long>(iy) * field.n_x + ix;
      for (int k = 0; k < field.p(); ++k) out << ',' << format_real(field.values[k][cell]);
      out << '\n';
    }
  }
  if (!out) throw ConfigError("failed writing '" + path + "'");
}

CovariateField read_covariates_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open covariate file '" + path + "'");
  std::string line;
  if (!std::getline(in, line))
    throw ConfigError("covariate file '" + path + "' is empty");
  const auto header = split_csv_line(line);
  if (header.size() < 3 || header[0] != "x" || header[1] != "y")
    throw ConfigError("covariate file '" + path +
                      "' must start with header x,y,<name>[,...]");
  const int p = static_cast<int>(header.size()) - 2;

  std::vector<double> xs, ys;
  std::vector<std::vector<double>> rows;
  long lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (static_cast<int>(cells.size()) != p + 2)
      throw ConfigError("covariate file '" + path + "' line " +
                        std::to_string(lineno) + ": expected " +
                        std::to_string(p + 2) + " columns");
    const std::string ctx = path + " line " + std::to_string(lineno);
    std::vector<double> row(p + 2);
    for (int k = 0; k < p + 2; ++k) row[k] = parse_real(cells[k], ctx);
    xs.push_back(row[0]);
    ys.push_back(row[1]);
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ConfigError("covariate file '" + path + "' has no rows");

  auto unique_sorted = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    return v;
  };
  const std::vector<double> ux = unique_sorted(xs);
  const std::vector<double> uy = unique_sorted(ys);
  if (ux.size() < 2 || uy.size() < 2)
    throw ConfigError("covariate file '" + path + "' needs at least a 2x2 grid");

  const int n_x = static_cast<int>(ux.size());
  const int n_y = static_cast<int>(uy.size());
  const double dx = (ux.back() - ux.front()) / (n_x - 1);
  const double dy = (uy.back() - uy.front()) / (n_y - 1);
  for (int i = 1; i < n_x; ++i)
    if (std::abs(ux[i] - ux[i - 1] - dx) > 1e-6 * dx)
      throw ConfigError("covariate file '" + path + "': x centers are not equispaced");
  for (int i = 1; i < n_y; ++i)
    if (std::abs(uy[i] - uy[i - 1] - dy) > 1e-6 * dy)
      throw ConfigError("covariate file '" + path + "': y centers are not equispaced");
  if (rows.size() != static_cast<std::size_t>(n_x) * n_y)
    throw ConfigError("covariate file '" + path + "' does not cover a complete grid");

  CovariateField field;
  field.n_x = n_x;
  field.n_y = n_y;
  field.dx = dx;
  field.dy = dy;
  field.x0 = ux.front() - dx / 2;
  field.y0 = uy.front() - dy / 2;
  field.names.assign(header.begin() + 2, header.end());
  field.values.assign(p, Eigen::VectorXd::Constant(static_cast<long>(n_x) * n_y,
                                                   std::numeric_limits<double>::quiet_NaN()));

  auto axis_index = [](const std::vector<double>& u, double v) {
    const auto it = std::lower_bound(u.begin(), u.end(), v);
    return static_cast<int>(it - u.begin());
  };
  for (const auto& row : rows) {
    const int ix = axis_index(ux, row[0]);
    const int iy = axis_index(uy, row[1]);
    const long cell = static_cast<long>(iy) * n_x + ix;
    if (!std::isnan(field.values[0][cell]))
      throw ConfigError("covariate file '" + path + "' has duplicate cells");
    for (int k = 0; k < p; ++k) field.values[k][cell] = row[k + 2];
  }
  return field;
}

}  // namespace ppsel
