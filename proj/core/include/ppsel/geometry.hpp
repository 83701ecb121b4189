#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "ppsel/errors.hpp"

namespace ppsel {

// Axis-aligned rectangular observation window [x0,x1] x [y0,y1].
struct Window {
  double x0 = 0.0, y0 = 0.0, x1 = 0.0, y1 = 0.0;

  double width() const { return x1 - x0; }
  double height() const { return y1 - y0; }
  double area() const { return width() * height(); }
  bool contains(double x, double y) const {
    return x >= x0 && x <= x1 && y >= y0 && y <= y1;
  }
};

// Shrink the window by `margin` on every side. Throws DegenerateDataError if
// nothing remains.
Window erode(const Window& w, double margin);

// Grow the window by `margin` on every side (used for cluster parents whose
// offspring can fall back inside).
Window dilate(const Window& w, double margin);

// A stack of p rasters on a shared regular grid. Values live at cell centers
// (x0 + (i+0.5)dx, y0 + (j+0.5)dy); storage is row-major by y then x, so the
// flat index of cell (ix, iy) is iy*n_x + ix.
struct CovariateField {
  int n_x = 0, n_y = 0;
  double x0 = 0.0, y0 = 0.0;
  double dx = 0.0, dy = 0.0;
  std::vector<std::string> names;
  std::vector<Eigen::VectorXd> values;
  bool standardized = false;

  int p() const { return static_cast<int>(values.size()); }
  double center_x(int ix) const { return x0 + (ix + 0.5) * dx; }
  double center_y(int iy) const { return y0 + (iy + 0.5) * dy; }
  Window extent() const { return {x0, y0, x0 + n_x * dx, y0 + n_y * dy}; }

  // Containing cell of a location inside the extent (right/top edges fold
  // into the last cell). Throws DegenerateDataError outside the extent.
  int cell_of(double x, double y) const;

  // Covariate vector by nearest cell center, i.e. the containing cell.
  Eigen::VectorXd at(double x, double y) const;
};

// Center and scale every raster to mean 0, standard deviation 1 (divisor n).
// Throws DegenerateDataError on a constant raster.
CovariateField standardize(const CovariateField& field);

// Smooth synthetic rasters: white noise low-pass filtered with an isotropic
// Gaussian kernel of scale `smoothness` (in window length units), then
// standardized. Deterministic in `seed`.
CovariateField synth_covariates(std::uint64_t seed, int p, int n_x, int n_y,
                                const Window& extent, double smoothness);

// Planar point pattern with its observation window.
struct PointPattern {
  std::vector<double> x, y;
  Window window;

  int size() const { return static_cast<int>(x.size()); }
  void add(double px, double py) {
    x.push_back(px);
    y.push_back(py);
  }
};

// Midpoint quadrature of the window on the covariate grid. One node per grid
// cell whose center lies in the window; interior nodes carry the full cell
// area and boundary nodes absorb the window slivers of their clipped
// neighbours, so the weights sum to the window area exactly.
struct QuadratureScheme {
  Window window;
  double x0 = 0.0, y0 = 0.0, dx = 0.0, dy = 0.0;
  int ix_min = 0, ix_max = -1, iy_min = 0, iy_max = -1;
  Eigen::VectorXd node_x, node_y;
  Eigen::VectorXd w;
  Eigen::MatrixXd z;  // node_count x p covariate values
  std::vector<std::string> names;

  int node_count() const { return static_cast<int>(w.size()); }
  int nx() const { return ix_max - ix_min + 1; }
  int ny() const { return iy_max - iy_min + 1; }

  // Node owning a location in the window: per-axis nearest included cell
  // center, which partitions the window exactly. Throws DegenerateDataError
  // for locations outside the window.
  int node_of(double x, double y) const;
};

// Build the quadrature for `window` from the field's grid. Requires the grid
// to cover the window; throws DegenerateDataError when no cell center falls
// inside.
QuadratureScheme make_quadrature(const CovariateField& field, const Window& window);

// CSV input/output. Patterns use columns x,y; covariates use the wide layout
// x,y,name1,...,namep ordered row-major by y then x. Reals are written with
// 12 significant digits.

void write_pattern_csv(const std::string& path, const PointPattern& pattern);
PointPattern read_pattern_csv(const std::string& path, const Window& window);

void write_covariates_csv(const std::string& path, const CovariateField& field);
CovariateField read_covariates_csv(const std::string& path);

// Shared formatting helper so every writer emits identical text for the same
// value (12 significant digits, NaN normalized to "nan").
std::string format_real(double v);

}  // namespace ppsel
