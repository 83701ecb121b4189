#pragma once

#include "ppsel/geometry.hpp"
#include "ppsel/rng.hpp"

namespace ppsel {

// Law of the hardcore rejection radius r_i. HalfNormal draws |N(0, delta^2)|
// from a single normal; Norm2d uses the length of a bivariate N(0, delta^2 I)
// draw instead.
enum class RadiusLaw { HalfNormal, Norm2d };

// Perturbation intensity is stated as a multiple c of the raster spacing dx,
// so delta = c * dx is the displacement (or radius) scale.
struct NoiseSpec {
  double c = 0.0;
  double dx = 0.0;
  RadiusLaw radius_law = RadiusLaw::HalfNormal;

  double delta() const { return c * dx; }
};

// Independent Gaussian displacement N(0, delta^2 I) per point; points pushed
// outside the window are dropped. c = 0 returns the pattern unchanged.
PointPattern displace(const PointPattern& pattern, const NoiseSpec& spec, Rng& rng);

// Sequential hardcore thinning: points are visited in a random order, each
// draws a radius r_i, and is retained only when no previously retained point
// lies closer than r_i. Output keeps the original point order.
PointPattern hardcore_thin(const PointPattern& pattern, const NoiseSpec& spec, Rng& rng);

// Independent thinning: each point is retained with probability retain.
PointPattern p_thin(const PointPattern& pattern, double retain, Rng& rng);

}  // namespace ppsel
