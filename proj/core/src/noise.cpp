#include "ppsel/noise.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace ppsel {

namespace {

void check_spec(const NoiseSpec& spec) {
  if (spec.c < 0.0 || spec.dx < 0.0)
    throw ConfigError("noise: c and dx must be non-negative");
}

}  // namespace

PointPattern displace(const PointPattern& pattern, const NoiseSpec& spec, Rng& rng) {
  check_spec(spec);
  const double delta = spec.delta();
  if (delta == 0.0) return pattern;

  PointPattern out;
  out.window = pattern.window;
  for (int i = 0; i < pattern.size(); ++i) {
    const double x = pattern.x[i] + rng.normal(0.0, delta);
    const double y = pattern.y[i] + rng.normal(0.0, delta);
    if (pattern.window.contains(x, y)) out.add(x, y);
  }
  return out;
}

PointPattern hardcore_thin(const PointPattern& pattern, const NoiseSpec& spec, Rng& rng) {
  check_spec(spec);
  const double delta = spec.delta();
  const int n = pattern.size();

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  for (int i = n - 1; i > 0; --i) {
    std::uniform_int_distribution<int> pick(0, i);
    std::swap(order[i], order[pick(rng)]);
  }

  std::vector<char> retained(n, 0);
  std::vector<int> kept;
  kept.reserve(n);
  for (int idx : order) {
    double r = 0.0;
    if (delta > 0.0) {
      if (spec.radius_law == RadiusLaw::HalfNormal) {
        r = std::abs(rng.normal(0.0, delta));
      } else {
        r = delta * std::hypot(rng.normal(), rng.normal());
      }
    }
    bool blocked = false;
    for (int q : kept) {
      const double d = std::hypot(pattern.x[idx] - pattern.x[q],
                                  pattern.y[idx] - pattern.y[q]);
      if (d < r) {
        blocked = true;
        break;
      }
    }
    if (!blocked) {
      retained[idx] = 1;
      kept.push_back(idx);
    }
  }

  PointPattern out;
  out.window = pattern.window;
  for (int i = 0; i < n; ++i)
    if (retained[i]) out.add(pattern.x[i], pattern.y[i]);
  return out;
}

PointPattern p_thin(const PointPattern& pattern, double retain, Rng& rng) {
  if (!(retain >= 0.0 && retain <= 1.0))
    throw ConfigError("p_thin: retention probability must be in [0, 1]");
  PointPattern out;
  out.window = pattern.window;
  for (int i = 0; i < pattern.size(); ++i)
    if (rng.bernoulli(retain)) out.add(pattern.x[i], pattern.y[i]);
  return out;
}

}  // namespace ppsel
