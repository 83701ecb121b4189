#pragma once

#include <stdexcept>
#include <utility>
#include <vector>
#include <string>

namespace ppsel {

// Base class for everything thrown by the library. CLI maps these to exit
// code 3 (numerical failure) unless they derive from ConfigError (exit 2).
class Error : public std::runtime_error {
public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Invalid user input: malformed files, bad option combinations, inconsistent
// grids. Recoverable by fixing the input, never by retrying.
class ConfigError : public Error {
public:
  explicit ConfigError(const std::string& msg) : Error(msg) {}
};

// Data that cannot support the requested computation (empty pattern, empty
// quadrature intersection, zero-variance raster, fewer than 2 points for a
// pair statistic).
class DegenerateDataError : public Error {
public:
  explicit DegenerateDataError(const std::string& msg) : Error(msg) {}
};

// An iterative method walked out of the representable range; carries the
// iteration index at which the objective stopped being finite.
class DivergenceError : public Error {
public:
  DivergenceError(const std::string& msg, int iteration)
      : Error(msg), iteration(iteration) {}
  int iteration;
};

// Iteration budget exhausted before the stopping rule fired. Carries the
// last iterate as (log_omega, beta...) so callers can inspect or resume.
class NonConvergenceError : public Error {
public:
  NonConvergenceError(const std::string& msg, int iterations,
                      std::vector<double> last_iterate = {})
      : Error(msg), iterations(iterations),
        last_iterate(std::move(last_iterate)) {}
  int iterations;
  std::vector<double> last_iterate;
};

}  // namespace ppsel
