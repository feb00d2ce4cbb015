#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace gsurvey {

struct NelderMeadOptions {
  // Stop when max_k |f(x_k) - f(x_best)| over the simplex falls below this.
  double f_tolerance = 1e-8;
  // ... and every vertex lies within this distance of the best one in each
  // coordinate. Guards against flat simplices straddling the optimum.
  double x_tolerance = 1e-6;
  std::size_t max_iterations = 500;
  // Offset added to each coordinate of the start point to build the initial
  // simplex.
  double initial_step = 0.25;
};

struct NelderMeadResult {
  std::vector<double> x;
  double value = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
};

// Derivative-free minimisation with the standard reflection / expansion /
// contraction / shrink coefficients (1, 2, 1/2, 1/2). Deterministic: the
// same objective and start point always give the same result.
NelderMeadResult nelder_mead(const std::function<double(std::span<const double>)>& objective,
                             std::vector<double> start, const NelderMeadOptions& options = {});

}  // namespace gsurvey
