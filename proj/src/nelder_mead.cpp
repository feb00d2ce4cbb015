#include "gsurvey/nelder_mead.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "gsurvey/error.hpp"

namespace gsurvey {

NelderMeadResult nelder_mead(const std::function<double(std::span<const double>)>& objective,
                             std::vector<double> start, const NelderMeadOptions& options) {
  const std::size_t dim = start.size();
  if (dim == 0) throw ParameterError("Nelder-Mead needs at least one parameter");

  auto eval = [&](const std::vector<double>& x) {
    double f = objective(x);
    return std::isnan(f) ? HUGE_VAL : f;
  };

  std::vector<std::vector<double>> simplex(dim + 1, start);
  for (std::size_t k = 0; k < dim; ++k) simplex[k + 1][k] += options.initial_step;
  std::vector<double> values(dim + 1);
  for (std::size_t k = 0; k <= dim; ++k) values[k] = eval(simplex[k]);

  std::vector<std::size_t> order(dim + 1);
  std::vector<double> centroid(dim);
  auto point_along = [&](double t, const std::vector<double>& worst) {
    std::vector<double> p(dim);
    for (std::size_t d = 0; d < dim; ++d) p[d] = centroid[d] + t * (worst[d] - centroid[d]);
    return p;
  };

  NelderMeadResult result;
  for (;;) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    const std::size_t best = order.front();
    const std::size_t worst = order.back();
    const std::size_t second_worst = order[dim - 1];

    double spread = 0.0;
    for (double v : values) spread = std::max(spread, std::fabs(v - values[best]));
    double size = 0.0;
    for (const auto& vertex : simplex)
      for (std::size_t d = 0; d < dim; ++d)
        size = std::max(size, std::fabs(vertex[d] - simplex[best][d]));
    if (spread < options.f_tolerance && size < options.x_tolerance) {
      result.converged = true;
      break;
    }
    if (result.iterations >= options.max_iterations) break;
    ++result.iterations;

    std::fill(centroid.begin(), centroid.end(), 0.0);
    for (std::size_t k = 0; k <= dim; ++k) {
      if (k == worst) continue;
      for (std::size_t d = 0; d < dim; ++d) centroid[d] += simplex[k][d];
    }
    for (auto& c : centroid) c /= static_cast<double>(dim);

    const auto reflected = point_along(-1.0, simplex[worst]);
    const double f_reflected = eval(reflected);
    if (f_reflected < values[best]) {
      const auto expanded = point_along(-2.0, simplex[worst]);
      const double f_expanded = eval(expanded);
      if (f_expanded < f_reflected) {
        simplex[worst] = expanded;
        values[worst] = f_expanded;
      } else {
        simplex[worst] = reflected;
        values[worst] = f_reflected;
      }
      continue;
    }
    if (f_reflected < values[second_worst]) {
      simplex[worst] = reflected;
      values[worst] = f_reflected;
      continue;
    }

    // Contraction: outside if the reflection improved on the worst point.
    const bool outside = f_reflected < values[worst];
    const auto contracted = point_along(outside ? -0.5 : 0.5, simplex[worst]);
    const double f_contracted = eval(contracted);
    if (f_contracted < (outside ? f_reflected : values[worst])) {
      simplex[worst] = contracted;
      values[worst] = f_contracted;
      continue;
    }

    for (std::size_t k = 0; k <= dim; ++k) {
      if (k == best) continue;
      for (std::size_t d = 0; d < dim; ++d)
        simplex[k][d] = simplex[best][d] + 0.5 * (simplex[k][d] - simplex[best][d]);
      values[k] = eval(simplex[k]);
    }
  }

  const auto best = static_cast<std::size_t>(
      std::min_element(values.begin(), values.end()) - values.begin());
  result.x = simplex[best];
  result.value = values[best];
  return result;
}

}  // namespace gsurvey
