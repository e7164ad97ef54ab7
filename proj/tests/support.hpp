#pragma once

#include <cmath>
#include <vector>

#include "penqvi/problem.hpp"

namespace testing_support {

using namespace penqvi;

inline ProblemSpec line_problem(int nodes, double T, int steps, double p, double alpha, double f, double g,
                                double extent = 1.0) {
  return ProblemSpec{Grid::line(extent, nodes),
                     TimeGrid(T, steps),
                     OperatorKind::Gradient1D,
                     MaterialLaw::power_law(p, alpha),
                     ConstraintOperator::constant(g),
                     [f](const Point&, double) { return f; },
                     Field(static_cast<std::size_t>(nodes))};
}

inline std::vector<ConstraintField> constant_bounds(const ProblemSpec& spec, double g) {
  const auto op = spec.make_operator();
  return std::vector<ConstraintField>(static_cast<std::size_t>(spec.time.steps()) + 1,
                                      ConstraintField{std::vector<double>(op.points(), g), g, g, 0});
}

/// Thomas algorithm for (1/dt) w - c w'' = rhs on the interior of a uniform
/// 1D grid with zero boundary values; w'' by the 3-point stencil.
inline Field implicit_heat_step(const Grid& grid, double c, double dt, const std::vector<double>& rhs) {
  const std::size_t n = grid.size();
  const double h2 = grid.spacing(0) * grid.spacing(0);
  const std::size_t m = n - 2;
  std::vector<double> a(m, -c / h2), b(m, 1.0 / dt + 2.0 * c / h2), cc(m, -c / h2), d(m);
  for (std::size_t i = 0; i < m; ++i) d[i] = rhs[i + 1];
  for (std::size_t i = 1; i < m; ++i) {
    const double w = a[i] / b[i - 1];
    b[i] -= w * cc[i - 1];
    d[i] -= w * d[i - 1];
  }
  Field out(n);
  out[m] = d[m - 1] / b[m - 1];
  for (std::size_t i = m - 1; i-- > 0;) out[i + 1] = (d[i] - cc[i] * out[i + 2]) / b[i];
  return out;
}

inline double max_abs(const Field& a, const Field& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace testing_support
