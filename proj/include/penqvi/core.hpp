#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace penqvi {

//! Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

//! Sizes or layouts of two operands do not match.
class DimensionError : public Error {
public:
  using Error::Error;
};

//! A numeric parameter lies outside its admissible range.
class ParameterError : public Error {
public:
  using Error::Error;
};

//! A constraint function produced a value outside [g_lower, g_upper].
class ConstraintBoundsError : public Error {
public:
  using Error::Error;
};

//! The problem data do not have the structure an algorithm requires.
class UnsupportedStructure : public Error {
public:
  using Error::Error;
};

//! Spatial point; the second coordinate is zero on 1D grids.
using Point = std::array<double, 2>;

//! Scalar data evaluable at (x, t), e.g. a source or a bound.
using SpaceTimeFunction = std::function<double(const Point&, double)>;

//! Uniform tensor grid on (0, extent_1) x ... with nodes on the boundary.
class Grid {
public:
  static Grid line(double extent, int nodes) { return Grid(1, {extent, 1.0}, {nodes, 1}); }
  static Grid rectangle(double extent_x, double extent_y, int nodes_x, int nodes_y) {
    return Grid(2, {extent_x, extent_y}, {nodes_x, nodes_y});
  }

  int dim() const { return dim_; }
  int nodes(int axis) const { return nodes_[axis]; }
  double extent(int axis) const { return extent_[axis]; }
  double spacing(int axis) const { return spacing_[axis]; }

  std::size_t size() const {
    return static_cast<std::size_t>(nodes_[0]) * static_cast<std::size_t>(nodes_[1]);
  }

  //! Quadrature weight h^d attached to every node and every evaluation point.
  double cell_volume() const { return dim_ == 1 ? spacing_[0] : spacing_[0] * spacing_[1]; }

  //! Lebesgue measure of the domain.
  double measure() const { return dim_ == 1 ? extent_[0] : extent_[0] * extent_[1]; }

  std::size_t index(int i, int j = 0) const {
    return static_cast<std::size_t>(j) * static_cast<std::size_t>(nodes_[0]) +
           static_cast<std::size_t>(i);
  }

  std::array<int, 2> multi_index(std::size_t idx) const {
    return {static_cast<int>(idx % static_cast<std::size_t>(nodes_[0])),
            static_cast<int>(idx / static_cast<std::size_t>(nodes_[0]))};
  }

  bool is_boundary(std::size_t idx) const {
    const auto [i, j] = multi_index(idx);
    if (i == 0 || i == nodes_[0] - 1) return true;
    return dim_ == 2 && (j == 0 || j == nodes_[1] - 1);
  }

  std::array<double, 2> coord(std::size_t idx) const {
    const auto [i, j] = multi_index(idx);
    return {i * spacing_[0], dim_ == 2 ? j * spacing_[1] : 0.0};
  }

  std::size_t interior_count() const {
    return dim_ == 1 ? static_cast<std::size_t>(nodes_[0] - 2)
                     : static_cast<std::size_t>(nodes_[0] - 2) * static_cast<std::size_t>(nodes_[1] - 2);
  }

  bool operator==(const Grid& other) const {
    return dim_ == other.dim_ && nodes_ == other.nodes_ && extent_ == other.extent_;
  }

private:
  Grid(int dim, std::array<double, 2> extent, std::array<int, 2> nodes)
      : dim_(dim), extent_(extent), nodes_(nodes) {
    for (int a = 0; a < dim_; ++a) {
      if (!(extent_[a] > 0.0) || !std::isfinite(extent_[a]))
        throw ParameterError("grid extent must be positive and finite");
      if (nodes_[a] < 3) throw ParameterError("grid needs at least 3 nodes per axis");
      spacing_[a] = extent_[a] / (nodes_[a] - 1);
    }
  }

  int dim_;
  std::array<double, 2> extent_;
  std::array<int, 2> nodes_;
  std::array<double, 2> spacing_{1.0, 1.0};
};

//! Uniform partition of [0, T]; node k sits at k * dt.
class TimeGrid {
public:
  TimeGrid(double final_time, int steps) : final_time_(final_time), steps_(steps) {
    if (!(final_time > 0.0) || !std::isfinite(final_time))
      throw ParameterError("final time must be positive");
    if (steps < 0) throw ParameterError("time.steps must be nonnegative");
  }

  double final_time() const { return final_time_; }
  int steps() const { return steps_; }
  //! Zero for the degenerate grid holding only t = 0.
  double dt() const { return steps_ > 0 ? final_time_ / steps_ : 0.0; }
  double time(int k) const { return k == steps_ && steps_ > 0 ? final_time_ : k * dt(); }

private:
  double final_time_;
  int steps_;
};

//! Nodal scalar field.
struct Field {
  std::vector<double> values;

  Field() = default;
  explicit Field(std::size_t n, double fill = 0.0) : values(n, fill) {}
  explicit Field(std::vector<double> v) : values(std::move(v)) {}

  std::size_t size() const { return values.size(); }
  double& operator[](std::size_t i) { return values[i]; }
  double operator[](std::size_t i) const { return values[i]; }

  bool all_finite() const {
    for (double v : values)
      if (!std::isfinite(v)) return false;
    return true;
  }

  bool operator==(const Field&) const = default;
};

//! Values of L u at the evaluation points: `components` reals per point.
struct EdgeField {
  int components = 1;
  std::vector<double> values;

  EdgeField() = default;
  EdgeField(std::size_t points, int comps) : components(comps), values(points * comps, 0.0) {}

  std::size_t points() const { return values.size() / static_cast<std::size_t>(components); }

  std::span<double> at(std::size_t j) { return {values.data() + j * components, static_cast<std::size_t>(components)}; }
  std::span<const double> at(std::size_t j) const {
    return {values.data() + j * components, static_cast<std::size_t>(components)};
  }

  double magnitude(std::size_t j) const {
    double s = 0.0;
    for (double c : at(j)) s += c * c;
    return std::sqrt(s);
  }
};

//! Pointwise bound on |L u| at one time node.
struct ConstraintField {
  std::vector<double> values;
  double lower = 0.0;
  double upper = 0.0;
  //! Number of entries the composition rule produced outside the bounds.
  int clamped = 0;

  std::size_t size() const { return values.size(); }
  double operator[](std::size_t j) const { return values[j]; }
};

struct SolveDiagnostics {
  int newton_iterations = 0;
  double residual = 0.0;
  //! Integral over the domain of k_eps(gap) at the accepted iterate.
  double penalty_mass = 0.0;
  //! Integral over the domain of (|Lu| - G)^+.
  double violation = 0.0;
  int halvings = 0;
};

struct Trajectory {
  std::vector<Field> fields;
  std::vector<SolveDiagnostics> diagnostics;

  explicit Trajectory(Field initial) { fields.push_back(std::move(initial)); }
  Trajectory() = default;

  int steps() const { return static_cast<int>(fields.size()) - 1; }
  const Field& initial() const { return fields.front(); }
  const Field& final() const { return fields.back(); }
};

namespace detail {

inline void require_size(std::size_t got, std::size_t expected, const char* what) {
  if (got != expected)
    throw DimensionError(std::string(what) + ": size " + std::to_string(got) + " does not match " +
                         std::to_string(expected));
}

}  // namespace detail

//! (h^d sum_i v_i^2)^(1/2)
inline double norm_l2(const Field& field, const Grid& grid) {
  detail::require_size(field.size(), grid.size(), "norm_l2");
  double s = 0.0;
  for (double v : field.values) s += v * v;
  return std::sqrt(grid.cell_volume() * s);
}

//! L2 distance of two fields on the same grid.
inline double distance_l2(const Field& a, const Field& b, const Grid& grid) {
  detail::require_size(a.size(), grid.size(), "distance_l2");
  detail::require_size(b.size(), grid.size(), "distance_l2");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(grid.cell_volume() * s);
}

inline double max_abs_difference(const Field& a, const Field& b) {
  detail::require_size(a.size(), b.size(), "max_abs_difference");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

/// Space-time L^p norm of a sequence of edge fields, each slice carrying the
/// weight dt * h^d. Callers pass the slices t_1..t_N of a backward-Euler run.
inline double norm_lp_spacetime(std::span<const EdgeField> slices, double p, double dt, const Grid& grid) {
  if (!(p > 1.0) || !std::isfinite(p)) throw ParameterError("norm_lp_spacetime: p must lie in (1, inf)");
  double s = 0.0;
  for (const auto& slice : slices)
    for (std::size_t j = 0; j < slice.points(); ++j) s += std::pow(slice.magnitude(j), p);
  return std::pow(dt * grid.cell_volume() * s, 1.0 / p);
}

//! h^d sum_j max(|xi_j| - g_j, 0)
inline double violation_positive_part(const EdgeField& lu, const ConstraintField& g, const Grid& grid) {
  detail::require_size(g.size(), lu.points(), "violation_positive_part");
  double s = 0.0;
  for (std::size_t j = 0; j < lu.points(); ++j) s += std::max(lu.magnitude(j) - g[j], 0.0);
  return grid.cell_volume() * s;
}

}  // namespace penqvi
