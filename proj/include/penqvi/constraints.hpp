#pragma once

#include <Eigen/SparseLU>

#include <algorithm>
#include <functional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "core.hpp"
#include "operators.hpp"

namespace penqvi {

//! G[v](x,t) = g(x,t), independent of v.
struct GivenConstraint {
  SpaceTimeFunction g;
};

//! G[v](x,t) = g(x, t, zeta), zeta(x,t) = int_0^t v(x,s) K(t,s) ds.
struct MemoryKernelConstraint {
  std::function<double(double t, double s)> kernel;
  std::function<double(const Point&, double t, double zeta)> compose;
};

/// G[v] = g(zeta) with zeta solving the heat equation
///   d_t zeta - kappa Lap zeta = phi_0 + psi v + eta |Lv|,  zeta = 0 on the boundary.
struct CoupledHeatConstraint {
  double diffusivity = 1.0;
  double psi = 0.0;
  double eta = 0.0;
  SpaceTimeFunction source = [](const Point&, double) { return 0.0; };
  std::function<double(double zeta)> compose;
  //! Initial temperature; empty means zero.
  std::vector<double> initial;
};

class ConstraintOperator {
public:
  using Kind = std::variant<GivenConstraint, MemoryKernelConstraint, CoupledHeatConstraint>;

  ConstraintOperator(Kind kind, double lower, double upper) : kind_(std::move(kind)), lower_(lower), upper_(upper) {
    if (!(lower_ > 0.0)) throw ParameterError("constraint lower bound g_* must be positive");
    if (!(upper_ >= lower_)) throw ParameterError("constraint upper bound g^* must be >= g_*");
  }

  static ConstraintOperator constant(double g) {
    return {GivenConstraint{[g](const Point&, double) { return g; }}, g, g};
  }

  const Kind& kind() const { return kind_; }
  double lower() const { return lower_; }
  double upper() const { return upper_; }

  bool is_given() const { return std::holds_alternative<GivenConstraint>(kind_); }
  const GivenConstraint* given() const { return std::get_if<GivenConstraint>(&kind_); }
  const MemoryKernelConstraint* memory() const { return std::get_if<MemoryKernelConstraint>(&kind_); }
  const CoupledHeatConstraint* heat() const { return std::get_if<CoupledHeatConstraint>(&kind_); }

private:
  Kind kind_;
  double lower_;
  double upper_;
};

namespace detail {

inline ConstraintField clamp_into(std::vector<double> values, double lower, double upper) {
  ConstraintField out{std::move(values), lower, upper, 0};
  for (double& v : out.values) {
    if (v < lower || v > upper) ++out.clamped;
    v = std::clamp(v, lower, upper);
  }
  return out;
}

}  // namespace detail

//! Samples g at the evaluation points of `op`; values outside [lower, upper] are an error.
inline ConstraintField eval_given(const SpaceTimeFunction& g, const LinearOperatorL& op, double t, double lower,
                                  double upper) {
  ConstraintField out{std::vector<double>(op.points()), lower, upper, 0};
  const auto& pts = op.point_coords();
  for (std::size_t j = 0; j < pts.size(); ++j) {
    const double v = g(pts[j], t);
    if (!(v >= lower && v <= upper))
      throw ConstraintBoundsError("given constraint value " + std::to_string(v) + " at t=" + std::to_string(t) +
                                  " leaves [" + std::to_string(lower) + ", " + std::to_string(upper) + "]");
    out.values[j] = v;
  }
  return out;
}

/// zeta(x, t_k) by the trapezoid rule over history[0..k], then
/// clamp(g(x, t_k, zeta)) at the evaluation points. `history` must hold
/// exactly the fields at t_0, ..., t_k.
inline ConstraintField eval_memory_kernel(const MemoryKernelConstraint& mk, const LinearOperatorL& op,
                                          std::span<const Field> history, double dt, double lower, double upper) {
  if (history.empty()) throw DimensionError("memory kernel needs at least the field at t = 0");
  const std::size_t k = history.size() - 1;
  const double tk = static_cast<double>(k) * dt;
  Field zeta(op.grid().size());
  for (std::size_t m = 0; m <= k; ++m) {
    const double w = (m == 0 || m == k ? 0.5 : 1.0) * dt * mk.kernel(tk, static_cast<double>(m) * dt);
    if (k == 0 || w == 0.0) continue;
    detail::require_size(history[m].size(), zeta.size(), "eval_memory_kernel");
    for (std::size_t i = 0; i < zeta.size(); ++i) zeta[i] += w * history[m][i];
  }
  const auto zeta_pts = op.interpolate(zeta);
  const auto& pts = op.point_coords();
  std::vector<double> g(op.points());
  for (std::size_t j = 0; j < g.size(); ++j) g[j] = mk.compose(pts[j], tk, zeta_pts[j]);
  return detail::clamp_into(std::move(g), lower, upper);
}

//! Five-point (3-point in 1D) Laplacian restricted to interior nodes.
inline SparseMatrix interior_laplacian(const Grid& grid) {
  std::vector<std::size_t> slot(grid.size(), static_cast<std::size_t>(-1));
  std::size_t n = 0;
  for (std::size_t i = 0; i < grid.size(); ++i)
    if (!grid.is_boundary(i)) slot[i] = n++;
  std::vector<Eigen::Triplet<double>> t;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (grid.is_boundary(i)) continue;
    const auto [ix, iy] = grid.multi_index(i);
    const auto row = static_cast<int>(slot[i]);
    for (int axis = 0; axis < grid.dim(); ++axis) {
      const double w = 1.0 / (grid.spacing(axis) * grid.spacing(axis));
      t.emplace_back(row, row, -2.0 * w);
      for (int sgn : {-1, 1}) {
        const auto nb = axis == 0 ? grid.index(ix + sgn, iy) : grid.index(ix, iy + sgn);
        if (!grid.is_boundary(nb)) t.emplace_back(row, static_cast<int>(slot[nb]), w);
      }
    }
  }
  SparseMatrix lap(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  lap.setFromTriplets(t.begin(), t.end());
  return lap;
}

//! Time history of the auxiliary temperature.
struct CoupledState {
  std::vector<Field> zeta;
};

/// One implicit Euler step zeta_k -> zeta_{k+1} of the auxiliary heat
/// equation, with the source evaluated at t_k from v_k and |L v_k|.
inline Field step_coupled_heat(const CoupledHeatConstraint& heat, const LinearOperatorL& op, const Field& zeta,
                               const Field& v, const EdgeField& lu, double t, double dt) {
  const Grid& grid = op.grid();
  detail::require_size(zeta.size(), grid.size(), "step_coupled_heat");
  detail::require_size(v.size(), grid.size(), "step_coupled_heat");
  if (!(dt > 0.0)) throw ParameterError("step_coupled_heat: dt must be positive");
  std::vector<double> mag(lu.points());
  for (std::size_t j = 0; j < mag.size(); ++j) mag[j] = lu.magnitude(j);
  const Field mag_nodes = op.restrict_to_nodes(mag);

  const SparseMatrix lap = interior_laplacian(grid);
  SparseMatrix system(lap.rows(), lap.cols());
  system.setIdentity();
  system -= dt * heat.diffusivity * lap;
  system.makeCompressed();

  Eigen::VectorXd rhs(lap.rows());
  std::size_t r = 0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (grid.is_boundary(i)) continue;
    const double src = heat.source(grid.coord(i), t) + heat.psi * v[i] + heat.eta * mag_nodes[i];
    rhs[static_cast<Eigen::Index>(r++)] = zeta[i] + dt * src;
  }
  Eigen::SparseLU<SparseMatrix> lu_solver;
  lu_solver.compute(system);
  if (lu_solver.info() != Eigen::Success) throw Error("step_coupled_heat: singular heat system");
  const Eigen::VectorXd sol = lu_solver.solve(rhs);
  Field out(grid.size());
  r = 0;
  for (std::size_t i = 0; i < grid.size(); ++i)
    if (!grid.is_boundary(i)) out[i] = sol[static_cast<Eigen::Index>(r++)];
  return out;
}

//! clamp(g(zeta)) at the evaluation points.
inline ConstraintField eval_coupled(const CoupledHeatConstraint& heat, const LinearOperatorL& op, const Field& zeta,
                                    double lower, double upper) {
  const auto zeta_pts = op.interpolate(zeta);
  std::vector<double> g(zeta_pts.size());
  for (std::size_t j = 0; j < g.size(); ++j) g[j] = heat.compose(zeta_pts[j]);
  return detail::clamp_into(std::move(g), lower, upper);
}

inline Field initial_temperature(const CoupledHeatConstraint& heat, const Grid& grid) {
  if (heat.initial.empty()) return Field(grid.size());
  detail::require_size(heat.initial.size(), grid.size(), "coupled heat initial datum");
  return Field(heat.initial);
}

/// Constraint fields G[phi](t_0), ..., G[phi](t_N) along a trajectory phi.
/// Entry k reads phi only at times t_0, ..., t_k.
inline std::vector<ConstraintField> constraint_along(const ConstraintOperator& cop, const LinearOperatorL& op,
                                                     std::span<const Field> phi, const TimeGrid& time) {
  const auto n = static_cast<std::size_t>(time.steps()) + 1;
  detail::require_size(phi.size(), n, "constraint_along");
  std::vector<ConstraintField> out;
  out.reserve(n);
  if (const auto* given = cop.given()) {
    for (std::size_t k = 0; k < n; ++k)
      out.push_back(eval_given(given->g, op, time.time(static_cast<int>(k)), cop.lower(), cop.upper()));
  } else if (const auto* mk = cop.memory()) {
    for (std::size_t k = 0; k < n; ++k)
      out.push_back(eval_memory_kernel(*mk, op, phi.subspan(0, k + 1), time.dt(), cop.lower(), cop.upper()));
  } else {
    const auto& heat = *cop.heat();
    Field zeta = initial_temperature(heat, op.grid());
    out.push_back(eval_coupled(heat, op, zeta, cop.lower(), cop.upper()));
    for (std::size_t k = 0; k + 1 < n; ++k) {
      zeta = step_coupled_heat(heat, op, zeta, phi[k], op.apply(phi[k]), time.time(static_cast<int>(k)), time.dt());
      out.push_back(eval_coupled(heat, op, zeta, cop.lower(), cop.upper()));
    }
  }
  return out;
}

//! G[u0] at t = 0.
inline ConstraintField constraint_at_start(const ConstraintOperator& cop, const LinearOperatorL& op,
                                           const Field& u0) {
  if (const auto* given = cop.given()) return eval_given(given->g, op, 0.0, cop.lower(), cop.upper());
  if (const auto* mk = cop.memory())
    return eval_memory_kernel(*mk, op, std::span<const Field>(&u0, 1), 1.0, cop.lower(), cop.upper());
  const auto& heat = *cop.heat();
  return eval_coupled(heat, op, initial_temperature(heat, op.grid()), cop.lower(), cop.upper());
}

}  // namespace penqvi
