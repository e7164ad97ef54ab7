#pragma once

#include <Eigen/SparseCore>

#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <vector>

#include "core.hpp"

namespace penqvi {

using SparseMatrix = Eigen::SparseMatrix<double>;

enum class OperatorKind { Gradient1D, Gradient2D, Laplacian1D };

/// Discrete differential operator L together with its evaluation-point layout.
///
/// Gradients are evaluated at cell midpoints (1D) or cell centres (2D, by
/// averaging the two parallel edge differences of the cell); the 1D Laplacian
/// uses the 3-point stencil at interior nodes. Nodes and evaluation points
/// both carry the quadrature weight h^d, so the adjoint with respect to the
/// weighted inner products is the plain matrix transpose, restricted to
/// interior nodes.
class LinearOperatorL {
public:
  LinearOperatorL(OperatorKind kind, const Grid& grid) : kind_(kind), grid_(grid) {
    switch (kind_) {
      case OperatorKind::Gradient1D:
        if (grid.dim() != 1) throw DimensionError("Gradient1D needs a 1D grid");
        build_gradient_1d();
        break;
      case OperatorKind::Gradient2D:
        if (grid.dim() != 2) throw DimensionError("Gradient2D needs a 2D grid");
        build_gradient_2d();
        break;
      case OperatorKind::Laplacian1D:
        if (grid.dim() != 1) throw DimensionError("Laplacian1D needs a 1D grid");
        build_laplacian_1d();
        break;
    }
    build_interior_restriction();
  }

  //! Default L for a grid: the gradient of matching dimension.
  static LinearOperatorL gradient(const Grid& grid) {
    return {grid.dim() == 1 ? OperatorKind::Gradient1D : OperatorKind::Gradient2D, grid};
  }

  OperatorKind kind() const { return kind_; }
  const Grid& grid() const { return grid_; }
  int components() const { return components_; }
  std::size_t points() const { return points_.size(); }
  const std::vector<Point>& point_coords() const { return points_; }

  //! Order of the differential operator.
  int order() const { return kind_ == OperatorKind::Laplacian1D ? 2 : 1; }

  //! Row-major over (point, component), columns over all nodes.
  const SparseMatrix& matrix() const { return matrix_; }
  //! Same operator with columns restricted to interior nodes.
  const SparseMatrix& interior_matrix() const { return interior_matrix_; }
  const std::vector<std::size_t>& interior_nodes() const { return interior_nodes_; }

  //! Interpolation of nodal values to evaluation points.
  const SparseMatrix& node_to_point() const { return node_to_point_; }

  EdgeField apply(const Field& u) const {
    detail::require_size(u.size(), grid_.size(), "apply_L");
    EdgeField out(points(), components_);
    Eigen::Map<const Eigen::VectorXd> x(u.values.data(), static_cast<Eigen::Index>(u.size()));
    Eigen::Map<Eigen::VectorXd> y(out.values.data(), static_cast<Eigen::Index>(out.values.size()));
    y = matrix_ * x;
    return out;
  }

  Field apply_adjoint(const EdgeField& q) const {
    if (q.components != components_ || q.points() != points())
      throw DimensionError("apply_L_adjoint: edge field layout does not match the operator");
    Field out(grid_.size());
    Eigen::Map<const Eigen::VectorXd> x(q.values.data(), static_cast<Eigen::Index>(q.values.size()));
    Eigen::Map<Eigen::VectorXd> y(out.values.data(), static_cast<Eigen::Index>(out.size()));
    y = matrix_.transpose() * x;
    for (std::size_t i = 0; i < out.size(); ++i)
      if (grid_.is_boundary(i)) out[i] = 0.0;
    return out;
  }

  //! Nodal values sampled at the evaluation points (averages of adjacent nodes).
  std::vector<double> interpolate(const Field& u) const {
    detail::require_size(u.size(), grid_.size(), "interpolate");
    std::vector<double> out(points());
    Eigen::Map<const Eigen::VectorXd> x(u.values.data(), static_cast<Eigen::Index>(u.size()));
    Eigen::Map<Eigen::VectorXd> y(out.data(), static_cast<Eigen::Index>(out.size()));
    y = node_to_point_ * x;
    return out;
  }

  //! Point values averaged back onto the nodes that touch each point.
  Field restrict_to_nodes(std::span<const double> values) const {
    detail::require_size(values.size(), points(), "restrict_to_nodes");
    Field out(grid_.size());
    std::vector<double> weight(grid_.size(), 0.0);
    for (int k = 0; k < node_to_point_.outerSize(); ++k)
      for (SparseMatrix::InnerIterator it(node_to_point_, k); it; ++it) {
        out[static_cast<std::size_t>(it.col())] += it.value() * values[static_cast<std::size_t>(it.row())];
        weight[static_cast<std::size_t>(it.col())] += it.value();
      }
    for (std::size_t i = 0; i < out.size(); ++i)
      if (weight[i] > 0.0) out[i] /= weight[i];
    return out;
  }

private:
  void build_gradient_1d() {
    const int n = grid_.nodes(0);
    const double h = grid_.spacing(0);
    components_ = 1;
    std::vector<Eigen::Triplet<double>> t, interp;
    for (int j = 0; j + 1 < n; ++j) {
      t.emplace_back(j, j, -1.0 / h);
      t.emplace_back(j, j + 1, 1.0 / h);
      interp.emplace_back(j, j, 0.5);
      interp.emplace_back(j, j + 1, 0.5);
      points_.push_back({(j + 0.5) * h, 0.0});
    }
    finish(t, interp);
  }

  void build_gradient_2d() {
    const int nx = grid_.nodes(0), ny = grid_.nodes(1);
    const double hx = grid_.spacing(0), hy = grid_.spacing(1);
    components_ = 2;
    std::vector<Eigen::Triplet<double>> t, interp;
    int c = 0;
    for (int j = 0; j + 1 < ny; ++j)
      for (int i = 0; i + 1 < nx; ++i, ++c) {
        const auto n00 = static_cast<int>(grid_.index(i, j)), n10 = static_cast<int>(grid_.index(i + 1, j));
        const auto n01 = static_cast<int>(grid_.index(i, j + 1)), n11 = static_cast<int>(grid_.index(i + 1, j + 1));
        const double ax = 0.5 / hx, ay = 0.5 / hy;
        t.emplace_back(2 * c, n00, -ax);
        t.emplace_back(2 * c, n10, ax);
        t.emplace_back(2 * c, n01, -ax);
        t.emplace_back(2 * c, n11, ax);
        t.emplace_back(2 * c + 1, n00, -ay);
        t.emplace_back(2 * c + 1, n01, ay);
        t.emplace_back(2 * c + 1, n10, -ay);
        t.emplace_back(2 * c + 1, n11, ay);
        for (int node : {n00, n10, n01, n11}) interp.emplace_back(c, node, 0.25);
        points_.push_back({(i + 0.5) * hx, (j + 0.5) * hy});
      }
    finish(t, interp);
  }

  void build_laplacian_1d() {
    const int n = grid_.nodes(0);
    const double h = grid_.spacing(0);
    components_ = 1;
    std::vector<Eigen::Triplet<double>> t, interp;
    for (int j = 1; j + 1 < n; ++j) {
      const int r = j - 1;
      t.emplace_back(r, j - 1, 1.0 / (h * h));
      t.emplace_back(r, j, -2.0 / (h * h));
      t.emplace_back(r, j + 1, 1.0 / (h * h));
      interp.emplace_back(r, j, 1.0);
      points_.push_back({j * h, 0.0});
    }
    finish(t, interp);
  }

  void finish(const std::vector<Eigen::Triplet<double>>& t, const std::vector<Eigen::Triplet<double>>& interp) {
    const auto rows = static_cast<Eigen::Index>(points_.size() * static_cast<std::size_t>(components_));
    const auto cols = static_cast<Eigen::Index>(grid_.size());
    matrix_.resize(rows, cols);
    matrix_.setFromTriplets(t.begin(), t.end());
    node_to_point_.resize(static_cast<Eigen::Index>(points_.size()), cols);
    node_to_point_.setFromTriplets(interp.begin(), interp.end());
  }

  void build_interior_restriction() {
    std::vector<Eigen::Triplet<double>> sel;
    for (std::size_t i = 0; i < grid_.size(); ++i)
      if (!grid_.is_boundary(i)) {
        sel.emplace_back(static_cast<int>(i), static_cast<int>(interior_nodes_.size()), 1.0);
        interior_nodes_.push_back(i);
      }
    SparseMatrix selection(static_cast<Eigen::Index>(grid_.size()),
                           static_cast<Eigen::Index>(interior_nodes_.size()));
    selection.setFromTriplets(sel.begin(), sel.end());
    interior_matrix_ = matrix_ * selection;
  }

  OperatorKind kind_;
  Grid grid_;
  int components_ = 1;
  std::vector<Point> points_;
  SparseMatrix matrix_;
  SparseMatrix interior_matrix_;
  SparseMatrix node_to_point_;
  std::vector<std::size_t> interior_nodes_;
};

inline EdgeField apply_L(const LinearOperatorL& op, const Field& u) { return op.apply(u); }
inline Field apply_L_adjoint(const LinearOperatorL& op, const EdgeField& q) { return op.apply_adjoint(q); }

enum class BKind { Zero, Linear };

//! A vector-valued map (x, t, xi) -> a(x, t, xi) with the dimension of xi.
using StressFunction = std::function<std::array<double, 2>(const Point&, double, std::span<const double>)>;

/// Constitutive law a(x,t,xi) = alpha(x,t) (|xi|^2 + mu^2)^((p-2)/2) xi and
/// b(eta) = 0 or lambda * eta.
struct MaterialLaw {
  double p = 2.0;
  SpaceTimeFunction alpha = [](const Point&, double) { return 1.0; };
  //! Supremum of alpha, used for the growth constant a*.
  double alpha_sup = 1.0;
  double mu = 0.0;
  BKind b_kind = BKind::Zero;
  double lambda = 0.0;
  //! Replaces the power law by an arbitrary monotone field. Such a law has no
  //! known potential, so the convex oracle refuses it.
  StressFunction custom_stress;

  double a_star() const { return alpha_sup; }
  double b_star() const { return b_kind == BKind::Linear ? lambda : 0.0; }
  bool has_potential() const { return !custom_stress; }

  void validate() const {
    if (!(p > 1.0) || !std::isfinite(p)) throw ParameterError("material.p must lie in (1, inf)");
    if (!(mu >= 0.0)) throw ParameterError("material.mu must be nonnegative");
    if (!(lambda >= 0.0)) throw ParameterError("material.lambda must be nonnegative");
    if (!(alpha_sup >= 0.0)) throw ParameterError("material.alpha must be nonnegative");
  }

  static MaterialLaw power_law(double p, double alpha, double mu = 0.0) {
    MaterialLaw law;
    law.p = p;
    law.alpha = [alpha](const Point&, double) { return alpha; };
    law.alpha_sup = alpha;
    law.mu = mu;
    return law;
  }
};

/// Coefficient c and its derivative dc/d(|xi|^2) for a radial field c(|xi|^2) xi.
/// The Jacobian of such a field is c I + 2 c' xi xi^T.
struct RadialCoefficient {
  double c = 0.0;
  double dc_dr2 = 0.0;
};

//! (|xi|^2 + mu^2)^((p-2)/2) and its derivative in |xi|^2; zero at the removable singularity.
inline RadialCoefficient power_coefficient(double r2, double p, double mu) {
  const double w = r2 + mu * mu;
  if (w == 0.0) return {p >= 2.0 ? (p == 2.0 ? 1.0 : 0.0) : 0.0, 0.0};
  const double c = p == 2.0 ? 1.0 : std::pow(w, 0.5 * (p - 2.0));
  return {c, p == 2.0 ? 0.0 : 0.5 * (p - 2.0) * c / w};
}

inline double squared_norm(std::span<const double> xi) {
  double s = 0.0;
  for (double v : xi) s += v * v;
  return s;
}

inline std::vector<double> eval_a(const MaterialLaw& law, const Point& x, double t, std::span<const double> xi) {
  std::vector<double> out(xi.size());
  if (law.custom_stress) {
    const auto a = law.custom_stress(x, t, xi);
    for (std::size_t k = 0; k < xi.size(); ++k) out[k] = a[k];
    return out;
  }
  const double r2 = squared_norm(xi);
  if (r2 == 0.0) return out;
  const double c = law.alpha(x, t) * power_coefficient(r2, law.p, law.mu).c;
  for (std::size_t k = 0; k < xi.size(); ++k) out[k] = c * xi[k];
  return out;
}

//! Potential A with grad_xi A = a, normalised by A(0) = 0.
inline double eval_potential_A(const MaterialLaw& law, const Point& x, double t, std::span<const double> xi) {
  if (!law.has_potential()) throw UnsupportedStructure("custom stress has no potential");
  const double w = squared_norm(xi) + law.mu * law.mu;
  return law.alpha(x, t) / law.p * (std::pow(w, 0.5 * law.p) - std::pow(law.mu, law.p));
}

inline double eval_b(const MaterialLaw& law, double eta) {
  return law.b_kind == BKind::Linear ? law.lambda * eta : 0.0;
}

inline double eval_b_derivative(const MaterialLaw& law) { return law.b_kind == BKind::Linear ? law.lambda : 0.0; }

//! Antiderivative of b with B(0) = 0.
inline double eval_potential_B(const MaterialLaw& law, double eta) {
  return law.b_kind == BKind::Linear ? 0.5 * law.lambda * eta * eta : 0.0;
}

/// Jacobian d a / d xi as a row-major d x d matrix; analytic for the power law,
/// central differences for a custom stress.
inline std::array<double, 4> eval_a_jacobian(const MaterialLaw& law, const Point& x, double t,
                                             std::span<const double> xi) {
  std::array<double, 4> jac{};
  const auto d = xi.size();
  if (law.custom_stress) {
    std::array<double, 2> probe{};
    for (std::size_t k = 0; k < d; ++k) probe[k] = xi[k];
    for (std::size_t col = 0; col < d; ++col) {
      const double step = 1e-7 * std::max(1.0, std::abs(probe[col]));
      auto plus = probe, minus = probe;
      plus[col] += step;
      minus[col] -= step;
      const auto ap = law.custom_stress(x, t, std::span<const double>(plus.data(), d));
      const auto am = law.custom_stress(x, t, std::span<const double>(minus.data(), d));
      for (std::size_t row = 0; row < d; ++row) jac[row * d + col] = (ap[row] - am[row]) / (2.0 * step);
    }
    return jac;
  }
  const double alpha = law.alpha(x, t);
  const auto coef = power_coefficient(squared_norm(xi), law.p, law.mu);
  for (std::size_t r = 0; r < d; ++r)
    for (std::size_t c = 0; c < d; ++c)
      jac[r * d + c] = alpha * ((r == c ? coef.c : 0.0) + 2.0 * coef.dc_dr2 * xi[r] * xi[c]);
  return jac;
}

}  // namespace penqvi
