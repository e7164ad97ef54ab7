#pragma once

#include <cmath>
#include <string>

#include "constraints.hpp"
#include "core.hpp"
#include "operators.hpp"

namespace penqvi {

//! Everything that defines one evolution problem with homogeneous Dirichlet data.
struct ProblemSpec {
  Grid grid;
  TimeGrid time;
  OperatorKind operator_kind;
  MaterialLaw law;
  ConstraintOperator constraint;
  SpaceTimeFunction source;
  Field initial;

  LinearOperatorL make_operator() const { return {operator_kind, grid}; }

  Field sample_source(double t) const {
    Field f(grid.size());
    for (std::size_t i = 0; i < f.size(); ++i) f[i] = source(grid.coord(i), t);
    return f;
  }

  /// Checks the Dirichlet condition and |L u0| <= G[u0](0) to within `tol`.
  void validate(double tol = 1e-10) const {
    law.validate();
    detail::require_size(initial.size(), grid.size(), "initial datum");
    if (!initial.all_finite()) throw ParameterError("initial datum is not finite");
    for (std::size_t i = 0; i < initial.size(); ++i)
      if (grid.is_boundary(i) && initial[i] != 0.0)
        throw ParameterError("initial datum violates the homogeneous Dirichlet condition");
    const auto op = make_operator();
    const auto lu = op.apply(initial);
    const auto g0 = constraint_at_start(constraint, op, initial);
    for (std::size_t j = 0; j < lu.points(); ++j)
      if (lu.magnitude(j) > g0[j] + tol)
        throw ParameterError("initial datum is infeasible: |Lu0| = " + std::to_string(lu.magnitude(j)) +
                             " exceeds G = " + std::to_string(g0[j]) + " at point " + std::to_string(j));
  }
};

}  // namespace penqvi
