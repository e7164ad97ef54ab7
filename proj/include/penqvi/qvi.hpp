#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "constraints.hpp"
#include "core.hpp"
#include "stepper.hpp"

namespace penqvi {

struct OuterOptions {
  int max_iterations = 60;
  double tolerance = 1e-8;
  //! phi <- (1 - relaxation) phi + relaxation S(phi)
  double relaxation = 1.0;

  void validate() const {
    if (max_iterations < 1) throw ParameterError("outer.max_iterations must be >= 1");
    if (!(tolerance > 0.0)) throw ParameterError("outer.tolerance must be positive");
    if (!(relaxation > 0.0 && relaxation <= 1.0)) throw ParameterError("outer.relaxation must lie in (0, 1]");
  }
};

//! Discrete L2(Q_T) distance over t_1..t_N.
inline double distance_spacetime(const Trajectory& a, const Trajectory& b, const ProblemSpec& spec) {
  detail::require_size(a.fields.size(), b.fields.size(), "distance_spacetime");
  double s = 0.0;
  for (std::size_t k = 1; k < a.fields.size(); ++k) {
    const double d = distance_l2(a.fields[k], b.fields[k], spec.grid);
    s += d * d;
  }
  return std::sqrt(spec.time.dt() * s);
}

//! The trajectory constant in time and equal to u0.
inline Trajectory constant_trajectory(const ProblemSpec& spec) {
  Trajectory t(spec.initial);
  for (int k = 0; k < spec.time.steps(); ++k) t.fields.push_back(spec.initial);
  return t;
}

/// S(phi): freeze G along phi (causally) and solve the penalised evolution.
/// `warm` supplies per-step Newton guesses.
inline Trajectory evaluate_S(const ProblemSpec& spec, const Trajectory& phi, const PenaltyParams& params,
                             const NewtonOptions& opts, const Trajectory* warm = nullptr) {
  detail::require_size(phi.fields.size(), static_cast<std::size_t>(spec.time.steps()) + 1, "evaluate_S");
  const auto op = spec.make_operator();
  const auto g = constraint_along(spec.constraint, op, phi.fields, spec.time);
  return solve_penalized_evolution(spec, g, params, opts, warm);
}

struct FixedPointResult {
  Trajectory trajectory;
  //! |phi^{k+1} - phi^k| in L2(Q_T) per outer iteration.
  std::vector<double> residuals;
  bool converged = false;
  int iterations = 0;
  //! |S(phi*) - phi*| from one extra evaluation after convergence.
  double verification_residual = 0.0;
};

/// Picard iteration phi^{k+1} = (1 - theta) phi^k + theta S(phi^k) from
/// `start`. Non-convergence is reported through the flag, not thrown.
/// With `warm_first` unset the first S evaluation starts its Newton solves
/// from the previous time level.
inline FixedPointResult qvi_fixed_point(const ProblemSpec& spec, const PenaltyParams& params, const NewtonOptions& opts,
                                        const OuterOptions& outer, const Trajectory& start, bool warm_first = true) {
  outer.validate();
  FixedPointResult out;
  if (spec.constraint.is_given()) {
    // S is constant: its first value is the fixed point.
    out.trajectory = evaluate_S(spec, start, params, opts, warm_first ? &start : nullptr);
    out.iterations = 1;
    out.converged = true;
    const Trajectory check = evaluate_S(spec, out.trajectory, params, opts, &out.trajectory);
    out.verification_residual = distance_spacetime(check, out.trajectory, spec);
    out.residuals.push_back(out.verification_residual);
    return out;
  }
  Trajectory phi = start;
  for (int it = 0; it < outer.max_iterations; ++it) {
    const bool use_warm = warm_first || it > 0;
    Trajectory image = evaluate_S(spec, phi, params, opts, use_warm ? &phi : nullptr);
    if (outer.relaxation < 1.0) {
      for (std::size_t k = 0; k < image.fields.size(); ++k)
        for (std::size_t i = 0; i < image.fields[k].size(); ++i)
          image.fields[k][i] =
              (1.0 - outer.relaxation) * phi.fields[k][i] + outer.relaxation * image.fields[k][i];
    }
    const double r = distance_spacetime(image, phi, spec);
    out.residuals.push_back(r);
    phi = std::move(image);
    out.iterations = it + 1;
    if (r < outer.tolerance) {
      out.converged = true;
      break;
    }
  }
  if (out.converged) {
    const Trajectory check = evaluate_S(spec, phi, params, opts, &phi);
    out.verification_residual = distance_spacetime(check, phi, spec);
  }
  out.trajectory = std::move(phi);
  return out;
}

struct QviResult {
  Trajectory trajectory;
  //! G[u](t_k) along the returned trajectory.
  std::vector<ConstraintField> constraints;
  std::vector<StageSummary> stages;
  bool converged = true;
  //! Message of the error that stopped the run early; empty on success.
  std::string failure;
};

/// Fixed point per continuation stage, warm-starting phi from the previous
/// stage. Solver errors stop the run and keep the stages finished so far.
inline QviResult qvi_solve(const ProblemSpec& spec, const ContinuationSchedule& schedule, const NewtonOptions& opts,
                           const OuterOptions& outer) {
  schedule.validate();
  spec.validate();
  QviResult out;
  Trajectory phi = constant_trajectory(spec);
  bool first = true;
  for (const auto& params : schedule.stages()) {
    try {
      auto fp = qvi_fixed_point(spec, params, opts, outer, phi, !first);
      auto summary = summarize_stage(spec, fp.trajectory, params);
      summary.outer_iterations = fp.iterations;
      summary.outer_converged = fp.converged;
      summary.outer_residuals = fp.residuals;
      out.stages.push_back(std::move(summary));
      out.converged = out.converged && fp.converged;
      phi = std::move(fp.trajectory);
      first = false;
    } catch (const Error& e) {
      out.converged = false;
      out.failure = "stage eps=" + std::to_string(params.epsilon) + " delta=" + std::to_string(params.delta) +
                    ": " + e.what();
      break;
    }
  }
  out.trajectory = std::move(phi);
  const auto op = spec.make_operator();
  out.constraints = constraint_along(spec.constraint, op, out.trajectory.fields, spec.time);
  return out;
}

}  // namespace penqvi
