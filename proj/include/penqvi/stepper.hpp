#pragma once

#include <Eigen/SparseLU>

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "constraints.hpp"
#include "core.hpp"
#include "operators.hpp"
#include "penalty.hpp"
#include "problem.hpp"

namespace penqvi {

struct NewtonOptions {
  int max_iterations = 50;
  //! Relative to the weighted norm of w_prev / dt + f.
  double relative_tolerance = 1e-10;
  double absolute_tolerance = 1e-12;
  double backtrack_factor = 0.5;
  double min_step = 1.0 / (1 << 20);
  //! Armijo constant of the residual-decrease test.
  double sufficient_decrease = 1e-4;
  int max_halvings = 8;

  void validate() const {
    if (max_iterations < 1) throw ParameterError("solver.max_iterations must be >= 1");
    if (!(relative_tolerance > 0.0) || !(absolute_tolerance > 0.0))
      throw ParameterError("solver tolerances must be positive");
    if (!(backtrack_factor > 0.0 && backtrack_factor < 1.0) || !(min_step > 0.0 && min_step < 1.0))
      throw ParameterError("solver damping factors must lie in (0, 1)");
    if (max_halvings < 0) throw ParameterError("solver.max_halvings must be >= 0");
  }
};

/// Descending epsilon and delta lists; every epsilon stage runs the full delta sweep.
struct ContinuationSchedule {
  std::vector<double> epsilons{0.4, 0.2, 0.1, 0.05};
  std::vector<double> deltas{1e-2, 1e-4, 1e-6};
  PenaltyVariant variant = PenaltyVariant::MagnitudeGap;
  bool allow_small_epsilon = false;
  double saturation = 1e12;

  static ContinuationSchedule single(const PenaltyParams& p) {
    ContinuationSchedule s;
    s.epsilons = {p.epsilon};
    s.deltas = {p.delta};
    s.variant = p.variant;
    s.allow_small_epsilon = p.allow_small_epsilon;
    s.saturation = p.saturation;
    return s;
  }

  std::vector<PenaltyParams> stages() const {
    std::vector<PenaltyParams> out;
    for (double e : epsilons)
      for (double d : deltas) {
        PenaltyParams p;
        p.epsilon = e;
        p.delta = d;
        p.variant = variant;
        p.allow_small_epsilon = allow_small_epsilon;
        p.saturation = saturation;
        out.push_back(p);
      }
    return out;
  }

  void validate() const {
    if (epsilons.empty() || deltas.empty()) throw ParameterError("schedule.epsilons and schedule.deltas must be nonempty");
    for (std::size_t i = 1; i < epsilons.size(); ++i)
      if (!(epsilons[i] < epsilons[i - 1])) throw ParameterError("schedule.epsilons must be strictly decreasing");
    for (std::size_t i = 1; i < deltas.size(); ++i)
      if (!(deltas[i] < deltas[i - 1])) throw ParameterError("schedule.deltas must be strictly decreasing");
    for (const auto& s : stages()) s.validate();
  }
};

class NonConvergence : public Error {
public:
  NonConvergence(const std::string& what, SolveDiagnostics diag) : Error(what), diagnostics(diag) {}
  SolveDiagnostics diagnostics;
};

/// The backward-Euler penalised system of one time step,
///   R(w) = (w - w_prev)/dt + L^T [a(Lw) + (delta + k_eps(gap)) P(Lw) Lw] + b(w) - f,
/// with identity rows on the Dirichlet boundary.
class PenalizedStep {
public:
  PenalizedStep(const ProblemSpec& spec, const LinearOperatorL& op, const Field& w_prev, const ConstraintField& g,
                const PenaltyParams& params, double t, double dt)
      : spec_(spec), op_(op), w_prev_(w_prev), g_(g), params_(params), t_(t), dt_(dt),
        f_(spec.sample_source(t)) {
    detail::require_size(w_prev.size(), spec.grid.size(), "penalised step");
    detail::require_size(g.size(), op.points(), "penalised step");
    const auto& pts = op.point_coords();
    alpha_.resize(pts.size());
    for (std::size_t j = 0; j < pts.size(); ++j) alpha_[j] = spec.law.alpha(pts[j], t);
  }

  double dt() const { return dt_; }
  const Field& source() const { return f_; }

  //! Total stress a(xi) + penalty at every evaluation point.
  EdgeField stress(const EdgeField& lu) const {
    EdgeField sigma(lu.points(), lu.components);
    const auto& pts = op_.point_coords();
    const double p = spec_.law.p;
    for (std::size_t j = 0; j < lu.points(); ++j) {
      const auto xi = lu.at(j);
      const double r2 = squared_norm(xi);
      auto s = sigma.at(j);
      if (spec_.law.custom_stress) {
        const auto a = spec_.law.custom_stress(pts[j], t_, xi);
        for (std::size_t k = 0; k < xi.size(); ++k) s[k] = a[k];
      }
      if (r2 == 0.0) continue;
      const double pw = power_coefficient(r2, p, spec_.law.mu).c;
      double c = penalty_coefficient(r2, g_[j], params_, p).c * pw;
      if (!spec_.law.custom_stress) c += alpha_[j] * pw;
      for (std::size_t k = 0; k < xi.size(); ++k) s[k] += c * xi[k];
    }
    return sigma;
  }

  Field residual(const Field& w) const {
    const EdgeField lu = op_.apply(w);
    Field r = op_.apply_adjoint(stress(lu));
    for (std::size_t i = 0; i < r.size(); ++i) {
      if (spec_.grid.is_boundary(i)) {
        r[i] = w[i];
        continue;
      }
      r[i] += (w[i] - w_prev_[i]) / dt_ + eval_b(spec_.law, w[i]) - f_[i];
    }
    return r;
  }

  //! Weighted l2 norm of a residual over all rows.
  double norm(const Field& r) const { return norm_l2(r, spec_.grid); }

  //! Scale used for the relative tolerance: |w_prev / dt + f|.
  double data_scale() const {
    double s = 0.0;
    for (std::size_t i = 0; i < f_.size(); ++i) {
      if (spec_.grid.is_boundary(i)) continue;
      const double v = w_prev_[i] / dt_ + f_[i];
      s += v * v;
    }
    return std::sqrt(spec_.grid.cell_volume() * s);
  }

  //! Jacobian restricted to the interior unknowns.
  SparseMatrix jacobian(const Field& w) const {
    const EdgeField lu = op_.apply(w);
    const auto& pts = op_.point_coords();
    const int d = lu.components;
    const double p = spec_.law.p;
    std::vector<Eigen::Triplet<double>> t;
    t.reserve(lu.points() * static_cast<std::size_t>(d * d));
    for (std::size_t j = 0; j < lu.points(); ++j) {
      const auto xi = lu.at(j);
      const double r2 = squared_norm(xi);
      std::array<double, 4> block{};
      if (spec_.law.custom_stress) {
        block = eval_a_jacobian(spec_.law, pts[j], t_, xi);
      }
      const auto pw = power_coefficient(r2, p, spec_.law.mu);
      const auto pen = penalty_coefficient(r2, g_[j], params_, p);
      double c = pen.c * pw.c;
      double dc = pen.dc_dr2 * pw.c + pen.c * pw.dc_dr2;
      if (!spec_.law.custom_stress) {
        c += alpha_[j] * pw.c;
        dc += alpha_[j] * pw.dc_dr2;
      }
      for (int r = 0; r < d; ++r)
        for (int col = 0; col < d; ++col) {
          const double v = block[static_cast<std::size_t>(r * d + col)] + (r == col ? c : 0.0) +
                           2.0 * dc * xi[static_cast<std::size_t>(r)] * xi[static_cast<std::size_t>(col)];
          t.emplace_back(static_cast<int>(j) * d + r, static_cast<int>(j) * d + col, v);
        }
    }
    const auto rows = static_cast<Eigen::Index>(lu.values.size());
    SparseMatrix blocks(rows, rows);
    blocks.setFromTriplets(t.begin(), t.end());
    const SparseMatrix& li = op_.interior_matrix();
    SparseMatrix jac = SparseMatrix(li.transpose()) * blocks * li;
    const double diag = 1.0 / dt_ + eval_b_derivative(spec_.law);
    for (Eigen::Index i = 0; i < jac.rows(); ++i) jac.coeffRef(i, i) += diag;
    jac.makeCompressed();
    return jac;
  }

  //! h^d sum k_eps(gap) and h^d sum (|Lw| - g)^+ at w.
  std::pair<double, double> penalty_and_violation(const Field& w) const {
    const EdgeField lu = op_.apply(w);
    return {penalty_mass(lu, g_, params_, spec_.law.p, spec_.grid), violation_positive_part(lu, g_, spec_.grid)};
  }

private:
  const ProblemSpec& spec_;
  const LinearOperatorL& op_;
  const Field& w_prev_;
  const ConstraintField& g_;
  PenaltyParams params_;
  double t_;
  double dt_;
  Field f_;
  std::vector<double> alpha_;
};

//! Result of one damped Newton solve.
struct NewtonResult {
  Field solution;
  SolveDiagnostics diagnostics;
  //! Residual norm at every accepted iterate, starting with the initial guess.
  std::vector<double> residual_history;
  std::vector<double> step_lengths;
};

/// Damped Newton on one penalised step; the residual norm decreases
/// monotonically along accepted iterates. Throws NonConvergence.
inline NewtonResult newton_solve(const PenalizedStep& step, const LinearOperatorL& op, Field guess,
                                 const NewtonOptions& opts) {
  const Grid& grid = op.grid();
  for (std::size_t i = 0; i < guess.size(); ++i)
    if (grid.is_boundary(i)) guess[i] = 0.0;
  NewtonResult out;
  Field w = std::move(guess);
  Field r = step.residual(w);
  double rn = step.norm(r);
  const double tol = std::max(opts.absolute_tolerance, opts.relative_tolerance * step.data_scale());
  out.residual_history.push_back(rn);
  const auto& interior = op.interior_nodes();
  Eigen::SparseLU<SparseMatrix> solver;
  int it = 0;
  while (!(rn <= tol)) {
    SolveDiagnostics diag{it, rn, 0.0, 0.0, 0};
    if (it >= opts.max_iterations || !std::isfinite(rn))
      throw NonConvergence("Newton did not converge: residual " + std::to_string(rn) + " after " +
                               std::to_string(it) + " iterations",
                           diag);
    const SparseMatrix jac = step.jacobian(w);
    solver.compute(jac);
    if (solver.info() != Eigen::Success) throw NonConvergence("singular Newton matrix", diag);
    Eigen::VectorXd rhs(static_cast<Eigen::Index>(interior.size()));
    for (std::size_t m = 0; m < interior.size(); ++m) rhs[static_cast<Eigen::Index>(m)] = -r[interior[m]];
    const Eigen::VectorXd dir = solver.solve(rhs);

    double lambda = 1.0;
    bool accepted = false;
    Field trial = w;
    while (lambda >= opts.min_step) {
      for (std::size_t m = 0; m < interior.size(); ++m)
        trial[interior[m]] = w[interior[m]] + lambda * dir[static_cast<Eigen::Index>(m)];
      Field rt = step.residual(trial);
      const double rtn = step.norm(rt);
      if (std::isfinite(rtn) && rtn < (1.0 - opts.sufficient_decrease * lambda) * rn) {
        w = trial;
        r = std::move(rt);
        rn = rtn;
        accepted = true;
        break;
      }
      lambda *= opts.backtrack_factor;
    }
    ++it;
    if (!accepted) {
      // A step that cannot decrease the residual further while already at
      // round-off level is treated as converged.
      if (rn <= 1e3 * tol) break;
      diag.newton_iterations = it;
      throw NonConvergence("Newton line search failed at residual " + std::to_string(rn), diag);
    }
    out.residual_history.push_back(rn);
    out.step_lengths.push_back(lambda);
  }
  out.diagnostics.newton_iterations = it;
  out.diagnostics.residual = rn;
  const auto [mass, viol] = step.penalty_and_violation(w);
  out.diagnostics.penalty_mass = mass;
  out.diagnostics.violation = viol;
  out.solution = std::move(w);
  return out;
}

namespace detail {

inline NewtonResult solve_with_halving(const ProblemSpec& spec, const LinearOperatorL& op, const Field& w_prev,
                                       const ConstraintField& g, const PenaltyParams& params, double t_start,
                                       double dt, const NewtonOptions& opts, const Field* guess, int level) {
  const double t_end = t_start + dt;
  PenalizedStep step(spec, op, w_prev, g, params, t_end, dt);
  if (guess) {
    try {
      return newton_solve(step, op, *guess, opts);
    } catch (const NonConvergence&) {
      // fall back to the previous time level as the initial guess
    }
  }
  try {
    return newton_solve(step, op, w_prev, opts);
  } catch (const NonConvergence& e) {
    if (level >= opts.max_halvings) {
      SolveDiagnostics diag = e.diagnostics;
      diag.halvings = level;
      throw NonConvergence(std::string(e.what()) + " (after " + std::to_string(level) + " time-step halvings)",
                           diag);
    }
  }
  auto first = solve_with_halving(spec, op, w_prev, g, params, t_start, 0.5 * dt, opts, nullptr, level + 1);
  auto second = solve_with_halving(spec, op, first.solution, g, params, t_start + 0.5 * dt, 0.5 * dt, opts,
                                   nullptr, level + 1);
  second.diagnostics.newton_iterations += first.diagnostics.newton_iterations;
  second.diagnostics.halvings =
      std::max({level + 1, first.diagnostics.halvings, second.diagnostics.halvings});
  return second;
}

}  // namespace detail

/// One backward-Euler step from w_prev over (t - dt, t] with the bound g frozen.
/// The Newton iteration starts from `guess` when given and from w_prev
/// otherwise; failures halve dt up to opts.max_halvings times.
inline std::pair<Field, SolveDiagnostics> newton_step_solve(const Field& w_prev, const ConstraintField& g,
                                                            const ProblemSpec& spec, const PenaltyParams& params,
                                                            double t, double dt, const NewtonOptions& opts,
                                                            const Field* guess = nullptr) {
  params.validate();
  opts.validate();
  if (!w_prev.all_finite()) throw ParameterError("newton_step_solve: previous field is not finite");
  const auto op = spec.make_operator();
  auto res = detail::solve_with_halving(spec, op, w_prev, g, params, t - dt, dt, opts, guess, 0);
  return {std::move(res.solution), res.diagnostics};
}

/// Backward-Euler run of the penalised system for frozen bounds
/// G_frozen[k] ~ G(t_k). Step k uses the previous stage's field at t_{k+1}
/// as Newton guess when `warm` is supplied.
inline Trajectory solve_penalized_evolution(const ProblemSpec& spec, const std::vector<ConstraintField>& g_frozen,
                                            const PenaltyParams& params, const NewtonOptions& opts,
                                            const Trajectory* warm = nullptr) {
  params.validate();
  opts.validate();
  const int n = spec.time.steps();
  detail::require_size(g_frozen.size(), static_cast<std::size_t>(n) + 1, "solve_penalized_evolution: bounds");
  if (warm) detail::require_size(warm->fields.size(), static_cast<std::size_t>(n) + 1, "warm start");
  const auto op = spec.make_operator();
  Trajectory traj(spec.initial);
  traj.fields.reserve(static_cast<std::size_t>(n) + 1);
  for (int k = 0; k < n; ++k) {
    const Field* guess = warm ? &warm->fields[static_cast<std::size_t>(k) + 1] : nullptr;
    const double t0 = spec.time.time(k);
    auto res = detail::solve_with_halving(spec, op, traj.fields.back(), g_frozen[static_cast<std::size_t>(k) + 1],
                                          params, t0, spec.time.time(k + 1) - t0, opts, guess, 0);
    traj.fields.push_back(std::move(res.solution));
    traj.diagnostics.push_back(res.diagnostics);
  }
  return traj;
}

//! Per-stage convergence record of a continuation run.
struct StageSummary {
  double epsilon = 0.0;
  double delta = 0.0;
  //! dt * sum_k int_Omega (|Lu| - G)^+ over t_1..t_N.
  double violation = 0.0;
  //! dt * sum_k int_Omega k_eps.
  double penalty_mass = 0.0;
  double final_l2 = 0.0;
  //! max_k |u(t_k)|_{L2}
  double max_l2 = 0.0;
  //! |Lu|_{L^p(Q_T)}
  double lp_norm = 0.0;
  //! delta^(1/p) |Lu|_{L^p(Q_T)}
  double scaled_lp_norm = 0.0;
  int newton_iterations = 0;
  int max_halvings = 0;
  int outer_iterations = 0;
  bool outer_converged = true;
  std::vector<double> outer_residuals;
  std::vector<double> step_residuals;
};

inline StageSummary summarize_stage(const ProblemSpec& spec, const Trajectory& traj, const PenaltyParams& params) {
  StageSummary s;
  s.epsilon = params.epsilon;
  s.delta = params.delta;
  const double dt = spec.time.dt();
  const auto op = spec.make_operator();
  std::vector<EdgeField> slices;
  for (std::size_t k = 0; k < traj.fields.size(); ++k) {
    const double l2 = norm_l2(traj.fields[k], spec.grid);
    s.max_l2 = std::max(s.max_l2, l2);
    if (k > 0) slices.push_back(op.apply(traj.fields[k]));
  }
  for (const auto& d : traj.diagnostics) {
    s.violation += dt * d.violation;
    s.penalty_mass += dt * d.penalty_mass;
    s.newton_iterations += d.newton_iterations;
    s.max_halvings = std::max(s.max_halvings, d.halvings);
    s.step_residuals.push_back(d.residual);
  }
  s.final_l2 = norm_l2(traj.final(), spec.grid);
  s.lp_norm = norm_lp_spacetime(slices, spec.law.p, dt, spec.grid);
  s.scaled_lp_norm = std::pow(params.delta, 1.0 / spec.law.p) * s.lp_norm;
  return s;
}

struct ContinuationResult {
  Trajectory trajectory;
  std::vector<StageSummary> stages;
};

//! Runs every (epsilon, delta) stage, warm-starting each from its predecessor.
inline ContinuationResult continuation_solve(const ProblemSpec& spec, const std::vector<ConstraintField>& g_frozen,
                                             const ContinuationSchedule& schedule, const NewtonOptions& opts) {
  schedule.validate();
  ContinuationResult out;
  std::optional<Trajectory> previous;
  for (const auto& params : schedule.stages()) {
    Trajectory traj = solve_penalized_evolution(spec, g_frozen, params, opts, previous ? &*previous : nullptr);
    out.stages.push_back(summarize_stage(spec, traj, params));
    previous = std::move(traj);
  }
  out.trajectory = std::move(*previous);
  return out;
}

/// Discrete energy balance of a penalised run:
///   |w_k|^2 + 2 delta sum dt int P(Lw)|Lw|^2  <=  |u0|^2 + sum dt (|w|^2 + |f|^2)
/// with P the regularised power coefficient (equal to |Lw|^(p-2) when mu = 0).
struct EnergyBalance {
  //! max_k (lhs_k - rhs_k); nonpositive when the estimate holds.
  double worst_gap = 0.0;
  std::vector<double> lhs;
  std::vector<double> rhs;
};

inline EnergyBalance energy_estimate(const ProblemSpec& spec, const Trajectory& traj, const PenaltyParams& params) {
  const auto op = spec.make_operator();
  const double dt = spec.time.dt();
  const double u0 = norm_l2(traj.initial(), spec.grid);
  EnergyBalance out;
  out.worst_gap = -std::numeric_limits<double>::infinity();
  double dissipation = 0.0, forcing = 0.0;
  for (std::size_t k = 1; k < traj.fields.size(); ++k) {
    const auto& w = traj.fields[k];
    const auto lu = op.apply(w);
    double s = 0.0;
    for (std::size_t j = 0; j < lu.points(); ++j) {
      const double r2 = squared_norm(lu.at(j));
      s += power_coefficient(r2, spec.law.p, spec.law.mu).c * r2;
    }
    dissipation += 2.0 * params.delta * dt * spec.grid.cell_volume() * s;
    const double wn = norm_l2(w, spec.grid);
    const double fn = norm_l2(spec.sample_source(spec.time.time(static_cast<int>(k))), spec.grid);
    forcing += dt * (wn * wn + fn * fn);
    out.lhs.push_back(wn * wn + dissipation);
    out.rhs.push_back(u0 * u0 + forcing);
    out.worst_gap = std::max(out.worst_gap, out.lhs.back() - out.rhs.back());
  }
  return out;
}

}  // namespace penqvi
