#pragma once

#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "constraints.hpp"
#include "core.hpp"
#include "operators.hpp"
#include "problem.hpp"
#include "qvi.hpp"
#include "stepper.hpp"

namespace penqvi {

// ---------------------------------------------------------------------------
// Projection onto {w : |Lw| <= g} in the metric |L w|.
//
// With q = L w the projection becomes a Euclidean projection of L z onto the
// intersection of the pointwise balls {|q_j| <= g_j} with the range of L.
// ---------------------------------------------------------------------------

enum class ProjectionMethod {
  //! Exact clipping for 1D operators, Dykstra otherwise.
  Automatic,
  //! Alternating projections with Dykstra correction, any operator.
  Dykstra,
};

struct ProjectionOptions {
  ProjectionMethod method = ProjectionMethod::Automatic;
  int max_iterations = 20000;
  double tolerance = 1e-13;
};

class ConstraintProjector {
public:
  ConstraintProjector(const LinearOperatorL& op, ProjectionOptions opts = {})
      : op_(op), opts_(opts), gram_(SparseMatrix(op.interior_matrix().transpose()) * op.interior_matrix()) {
    chol_.compute(gram_);
    if (chol_.info() != Eigen::Success) throw Error("projector: L^T L is not positive definite");
  }

  const SparseMatrix& gram() const { return gram_; }

  //! Interior nodal values whose image under L is closest to q (least squares).
  Eigen::VectorXd lift(const Eigen::VectorXd& q) const { return chol_.solve(op_.interior_matrix().transpose() * q); }

  Eigen::VectorXd solve_gram(const Eigen::VectorXd& rhs) const { return chol_.solve(rhs); }

  //! Projection in the |L.|-metric of interior values z onto {|Lw| <= g}.
  Eigen::VectorXd project(const Eigen::VectorXd& z, const ConstraintField& g) const {
    const Eigen::VectorXd q0 = op_.interior_matrix() * z;
    Eigen::VectorXd q;
    const bool exact = opts_.method == ProjectionMethod::Automatic && op_.components() == 1;
    if (exact && op_.kind() == OperatorKind::Gradient1D) {
      q = project_increments_1d(q0, g);
    } else if (exact && op_.kind() == OperatorKind::Laplacian1D) {
      q = clip_balls(q0, g);
    } else {
      q = dykstra(q0, g);
    }
    return lift(q);
  }

  int last_dykstra_iterations() const { return dykstra_iterations_; }

  /// Gradient-1D case: q = clip(q0 - c, -g, g) with the shift c chosen by
  /// bisection so that sum q = 0 (increments of a field vanishing at both ends).
  static Eigen::VectorXd project_increments_1d(const Eigen::VectorXd& q0, const ConstraintField& g) {
    auto clipped_sum = [&](double c) {
      double s = 0.0;
      for (Eigen::Index j = 0; j < q0.size(); ++j) {
        const double gj = g[static_cast<std::size_t>(j)];
        s += std::clamp(q0[j] - c, -gj, gj);
      }
      return s;
    };
    double lo = q0.minCoeff() - g.upper - 1.0, hi = q0.maxCoeff() + g.upper + 1.0;
    for (int it = 0; it < 200 && hi - lo > 0.0; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (mid == lo || mid == hi) break;
      (clipped_sum(mid) > 0.0 ? lo : hi) = mid;
    }
    const double c = 0.5 * (lo + hi);
    Eigen::VectorXd q(q0.size());
    for (Eigen::Index j = 0; j < q0.size(); ++j) {
      const double gj = g[static_cast<std::size_t>(j)];
      q[j] = std::clamp(q0[j] - c, -gj, gj);
    }
    // Remove the bisection round-off along the unclipped entries.
    const double mean_defect = q.sum();
    int free = 0;
    for (Eigen::Index j = 0; j < q.size(); ++j)
      if (std::abs(q[j]) < g[static_cast<std::size_t>(j)]) ++free;
    if (free > 0)
      for (Eigen::Index j = 0; j < q.size(); ++j)
        if (std::abs(q[j]) < g[static_cast<std::size_t>(j)]) q[j] -= mean_defect / free;
    return q;
  }

private:
  Eigen::VectorXd clip_balls(Eigen::VectorXd q, const ConstraintField& g) const {
    const int d = op_.components();
    for (std::size_t j = 0; j < g.size(); ++j) {
      double r2 = 0.0;
      for (int c = 0; c < d; ++c) r2 += q[static_cast<Eigen::Index>(j) * d + c] * q[static_cast<Eigen::Index>(j) * d + c];
      const double r = std::sqrt(r2);
      if (r > g[j])
        for (int c = 0; c < d; ++c) q[static_cast<Eigen::Index>(j) * d + c] *= g[j] / r;
    }
    return q;
  }

  Eigen::VectorXd onto_range(const Eigen::VectorXd& q) const { return op_.interior_matrix() * lift(q); }

  Eigen::VectorXd dykstra(const Eigen::VectorXd& q0, const ConstraintField& g) const {
    Eigen::VectorXd x = q0;
    Eigen::VectorXd p = Eigen::VectorXd::Zero(q0.size());
    Eigen::VectorXd r = Eigen::VectorXd::Zero(q0.size());
    dykstra_iterations_ = 0;
    for (int it = 0; it < opts_.max_iterations; ++it) {
      const Eigen::VectorXd y = clip_balls(x + p, g);
      p = x + p - y;
      const Eigen::VectorXd x_next = onto_range(y + r);
      r = y + r - x_next;
      const double change = (x_next - x).norm();
      x = x_next;
      dykstra_iterations_ = it + 1;
      if (change <= opts_.tolerance * (1.0 + x.norm()) && (x - y).norm() <= opts_.tolerance * (1.0 + x.norm()))
        break;
    }
    // x lies in the range of L; pull it into the balls by the smallest
    // uniform contraction so the result is feasible.
    double scale = 1.0;
    const int d = op_.components();
    for (std::size_t j = 0; j < g.size(); ++j) {
      double r2 = 0.0;
      for (int c = 0; c < d; ++c) r2 += x[static_cast<Eigen::Index>(j) * d + c] * x[static_cast<Eigen::Index>(j) * d + c];
      if (std::sqrt(r2) > g[j]) scale = std::min(scale, g[j] / std::sqrt(r2));
    }
    return scale * x;
  }

  const LinearOperatorL& op_;
  ProjectionOptions opts_;
  SparseMatrix gram_;
  Eigen::SimplicialLDLT<SparseMatrix> chol_;
  mutable int dykstra_iterations_ = 0;
};

// ---------------------------------------------------------------------------
// Convex oracle for one time-discrete VI step.
// ---------------------------------------------------------------------------

struct OracleOptions {
  int max_iterations = 200000;
  //! Stop once the natural (KKT) residual falls below this.
  double tolerance = 1e-10;
  //! Consecutive iterations without progress of the natural residual that count as stagnation.
  int stagnation_window = 50;
  double initial_step = 1.0;
  //! Largest number of nodes the oracle accepts.
  std::size_t max_nodes = 64;
  ProjectionOptions projection;
};

struct OracleResult {
  Field solution;
  //! |w - P(w - H^{-1} grad J(w))|_H at the returned iterate.
  double kkt_residual = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<double> energies;
};

/// Minimises
///   J(w) = |w - w_prev|^2 / (2 dt) + int A(Lw) + int B(w) - int f w
/// over {w : |Lw| <= g, w = 0 on the boundary} by projected gradient with
/// backtracking, in the metric <u, v>_H = <Lu, Lv>.
class VIStepOracle {
public:
  VIStepOracle(const ProblemSpec& spec, const Field& w_prev, const ConstraintField& g, double t, double dt,
               OracleOptions opts = {})
      : spec_(spec), op_(spec.make_operator()), projector_(op_, opts.projection), w_prev_(w_prev), g_(g), t_(t),
        dt_(dt), opts_(opts), f_(spec.sample_source(t)) {
    if (!spec.law.has_potential())
      throw UnsupportedStructure("oracle needs a constitutive law with a potential");
    if (spec.grid.size() > opts.max_nodes)
      throw ParameterError("oracle is limited to " + std::to_string(opts.max_nodes) + " nodes");
    if (!(dt > 0.0)) throw ParameterError("oracle: dt must be positive");
    detail::require_size(g.size(), op_.points(), "oracle constraint");
  }

  double energy(const Field& w) const {
    const auto lu = op_.apply(w);
    const auto& pts = op_.point_coords();
    double s = 0.0;
    for (std::size_t j = 0; j < lu.points(); ++j) s += eval_potential_A(spec_.law, pts[j], t_, lu.at(j));
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double d = w[i] - w_prev_[i];
      s += d * d / (2.0 * dt_) + eval_potential_B(spec_.law, w[i]) - f_[i] * w[i];
    }
    return spec_.grid.cell_volume() * s;
  }

  //! Euclidean gradient of J divided by h^d, on interior nodes.
  Eigen::VectorXd gradient(const Field& w) const {
    const auto lu = op_.apply(w);
    EdgeField a(lu.points(), lu.components);
    const auto& pts = op_.point_coords();
    for (std::size_t j = 0; j < lu.points(); ++j) {
      const auto aj = eval_a(spec_.law, pts[j], t_, lu.at(j));
      std::copy(aj.begin(), aj.end(), a.at(j).begin());
    }
    const Field div = op_.apply_adjoint(a);
    const auto& interior = op_.interior_nodes();
    Eigen::VectorXd grad(static_cast<Eigen::Index>(interior.size()));
    for (std::size_t m = 0; m < interior.size(); ++m) {
      const auto i = interior[m];
      grad[static_cast<Eigen::Index>(m)] = (w[i] - w_prev_[i]) / dt_ + div[i] + eval_b(spec_.law, w[i]) - f_[i];
    }
    return grad;
  }

  //! Natural residual |w - P(w - H^{-1} grad J)|_H.
  double kkt_residual(const Field& w) const {
    const Eigen::VectorXd x = interior_values(w);
    const Eigen::VectorXd step = projector_.solve_gram(gradient(w));
    const Eigen::VectorXd y = projector_.project(x - step, g_);
    return h_norm(x - y);
  }

  //! Largest value of |Lw| / g over the evaluation points.
  double feasibility_ratio(const Field& w) const {
    const auto lu = op_.apply(w);
    double m = 0.0;
    for (std::size_t j = 0; j < lu.points(); ++j) m = std::max(m, lu.magnitude(j) / g_[j]);
    return m;
  }

  OracleResult solve(const Field& start) const {
    OracleResult out;
    Field w = to_field(projector_.project(interior_values(start), g_));
    double jw = energy(w);
    out.energies.push_back(jw);
    double tau = opts_.initial_step;
    int stalled = 0;
    double best_natural = std::numeric_limits<double>::infinity();
    for (int it = 0; it < opts_.max_iterations; ++it) {
      const Eigen::VectorXd x = interior_values(w);
      const Eigen::VectorXd grad = gradient(w);
      const Eigen::VectorXd dir = projector_.solve_gram(grad);
      // Energy differences below this are round-off.
      const double slack = 1e-14 * std::max(1.0, std::abs(jw));
      Field trial;
      double jt = 0.0;
      Eigen::VectorXd y;
      for (int bt = 0; bt < 60; ++bt) {
        y = projector_.project(x - tau * dir, g_);
        trial = to_field(y);
        jt = energy(trial);
        const Eigen::VectorXd s = y - x;
        const double ss = h_norm_sq(s);
        const double model = jw + grad.dot(s) * spec_.grid.cell_volume() + ss / (2.0 * tau);
        // Curvature test from gradient differences; it stays meaningful once
        // energy differences are at round-off level.
        const double curvature = spec_.grid.cell_volume() * s.dot(gradient(trial) - grad);
        if (jt <= model + slack && curvature <= ss / tau) break;
        tau *= 0.5;
      }
      // Upper bound of the natural residual from the gradient mapping at step tau.
      const double natural = h_norm(y - x) / std::min(tau, 1.0);
      if (natural < 0.999 * best_natural) {
        best_natural = natural;
        stalled = 0;
      } else {
        ++stalled;
      }
      w = std::move(trial);
      jw = jt;
      out.energies.push_back(jw);
      out.iterations = it + 1;
      if (natural <= 0.1 * opts_.tolerance || stalled >= opts_.stagnation_window) break;
      tau *= 1.5;
    }
    out.kkt_residual = kkt_residual(w);
    out.converged = out.kkt_residual <= opts_.tolerance;
    out.solution = std::move(w);
    return out;
  }

private:
  Eigen::VectorXd interior_values(const Field& w) const {
    const auto& interior = op_.interior_nodes();
    Eigen::VectorXd x(static_cast<Eigen::Index>(interior.size()));
    for (std::size_t m = 0; m < interior.size(); ++m) x[static_cast<Eigen::Index>(m)] = w[interior[m]];
    return x;
  }

  Field to_field(const Eigen::VectorXd& x) const {
    Field w(spec_.grid.size());
    const auto& interior = op_.interior_nodes();
    for (std::size_t m = 0; m < interior.size(); ++m) w[interior[m]] = x[static_cast<Eigen::Index>(m)];
    return w;
  }

  double h_norm_sq(const Eigen::VectorXd& v) const {
    return spec_.grid.cell_volume() * v.dot(projector_.gram() * v);
  }
  double h_norm(const Eigen::VectorXd& v) const { return std::sqrt(std::max(h_norm_sq(v), 0.0)); }

  const ProblemSpec& spec_;
  LinearOperatorL op_;
  ConstraintProjector projector_;
  const Field& w_prev_;
  const ConstraintField& g_;
  double t_;
  double dt_;
  OracleOptions opts_;
  Field f_;
};

inline OracleResult oracle_vi_step(const Field& w_prev, const ConstraintField& g, const ProblemSpec& spec, double t,
                                   double dt, const OracleOptions& opts = {}) {
  VIStepOracle oracle(spec, w_prev, g, t, dt, opts);
  return oracle.solve(w_prev);
}

struct SteadyStateResult {
  Field profile;
  int steps = 0;
  bool converged = false;
  double last_change = 0.0;
};

//! Repeats oracle steps of size dt with source and bound frozen at t until max |w_{k+1} - w_k| < tol.
inline SteadyStateResult oracle_steady_state(const ProblemSpec& spec, const ConstraintField& g, double t, double dt,
                                             int max_steps, double tol, const OracleOptions& opts = {}) {
  SteadyStateResult out;
  Field w = spec.initial;
  for (int k = 0; k < max_steps; ++k) {
    VIStepOracle oracle(spec, w, g, t, dt, opts);
    Field next = oracle.solve(w).solution;
    out.last_change = max_abs_difference(next, w);
    w = std::move(next);
    out.steps = k + 1;
    if (out.last_change < tol) {
      out.converged = true;
      break;
    }
  }
  out.profile = std::move(w);
  return out;
}

/// Maximiser of int f w over {|w'| <= g, w(0) = w(1) = 0} on a 1D grid,
/// built from its optimality conditions: increments equal g sign(R_e - c)
/// where R_e is the source mass beyond edge e and the multiplier c is found
/// by bisection so that the increments sum to zero. This is the steady state
/// of the degenerate (alpha = 0) model with a nonnegative source.
inline Field kkt_steady_profile_1d(const Grid& grid, const Field& f, const ConstraintField& g) {
  if (grid.dim() != 1) throw DimensionError("kkt_steady_profile_1d needs a 1D grid");
  const int n = grid.nodes(0);
  detail::require_size(g.size(), static_cast<std::size_t>(n - 1), "kkt_steady_profile_1d");
  std::vector<double> tail(static_cast<std::size_t>(n - 1), 0.0);
  double acc = 0.0;
  for (int e = n - 2; e >= 0; --e) {
    acc += f[static_cast<std::size_t>(e + 1)] * (e + 1 < n - 1 ? 1.0 : 0.0);
    tail[static_cast<std::size_t>(e)] = acc;
  }
  auto increments = [&](double c) {
    std::vector<double> q(tail.size());
    for (std::size_t e = 0; e < q.size(); ++e) q[e] = tail[e] > c ? g[e] : (tail[e] < c ? -g[e] : 0.0);
    return q;
  };
  auto total = [&](double c) {
    double s = 0.0;
    for (double v : increments(c)) s += v;
    return s;
  };
  double lo = *std::min_element(tail.begin(), tail.end()) - 1.0;
  double hi = *std::max_element(tail.begin(), tail.end()) + 1.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    (total(mid) > 0.0 ? lo : hi) = mid;
  }
  // At the multiplier the sign pattern is fixed up to the edges with
  // R_e == c; a single partially used edge closes the balance.
  auto q = increments(hi);
  double defect = 0.0;
  for (double v : q) defect += v;
  if (defect != 0.0) {
    auto ql = increments(lo);
    for (std::size_t e = 0; e < q.size(); ++e)
      if (q[e] != ql[e]) {
        q[e] -= defect;
        break;
      }
  }
  Field w(grid.size());
  const double h = grid.spacing(0);
  for (int i = 1; i < n; ++i)
    w[static_cast<std::size_t>(i)] = w[static_cast<std::size_t>(i - 1)] + h * q[static_cast<std::size_t>(i - 1)];
  w[static_cast<std::size_t>(n - 1)] = 0.0;
  return w;
}

// ---------------------------------------------------------------------------
// Exponential time averaging v_n + (1/n) d_t v_n = v, v_n(0) = z.
// ---------------------------------------------------------------------------

namespace detail {

/// Weights of one interval for piecewise-linear input:
///   v_n(t+dt) = decay v_n(t) + w_left v(t) + w_right v(t+dt).
struct AveragingWeights {
  double decay;
  double left;
  double right;
};

inline AveragingWeights averaging_weights(double n, double dt) {
  const double a = n * dt;
  const double decay = std::exp(-a);
  const double one_minus = -std::expm1(-a);
  // (1 - e^{-a} - a e^{-a}) / a, by series for small a
  double tail;
  if (a < 1e-3)
    tail = a / 2.0 - a * a / 3.0 + a * a * a / 8.0;
  else
    tail = (one_minus - a * decay) / a;
  return {decay, tail, one_minus - tail};
}

template <typename Vec>
std::vector<Vec> exponential_average(const std::vector<Vec>& v, const Vec& z, double n, double dt) {
  const auto w = averaging_weights(n, dt);
  std::vector<Vec> out;
  out.reserve(v.size());
  out.push_back(z);
  for (std::size_t k = 0; k + 1 < v.size(); ++k) {
    Vec next = out.back();
    for (std::size_t i = 0; i < next.size(); ++i)
      next[i] = w.decay * out.back()[i] + w.left * v[k][i] + w.right * v[k + 1][i];
    out.push_back(std::move(next));
  }
  return out;
}

}  // namespace detail

/// v_n(t) = e^{-nt} int_0^t v(tau) n e^{n tau} dtau + e^{-nt} z, integrated
/// exactly for v piecewise linear in time.
inline Trajectory regularizing_sequence(const Trajectory& v, const Field& z, double n, double dt) {
  if (!(n > 0.0)) throw ParameterError("regularizing_sequence: n must be positive");
  if (v.fields.empty()) throw DimensionError("regularizing_sequence: empty trajectory");
  detail::require_size(z.size(), v.fields.front().size(), "regularizing_sequence");
  std::vector<std::vector<double>> raw;
  for (const auto& f : v.fields) raw.push_back(f.values);
  Trajectory out;
  for (auto& r : detail::exponential_average(raw, z.values, n, dt)) out.fields.emplace_back(std::move(r));
  return out;
}

/// The same averaging applied to the bounds, started from G(0):
///   g_n(t) = e^{-nt} int_0^t G n e^{n tau} dtau + e^{-nt} G(0).
inline std::vector<ConstraintField> constraint_transfer(const std::vector<ConstraintField>& g, double n, double dt) {
  if (!(n > 0.0)) throw ParameterError("constraint_transfer: n must be positive");
  if (g.empty()) throw DimensionError("constraint_transfer: empty constraint history");
  std::vector<std::vector<double>> raw;
  for (const auto& c : g) {
    detail::require_size(c.size(), g.front().size(), "constraint_transfer");
    raw.push_back(c.values);
  }
  std::vector<ConstraintField> out;
  for (auto& r : detail::exponential_average(raw, g.front().values, n, dt))
    out.push_back(ConstraintField{std::move(r), g.front().lower, g.front().upper, 0});
  return out;
}

//! max over (k, j) of |L v_n| - g_n; nonpositive when v_n is feasible for g_n.
inline double transfer_excess(const Trajectory& vn, const std::vector<ConstraintField>& gn, const LinearOperatorL& op) {
  detail::require_size(vn.fields.size(), gn.size(), "transfer_excess");
  double worst = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < gn.size(); ++k) {
    const auto lu = op.apply(vn.fields[k]);
    detail::require_size(gn[k].size(), lu.points(), "transfer_excess");
    for (std::size_t j = 0; j < lu.points(); ++j) worst = std::max(worst, lu.magnitude(j) - gn[k][j]);
  }
  return worst;
}

// ---------------------------------------------------------------------------
// Continuous-dependence harness.
// ---------------------------------------------------------------------------

struct StabilityReport {
  //! max_k |w1(t_k) - w2(t_k)|^2
  double lhs = 0.0;
  //! |f1 - f2|^2 in L2(Q_T)
  double source_term = 0.0;
  //! |w1(0) - w2(0)|^2
  double initial_term = 0.0;
  //! |g1 - g2| in L1(0,T; Linf)
  double constraint_term = 0.0;
  double ratio = 0.0;
  //! |L(w1 - w2)|_{L^p(Q_T)}^{max(2,p)}, filled for strongly monotone laws.
  std::optional<double> energy_distance;
  Trajectory first;
  Trajectory second;
};

/// Solves two Given-constraint problems on one discretisation and measures
/// both sides of the continuous-dependence estimate.
inline StabilityReport stability_experiment(const ProblemSpec& first, const ProblemSpec& second,
                                            const ContinuationSchedule& schedule, const NewtonOptions& opts) {
  if (!(first.grid == second.grid) || first.time.steps() != second.time.steps() ||
      first.time.final_time() != second.time.final_time() || first.operator_kind != second.operator_kind)
    throw DimensionError("stability_experiment: the problems use different discretisations");
  if (!first.constraint.is_given() || !second.constraint.is_given())
    throw UnsupportedStructure("stability_experiment needs Given constraints");
  first.validate();
  second.validate();
  const auto op = first.make_operator();
  const double dt = first.time.dt();
  const auto g1 = constraint_along(first.constraint, op, constant_trajectory(first).fields, first.time);
  const auto g2 = constraint_along(second.constraint, op, constant_trajectory(second).fields, second.time);

  StabilityReport rep;
  rep.first = continuation_solve(first, g1, schedule, opts).trajectory;
  rep.second = continuation_solve(second, g2, schedule, opts).trajectory;

  for (std::size_t k = 0; k < rep.first.fields.size(); ++k) {
    const double d = distance_l2(rep.first.fields[k], rep.second.fields[k], first.grid);
    rep.lhs = std::max(rep.lhs, d * d);
  }
  const double d0 = distance_l2(first.initial, second.initial, first.grid);
  rep.initial_term = d0 * d0;
  for (int k = 1; k <= first.time.steps(); ++k) {
    const double t = first.time.time(k);
    const double df = distance_l2(first.sample_source(t), second.sample_source(t), first.grid);
    rep.source_term += dt * df * df;
    double gmax = 0.0;
    for (std::size_t j = 0; j < g1[static_cast<std::size_t>(k)].size(); ++j)
      gmax = std::max(gmax, std::abs(g1[static_cast<std::size_t>(k)][j] - g2[static_cast<std::size_t>(k)][j]));
    rep.constraint_term += dt * gmax;
  }
  const double rhs = rep.source_term + rep.initial_term + rep.constraint_term;
  rep.ratio = rhs > 0.0 ? rep.lhs / rhs : 0.0;

  if (first.law.has_potential() && first.law.alpha_sup > 0.0) {
    std::vector<EdgeField> slices;
    for (std::size_t k = 1; k < rep.first.fields.size(); ++k) {
      Field diff(first.grid.size());
      for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = rep.first.fields[k][i] - rep.second.fields[k][i];
      slices.push_back(op.apply(diff));
    }
    const double p = first.law.p;
    rep.energy_distance = std::pow(norm_lp_spacetime(slices, p, dt, first.grid), std::max(2.0, p));
  }
  return rep;
}

}  // namespace penqvi
