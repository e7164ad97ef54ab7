#include <gtest/gtest.h>

#include "penqvi/qvi.hpp"
#include "support.hpp"

using namespace penqvi;
using namespace testing_support;

namespace {

PenaltyParams params(double eps, double delta) {
  PenaltyParams p;
  p.epsilon = eps;
  p.delta = delta;
  return p;
}

ProblemSpec memory_problem(double K, double slope) {
  auto spec = line_problem(17, 0.5, 20, 2.0, 1.0, 10.0, 1.0);
  spec.constraint = ConstraintOperator(
      MemoryKernelConstraint{[K](double, double) { return K; },
                             [slope](const Point&, double, double z) { return 1.0 + slope * z; }},
      0.5, 2.0);
  return spec;
}

Trajectory perturbed(const Trajectory& t, const Grid& grid, double amount) {
  Trajectory out = t;
  for (auto& f : out.fields)
    for (std::size_t i = 0; i < f.size(); ++i)
      if (!grid.is_boundary(i)) f[i] += amount * std::sin(3.0 * grid.coord(i)[0]);
  return out;
}

}  // namespace

TEST(EvaluateS, ConstantForGivenConstraint) {
  auto spec = line_problem(17, 0.5, 20, 2.0, 1.0, 10.0, 1.0);
  const auto phi1 = constant_trajectory(spec);
  const auto phi2 = perturbed(phi1, spec.grid, 0.3);
  const auto a = evaluate_S(spec, phi1, params(0.2, 1e-3), NewtonOptions{});
  const auto b = evaluate_S(spec, phi2, params(0.2, 1e-3), NewtonOptions{});
  for (std::size_t k = 0; k < a.fields.size(); ++k) EXPECT_EQ(a.fields[k].values, b.fields[k].values);
}

TEST(EvaluateS, ZeroKernelIsTheVariationalSolve) {
  auto spec = memory_problem(0.0, 0.5);
  const auto phi = perturbed(constant_trajectory(spec), spec.grid, 0.2);
  const auto s = evaluate_S(spec, phi, params(0.2, 1e-3), NewtonOptions{});
  const auto vi = solve_penalized_evolution(spec, constant_bounds(spec, 1.0), params(0.2, 1e-3), NewtonOptions{});
  for (std::size_t k = 0; k < s.fields.size(); ++k) EXPECT_EQ(s.fields[k].values, vi.fields[k].values);
}

TEST(EvaluateS, LipschitzProbe) {
  auto spec = memory_problem(1.0, 0.5);
  const auto pp = params(0.2, 1e-3);
  const auto base = evaluate_S(spec, constant_trajectory(spec), pp, NewtonOptions{});
  const auto s0 = evaluate_S(spec, base, pp, NewtonOptions{});
  std::vector<double> moved;
  for (double eta : {1e-3, 5e-4, 2.5e-4}) {
    auto phi = perturbed(base, spec.grid, 1.0);
    const double scale = eta / distance_spacetime(phi, base, spec);
    phi = perturbed(base, spec.grid, scale);
    const auto s1 = evaluate_S(spec, phi, pp, NewtonOptions{});
    moved.push_back(distance_spacetime(s1, s0, spec) / eta);
  }
  for (double m : moved) EXPECT_LT(m, 10.0);
  EXPECT_NEAR(moved[2] / moved[0], 1.0, 0.1);
}

TEST(QviFixedPoint, GivenConstraintTakesOneIteration) {
  auto spec = line_problem(17, 0.5, 20, 2.0, 1.0, 10.0, 1.0);
  const auto fp = qvi_fixed_point(spec, params(0.2, 1e-3), NewtonOptions{}, OuterOptions{}, constant_trajectory(spec));
  EXPECT_TRUE(fp.converged);
  EXPECT_EQ(fp.iterations, 1);
  EXPECT_LE(fp.verification_residual, 1e-12);
}

TEST(QviFixedPoint, ZeroKernelConfirmsOnSecondIteration) {
  auto spec = memory_problem(0.0, 0.5);
  const auto fp = qvi_fixed_point(spec, params(0.2, 1e-3), NewtonOptions{}, OuterOptions{}, constant_trajectory(spec));
  EXPECT_TRUE(fp.converged);
  EXPECT_LE(fp.iterations, 2);
}

TEST(QviFixedPoint, GeometricDecreaseInContractiveRegime) {
  auto spec = memory_problem(1.0, 0.5);
  const auto fp = qvi_fixed_point(spec, params(0.1, 1e-4), NewtonOptions{}, OuterOptions{}, constant_trajectory(spec));
  ASSERT_TRUE(fp.converged);
  EXPECT_LT(fp.residuals.back(), 1e-8);
  EXPECT_LE(fp.verification_residual, 2e-8);
  ASSERT_GE(fp.residuals.size(), 4u);
  std::vector<double> ratios;
  for (std::size_t k = 1; k < fp.residuals.size(); ++k) {
    if (fp.residuals[k] < 1e-12) break;
    ratios.push_back(fp.residuals[k] / fp.residuals[k - 1]);
  }
  for (double r : ratios) EXPECT_LT(r, 0.5);
}

TEST(QviFixedPoint, MoreOuterIterationsDoNotMoveTheAnswer) {
  auto spec = memory_problem(1.0, 0.5);
  OuterOptions a, b;
  b.max_iterations = 2 * a.max_iterations;
  const auto pp = params(0.1, 1e-4);
  const auto fa = qvi_fixed_point(spec, pp, NewtonOptions{}, a, constant_trajectory(spec));
  const auto fb = qvi_fixed_point(spec, pp, NewtonOptions{}, b, constant_trajectory(spec));
  EXPECT_LE(distance_spacetime(fa.trajectory, fb.trajectory, spec), a.tolerance);
}

TEST(QviFixedPoint, ReportsNonConvergence) {
  auto spec = memory_problem(1.0, 0.5);
  OuterOptions outer;
  outer.max_iterations = 2;
  const auto fp = qvi_fixed_point(spec, params(0.1, 1e-4), NewtonOptions{}, outer, constant_trajectory(spec));
  EXPECT_FALSE(fp.converged);
  EXPECT_EQ(fp.residuals.size(), 2u);
}

TEST(QviFixedPoint, RelaxationStillConverges) {
  auto spec = memory_problem(1.0, 0.5);
  OuterOptions outer;
  outer.relaxation = 0.7;
  const auto fp = qvi_fixed_point(spec, params(0.1, 1e-4), NewtonOptions{}, outer, constant_trajectory(spec));
  EXPECT_TRUE(fp.converged);
  EXPECT_THROW(
      {
        outer.relaxation = 0.0;
        qvi_fixed_point(spec, params(0.1, 1e-4), NewtonOptions{}, outer, constant_trajectory(spec));
      },
      ParameterError);
}

TEST(QviSolve, GivenConstraintMatchesContinuationBitForBit) {
  auto spec = line_problem(17, 0.5, 20, 2.0, 1.0, 10.0, 1.0);
  ContinuationSchedule sched;
  sched.deltas = {1e-2, 1e-4};
  const auto q = qvi_solve(spec, sched, NewtonOptions{}, OuterOptions{});
  const auto c = continuation_solve(spec, constant_bounds(spec, 1.0), sched, NewtonOptions{});
  ASSERT_TRUE(q.converged);
  ASSERT_EQ(q.stages.size(), c.stages.size());
  for (std::size_t k = 0; k < c.trajectory.fields.size(); ++k)
    EXPECT_EQ(q.trajectory.fields[k].values, c.trajectory.fields[k].values);
  for (std::size_t s = 0; s < c.stages.size(); ++s) EXPECT_EQ(q.stages[s].violation, c.stages[s].violation);
}

TEST(QviSolve, MemoryScenarioFeasibilityAcrossStages) {
  auto spec = memory_problem(1.0, 0.5);
  ContinuationSchedule sched;
  sched.deltas = {1e-4};
  const auto q = qvi_solve(spec, sched, NewtonOptions{}, OuterOptions{});
  ASSERT_TRUE(q.converged) << q.failure;
  ASSERT_EQ(q.stages.size(), 4u);
  for (std::size_t s = 1; s < q.stages.size(); ++s) EXPECT_LT(q.stages[s].violation, q.stages[s - 1].violation);
  EXPECT_EQ(q.constraints.size(), q.trajectory.fields.size());
}

TEST(QviSolve, CoupledHeatConstraintRuns) {
  auto spec = line_problem(17, 0.5, 20, 2.0, 1.0, 10.0, 1.0);
  CoupledHeatConstraint heat;
  heat.psi = 1.0;
  heat.eta = 0.2;
  heat.compose = [](double z) { return 1.0 + 0.5 * z; };
  spec.constraint = ConstraintOperator(heat, 0.5, 2.0);
  ContinuationSchedule sched;
  sched.epsilons = {0.4, 0.2};
  sched.deltas = {1e-3};
  const auto q = qvi_solve(spec, sched, NewtonOptions{}, OuterOptions{});
  EXPECT_TRUE(q.converged) << q.failure;
  for (const auto& g : q.constraints)
    for (double v : g.values) {
      EXPECT_GE(v, 0.5);
      EXPECT_LE(v, 2.0);
    }
}

TEST(QviSolve, SolverFailureKeepsPartialResults) {
  auto spec = memory_problem(1.0, 0.5);
  ContinuationSchedule sched;
  sched.epsilons = {0.4, 0.2};
  sched.deltas = {1e-3};
  NewtonOptions opts;
  opts.max_iterations = 1;
  opts.max_halvings = 0;
  const auto q = qvi_solve(spec, sched, opts, OuterOptions{});
  EXPECT_FALSE(q.converged);
  EXPECT_NE(q.failure.find("stage eps="), std::string::npos);
}
