#include <gtest/gtest.h>

#include <numbers>
#include <random>

#include "penqvi/constraints.hpp"

using namespace penqvi;

namespace {

const double pi = std::numbers::pi;

CoupledHeatConstraint quiet_heat() {
  CoupledHeatConstraint h;
  h.compose = [](double z) { return 1.0 + z; };
  return h;
}

MemoryKernelConstraint kernel(double k, std::function<double(const Point&, double, double)> compose) {
  return {[k](double, double) { return k; }, std::move(compose)};
}

// Runs the heat equation alone from `zeta0` for `steps` steps of size dt.
Field run_heat(const CoupledHeatConstraint& heat, const LinearOperatorL& op, Field zeta, int steps, double dt) {
  const Field zero(op.grid().size());
  const auto lu = op.apply(zero);
  for (int k = 0; k < steps; ++k) zeta = step_coupled_heat(heat, op, zeta, zero, lu, k * dt, dt);
  return zeta;
}

}  // namespace

TEST(EvalGiven, SamplesAtEvaluationPoints) {
  LinearOperatorL op(OperatorKind::Gradient1D, Grid::line(1.0, 3));
  auto one = eval_given([](const Point&, double) { return 1.0; }, op, 0.0, 0.5, 3.0);
  for (double v : one.values) EXPECT_EQ(v, 1.0);
  auto lin_t = eval_given([](const Point&, double t) { return 1.0 + t; }, op, 0.5, 0.5, 3.0);
  for (double v : lin_t.values) EXPECT_EQ(v, 1.5);
  auto lin_x = eval_given([](const Point& x, double) { return 1.0 + x[0]; }, op, 0.0, 0.5, 3.0);
  EXPECT_DOUBLE_EQ(lin_x[0], 1.25);
  EXPECT_DOUBLE_EQ(lin_x[1], 1.75);
}

TEST(EvalGiven, OutOfBoundsIsAnError) {
  LinearOperatorL op(OperatorKind::Gradient1D, Grid::line(1.0, 5));
  EXPECT_THROW(eval_given([](const Point&, double) { return 0.1; }, op, 0.0, 0.5, 3.0), ConstraintBoundsError);
  EXPECT_THROW(eval_given([](const Point& x, double) { return 1.0 + 10 * x[0]; }, op, 0.0, 0.5, 3.0),
               ConstraintBoundsError);
}

TEST(ConstraintOperator, BoundValidation) {
  EXPECT_THROW(ConstraintOperator::constant(0.0), ParameterError);
  EXPECT_THROW(ConstraintOperator(GivenConstraint{}, 2.0, 1.0), ParameterError);
}

TEST(EvalMemoryKernel, ZeroHistoryOrZeroKernel) {
  LinearOperatorL op(OperatorKind::Gradient1D, Grid::line(1.0, 9));
  auto compose = [](const Point& x, double t, double z) { return 1.0 + x[0] + t + z; };
  std::vector<Field> zeros(5, Field(9));
  auto g = eval_memory_kernel(kernel(1.0, compose), op, zeros, 0.1, 0.5, 3.0);
  for (std::size_t j = 0; j < g.size(); ++j) EXPECT_DOUBLE_EQ(g[j], 1.0 + op.point_coords()[j][0] + 0.4);

  std::vector<Field> ones(5, Field(9, 1.0));
  auto h = eval_memory_kernel(kernel(0.0, compose), op, ones, 0.1, 0.5, 3.0);
  for (std::size_t j = 0; j < h.size(); ++j) EXPECT_DOUBLE_EQ(h[j], g[j]);
  EXPECT_THROW(eval_memory_kernel(kernel(1.0, compose), op, {}, 0.1, 0.5, 3.0), DimensionError);
}

TEST(EvalMemoryKernel, UnitIntegral) {
  LinearOperatorL op(OperatorKind::Gradient1D, Grid::line(1.0, 5));
  const double dt = 1e-3;
  std::vector<Field> ones(1001, Field(5, 1.0));
  auto g = eval_memory_kernel(kernel(1.0, [](const Point&, double, double z) { return 1.0 + z; }), op, ones, dt, 0.5,
                              3.0);
  for (double v : g.values) EXPECT_NEAR(v, 2.0, 1e-12);
}

TEST(EvalMemoryKernel, MatchesRiemannOracleForVaryingKernel) {
  // zeta(t) = int_0^t s e^{-(t-s)} ds for v(s) = s; trapezoid error is O(dt^2).
  LinearOperatorL op(OperatorKind::Gradient1D, Grid::line(1.0, 5));
  const double dt = 1e-3;
  std::vector<Field> hist;
  for (int m = 0; m <= 1000; ++m) hist.emplace_back(5, m * dt);
  MemoryKernelConstraint mk{[](double t, double s) { return std::exp(-(t - s)); },
                            [](const Point&, double, double z) { return 1.0 + z; }};
  auto g = eval_memory_kernel(mk, op, hist, dt, 0.5, 3.0);
  const double exact = 1.0 + (1.0 - 1.0 + std::exp(-1.0));  // t - 1 + e^{-t} at t = 1
  for (double v : g.values) EXPECT_NEAR(v, exact, 1e-6);
}

TEST(EvalMemoryKernel, ClampingIsCounted) {
  LinearOperatorL op(OperatorKind::Gradient1D, Grid::line(1.0, 5));
  std::vector<Field> tens(3, Field(5, 10.0));
  auto g = eval_memory_kernel(kernel(1.0, [](const Point&, double, double z) { return 1.0 + z; }), op, tens, 1.0,
                              0.5, 3.0);
  for (double v : g.values) EXPECT_EQ(v, 3.0);
  EXPECT_EQ(g.clamped, 4);
}

TEST(EvalMemoryKernel, LipschitzInHistory) {
  LinearOperatorL op(OperatorKind::Gradient1D, Grid::line(1.0, 9));
  const double dt = 0.05, K = 0.8, lip_g = 0.5;
  auto mk = kernel(K, [lip_g](const Point&, double, double z) { return 1.5 + lip_g * std::sin(z); });
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<Field> a, b;
    double sup = 0.0;
    for (int m = 0; m <= 20; ++m) {
      Field fa(9), fb(9);
      for (std::size_t i = 1; i < 8; ++i) {
        fa[i] = u(rng);
        fb[i] = fa[i] + 1e-3 * u(rng);
        sup = std::max(sup, std::abs(fa[i] - fb[i]));
      }
      a.push_back(fa);
      b.push_back(fb);
    }
    const auto ga = eval_memory_kernel(mk, op, a, dt, 0.5, 3.0);
    const auto gb = eval_memory_kernel(mk, op, b, dt, 0.5, 3.0);
    for (std::size_t j = 0; j < ga.size(); ++j) EXPECT_LE(std::abs(ga[j] - gb[j]), lip_g * K * 1.0 * sup + 1e-15);
  }
}

TEST(StepCoupledHeat, ZeroDataStaysZero) {
  LinearOperatorL op(OperatorKind::Gradient1D, Grid::line(1.0, 11));
  const Field z = run_heat(quiet_heat(), op, Field(11), 10, 0.1);
  for (double v : z.values) EXPECT_EQ(v, 0.0);
}

TEST(StepCoupledHeat, ManufacturedSolutionFirstOrderInTime) {
  const int n = 201;
  LinearOperatorL op(OperatorKind::Gradient1D, Grid::line(1.0, n));
  Field z0(n);
  for (int i = 1; i + 1 < n; ++i) z0[static_cast<std::size_t>(i)] = std::sin(pi * op.grid().coord(static_cast<std::size_t>(i))[0]);
  const double T = 0.1;
  std::vector<double> errors;
  for (double dt : {1e-2, 5e-3, 2.5e-3}) {
    const Field z = run_heat(quiet_heat(), op, z0, static_cast<int>(std::lround(T / dt)), dt);
    double err = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i)
      err = std::max(err, std::abs(z[i] - std::exp(-pi * pi * T) * std::sin(pi * op.grid().coord(i)[0])));
    const double h = op.grid().spacing(0);
    EXPECT_LE(err, 3.0 * (dt + h * h));
    errors.push_back(err);
  }
  for (std::size_t k = 1; k < errors.size(); ++k) {
    const double rate = errors[k - 1] / errors[k];
    EXPECT_GT(rate, 1.7);
    EXPECT_LT(rate, 2.3);
  }
}

TEST(StepCoupledHeat, DiscreteMaximumPrinciple) {
  std::mt19937 rng(17);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (const auto& grid : {Grid::line(1.0, 17), Grid::rectangle(1.0, 1.0, 7, 6)}) {
    const auto kind = grid.dim() == 1 ? OperatorKind::Gradient1D : OperatorKind::Gradient2D;
    LinearOperatorL op(kind, grid);
    for (int trial = 0; trial < 10; ++trial) {
      auto heat = quiet_heat();
      const double a = u(rng), b = u(rng);
      heat.source = [a, b](const Point& x, double t) { return a * (1.0 + std::sin(7.0 * x[0] + t)) + b; };
      heat.psi = u(rng);
      heat.eta = u(rng);
      Field v(grid.size()), zeta(grid.size());
      for (std::size_t i = 0; i < grid.size(); ++i)
        if (!grid.is_boundary(i)) {
          v[i] = u(rng);
          zeta[i] = u(rng);
        }
      for (int k = 0; k < 5; ++k) {
        zeta = step_coupled_heat(heat, op, zeta, v, op.apply(v), 0.1 * k, 0.1);
        for (double z : zeta.values) EXPECT_GE(z, 0.0);
      }
    }
  }
}

TEST(StepCoupledHeat, UnconditionallyStable) {
  LinearOperatorL op(OperatorKind::Gradient1D, Grid::line(1.0, 33));
  Field z0(33);
  for (std::size_t i = 1; i < 32; ++i) z0[i] = (i % 2 ? 1.0 : -1.0);
  const double initial = norm_l2(z0, op.grid());
  for (double dt : {1e-1, 1e-2, 1e-3}) {
    Field z = z0;
    for (int k = 0; k < 50; ++k) {
      z = run_heat(quiet_heat(), op, z, 1, dt);
      EXPECT_LE(norm_l2(z, op.grid()), initial * (1 + 1e-12));
    }
  }
}

TEST(EvalCoupled, CompositionAndClamp) {
  LinearOperatorL op(OperatorKind::Gradient1D, Grid::line(1.0, 9));
  auto heat = quiet_heat();
  auto g0 = eval_coupled(heat, op, Field(9), 0.5, 3.0);
  for (double v : g0.values) EXPECT_EQ(v, 1.0);
  auto g10 = eval_coupled(heat, op, Field(9, 10.0), 0.5, 3.0);
  for (double v : g10.values) EXPECT_EQ(v, 3.0);
  EXPECT_EQ(g10.clamped, 8);
  heat.compose = [](double z) { return 1.0 + z * z; };
  auto gq = eval_coupled(heat, op, Field(9, 0.5), 0.5, 3.0);
  for (double v : gq.values) EXPECT_DOUBLE_EQ(v, 1.25);
}

TEST(ConstraintAlong, BoundsHoldEverywhere) {
  LinearOperatorL op(OperatorKind::Gradient1D, Grid::line(1.0, 9));
  TimeGrid time(1.0, 10);
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  std::vector<Field> phi;
  for (int k = 0; k <= 10; ++k) {
    Field f(9);
    for (std::size_t i = 1; i < 8; ++i) f[i] = u(rng);
    phi.push_back(f);
  }
  auto heat = quiet_heat();
  heat.psi = 3.0;
  heat.eta = 1.0;
  for (const auto& cop : {ConstraintOperator(kernel(2.0, [](const Point&, double, double z) { return 1.0 + z; }), 0.5, 3.0),
                          ConstraintOperator(heat, 0.5, 3.0)}) {
    for (const auto& g : constraint_along(cop, op, phi, time))
      for (double v : g.values) {
        EXPECT_GE(v, 0.5);
        EXPECT_LE(v, 3.0);
      }
  }
}

TEST(ConstraintAlong, Causality) {
  LinearOperatorL op(OperatorKind::Gradient1D, Grid::line(1.0, 9));
  TimeGrid time(1.0, 8);
  std::vector<Field> phi(9, Field(9));
  for (int k = 0; k <= 8; ++k)
    for (std::size_t i = 1; i < 8; ++i) phi[static_cast<std::size_t>(k)][i] = 0.1 * k * std::sin(static_cast<double>(i));
  auto heat = quiet_heat();
  heat.psi = 1.0;
  heat.eta = 0.5;
  for (const auto& cop :
       {ConstraintOperator(kernel(1.0, [](const Point&, double, double z) { return 1.0 + z; }), 0.5, 3.0),
        ConstraintOperator(heat, 0.5, 3.0)}) {
    const auto base = constraint_along(cop, op, phi, time);
    for (std::size_t cut = 1; cut <= 8; ++cut) {
      auto changed = phi;
      for (std::size_t k = cut; k <= 8; ++k)
        for (std::size_t i = 1; i < 8; ++i) changed[k][i] += 1.0;
      const auto other = constraint_along(cop, op, changed, time);
      // the heat source at t_k reads phi(t_k), so G(t_k) sees phi up to t_{k-1}
      const std::size_t unaffected = cop.heat() ? cut + 1 : cut;
      for (std::size_t k = 0; k < unaffected && k < base.size(); ++k) EXPECT_EQ(base[k].values, other[k].values);
    }
  }
}

TEST(ConstraintAtStart, MatchesFirstEntryOfConstraintAlong) {
  LinearOperatorL op(OperatorKind::Gradient1D, Grid::line(1.0, 9));
  TimeGrid time(1.0, 4);
  std::vector<Field> phi(5, Field(9, 0.0));
  auto cop = ConstraintOperator(kernel(1.0, [](const Point& x, double, double z) { return 1.0 + x[0] + z; }), 0.5, 3.0);
  EXPECT_EQ(constraint_at_start(cop, op, phi[0]).values, constraint_along(cop, op, phi, time)[0].values);
}
