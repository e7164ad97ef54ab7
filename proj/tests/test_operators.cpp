#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <random>

#include "penqvi/operators.hpp"

using namespace penqvi;

namespace {

std::vector<LinearOperatorL> all_operators() {
  return {LinearOperatorL(OperatorKind::Gradient1D, Grid::line(1.0, 13)),
          LinearOperatorL(OperatorKind::Laplacian1D, Grid::line(2.0, 11)),
          LinearOperatorL(OperatorKind::Gradient2D, Grid::rectangle(1.0, 0.5, 7, 5))};
}

Field random_dirichlet(const Grid& g, std::mt19937& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Field f(g.size());
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = g.is_boundary(i) ? 0.0 : u(rng);
  return f;
}

EdgeField random_edge(const LinearOperatorL& op, std::mt19937& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  EdgeField q(op.points(), op.components());
  for (auto& v : q.values) v = u(rng);
  return q;
}

double weighted_dot(std::span<const double> a, std::span<const double> b, double w) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return w * s;
}

// Dense matrix of L assembled column by column from unit vectors.
Eigen::MatrixXd dense_columns(const LinearOperatorL& op) {
  const auto n = op.grid().size();
  Eigen::MatrixXd m(static_cast<Eigen::Index>(op.points() * op.components()), static_cast<Eigen::Index>(n));
  for (std::size_t c = 0; c < n; ++c) {
    Field e(n);
    e[c] = 1.0;
    const auto col = op.apply(e);
    for (std::size_t r = 0; r < col.values.size(); ++r)
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = col.values[r];
  }
  return m;
}

std::vector<double> vec2(double a, double b) { return {a, b}; }

}  // namespace

TEST(ApplyL, ConstantsHaveZeroDerivative) {
  for (const auto& op : all_operators()) {
    const auto lu = op.apply(Field(op.grid().size(), 3.7));
    for (double v : lu.values) EXPECT_NEAR(v, 0.0, 1e-12);
  }
}

TEST(ApplyL, GradientOfLinearFunction) {
  LinearOperatorL op(OperatorKind::Gradient1D, Grid::line(1.0, 9));
  Field u(9);
  for (std::size_t i = 0; i < 9; ++i) u[i] = op.grid().coord(i)[0];
  for (double v : op.apply(u).values) EXPECT_NEAR(v, 1.0, 1e-13);

  LinearOperatorL op2(OperatorKind::Gradient2D, Grid::rectangle(1.0, 2.0, 5, 6));
  Field w(op2.grid().size());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = 2.0 * op2.grid().coord(i)[0] - 3.0 * op2.grid().coord(i)[1];
  const auto lw = op2.apply(w);
  for (std::size_t j = 0; j < lw.points(); ++j) {
    EXPECT_NEAR(lw.at(j)[0], 2.0, 1e-12);
    EXPECT_NEAR(lw.at(j)[1], -3.0, 1e-12);
  }
}

TEST(ApplyL, LaplacianExactOnQuadratics) {
  LinearOperatorL op(OperatorKind::Laplacian1D, Grid::line(1.0, 12));
  Field u(12);
  for (std::size_t i = 0; i < 12; ++i) u[i] = std::pow(op.grid().coord(i)[0], 2);
  const auto lu = op.apply(u);
  EXPECT_EQ(lu.points(), 10u);
  for (double v : lu.values) EXPECT_NEAR(v, 2.0, 1e-11);
}

TEST(ApplyL, EvaluationPointLayout) {
  LinearOperatorL g1(OperatorKind::Gradient1D, Grid::line(1.0, 5));
  EXPECT_EQ(g1.points(), 4u);
  EXPECT_DOUBLE_EQ(g1.point_coords()[1][0], 0.375);
  LinearOperatorL g2(OperatorKind::Gradient2D, Grid::rectangle(1.0, 1.0, 5, 4));
  EXPECT_EQ(g2.points(), 12u);
  EXPECT_EQ(g2.components(), 2);
}

TEST(ApplyL, GridMismatch) {
  LinearOperatorL op(OperatorKind::Gradient1D, Grid::line(1.0, 5));
  EXPECT_THROW(op.apply(Field(6)), DimensionError);
  EXPECT_THROW(op.apply_adjoint(EdgeField(5, 1)), DimensionError);
  EXPECT_THROW(op.apply_adjoint(EdgeField(4, 2)), DimensionError);
  EXPECT_THROW(LinearOperatorL(OperatorKind::Gradient2D, Grid::line(1.0, 5)), DimensionError);
}

TEST(ApplyLAdjoint, ZeroInput) {
  for (const auto& op : all_operators()) {
    const auto r = op.apply_adjoint(EdgeField(op.points(), op.components()));
    for (double v : r.values) EXPECT_EQ(v, 0.0);
  }
}

TEST(ApplyLAdjoint, AdjointIdentityOnRandomPairs) {
  std::mt19937 rng(2024);
  for (const auto& op : all_operators()) {
    const double w = op.grid().cell_volume();
    for (int trial = 0; trial < 100; ++trial) {
      const Field u = random_dirichlet(op.grid(), rng);
      const EdgeField q = random_edge(op, rng);
      const double lhs = weighted_dot(op.apply(u).values, q.values, w);
      const double rhs = weighted_dot(u.values, op.apply_adjoint(q).values, w);
      EXPECT_NEAR(lhs, rhs, 1e-12 * std::max(1.0, std::abs(lhs)));
    }
  }
}

TEST(ApplyLAdjoint, MatchesDenseTransposeOnInteriorRows) {
  std::mt19937 rng(99);
  for (const auto& op : all_operators()) {
    const Eigen::MatrixXd dense = dense_columns(op);
    const EdgeField q = random_edge(op, rng);
    const Eigen::VectorXd expected =
        dense.transpose() * Eigen::Map<const Eigen::VectorXd>(q.values.data(), static_cast<Eigen::Index>(q.values.size()));
    const Field got = op.apply_adjoint(q);
    for (std::size_t i = 0; i < got.size(); ++i) {
      if (op.grid().is_boundary(i))
        EXPECT_EQ(got[i], 0.0);
      else
        EXPECT_NEAR(got[i], expected[static_cast<Eigen::Index>(i)], 1e-12);
    }
  }
}

TEST(ApplyLAdjoint, OneDimensionalGradientIsDiscreteMinusDivergence) {
  std::mt19937 rng(1);
  LinearOperatorL op(OperatorKind::Gradient1D, Grid::line(1.0, 10));
  const double h = op.grid().spacing(0);
  const EdgeField q = random_edge(op, rng);
  const Field d = op.apply_adjoint(q);
  for (std::size_t j = 1; j + 1 < 10; ++j) EXPECT_NEAR(d[j], -(q.values[j] - q.values[j - 1]) / h, 1e-12);
}

TEST(MaterialLaw, EvalAExamples) {
  const auto lin = MaterialLaw::power_law(2.0, 1.0);
  const auto a = eval_a(lin, {0, 0}, 0.0, vec2(3.0, 4.0));
  EXPECT_DOUBLE_EQ(a[0], 3.0);
  EXPECT_DOUBLE_EQ(a[1], 4.0);
  const auto cubic = MaterialLaw::power_law(3.0, 1.0);
  const auto c = eval_a(cubic, {0, 0}, 0.0, vec2(3.0, 4.0));
  EXPECT_NEAR(c[0], 15.0, 1e-12);
  EXPECT_NEAR(c[1], 20.0, 1e-12);
  for (double p : {1.5, 2.0, 3.0}) {
    const auto z = eval_a(MaterialLaw::power_law(p, 1.0), {0, 0}, 0.0, vec2(0.0, 0.0));
    EXPECT_EQ(z[0], 0.0);
    EXPECT_EQ(z[1], 0.0);
  }
}

TEST(MaterialLaw, PotentialExamplesAndGradient) {
  EXPECT_NEAR(eval_potential_A(MaterialLaw::power_law(2.0, 1.0), {0, 0}, 0, vec2(3.0, 4.0)), 12.5, 1e-12);
  EXPECT_EQ(eval_potential_A(MaterialLaw::power_law(3.0, 1.0), {0, 0}, 0, vec2(0.0, 0.0)), 0.0);

  std::mt19937 rng(4);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (double p : {1.5, 2.0, 3.0, 4.0})
    for (double mu : {0.0, 0.1}) {
      auto law = MaterialLaw::power_law(p, 0.7, mu);
      for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> xi{u(rng), u(rng)};
        if (std::hypot(xi[0], xi[1]) < 0.05) continue;
        const auto a = eval_a(law, {0, 0}, 0, xi);
        for (int k = 0; k < 2; ++k) {
          const double h = 1e-6;
          auto xp = xi, xm = xi;
          xp[k] += h;
          xm[k] -= h;
          const double fd = (eval_potential_A(law, {0, 0}, 0, xp) - eval_potential_A(law, {0, 0}, 0, xm)) / (2 * h);
          EXPECT_NEAR(fd, a[k], 1e-6 * std::max(1.0, std::abs(a[k])));
        }
        // 0 <= A <= a* |xi|^p  (mu = 0)
        if (mu == 0.0) {
          const double A = eval_potential_A(law, {0, 0}, 0, xi);
          EXPECT_GE(A, 0.0);
          EXPECT_LE(A, law.a_star() * std::pow(std::hypot(xi[0], xi[1]), p) + 1e-12);
        }
      }
    }
}

TEST(MaterialLaw, EvalBAndMonotonicity) {
  MaterialLaw zero;
  EXPECT_EQ(eval_b(zero, 7.0), 0.0);
  MaterialLaw lin;
  lin.b_kind = BKind::Linear;
  lin.lambda = 2.0;
  EXPECT_EQ(eval_b(lin, -3.0), -6.0);
  EXPECT_EQ(lin.b_star(), 2.0);
  std::mt19937 rng(8);
  std::uniform_real_distribution<double> u(-10.0, 10.0);
  for (int i = 0; i < 1000; ++i) {
    const double a = u(rng), b = u(rng);
    EXPECT_GE((eval_b(lin, a) - eval_b(lin, b)) * (a - b), 0.0);
    EXPECT_LE(std::abs(eval_b(lin, a)), lin.b_star() * std::abs(a) + 1e-12);
  }
}

TEST(MaterialLaw, MonotonicityOfA) {
  std::mt19937 rng(31);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (double p : {1.5, 2.0, 3.0, 4.0}) {
    const auto law = MaterialLaw::power_law(p, 1.0);
    double worst = 0.0;
    for (int i = 0; i < 10000; ++i) {
      std::vector<double> x{u(rng), u(rng)}, y{u(rng), u(rng)};
      const auto ax = eval_a(law, {0, 0}, 0, x), ay = eval_a(law, {0, 0}, 0, y);
      const double v = (ax[0] - ay[0]) * (x[0] - y[0]) + (ax[1] - ay[1]) * (x[1] - y[1]);
      worst = std::min(worst, v);
    }
    EXPECT_GE(worst, -1e-12) << "p = " << p;
  }
}

TEST(MaterialLaw, StrongMonotonicityConstantIsPositive) {
  std::mt19937 rng(32);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (double p : {1.5, 2.0, 3.0, 4.0}) {
    const auto law = MaterialLaw::power_law(p, 1.0);
    double a_lower = std::numeric_limits<double>::infinity();
    for (int i = 0; i < 10000; ++i) {
      std::vector<double> x{u(rng), u(rng)}, y{u(rng), u(rng)};
      const double dx = std::hypot(x[0] - y[0], x[1] - y[1]);
      if (dx < 1e-3) continue;
      const auto ax = eval_a(law, {0, 0}, 0, x), ay = eval_a(law, {0, 0}, 0, y);
      const double v = (ax[0] - ay[0]) * (x[0] - y[0]) + (ax[1] - ay[1]) * (x[1] - y[1]);
      const double denom = p >= 2.0 ? std::pow(dx, p)
                                    : std::pow(std::hypot(x[0], x[1]) + std::hypot(y[0], y[1]), p - 2.0) * dx * dx;
      a_lower = std::min(a_lower, v / denom);
    }
    EXPECT_GT(a_lower, 0.0) << "p = " << p;
  }
}

TEST(MaterialLaw, GrowthBound) {
  std::mt19937 rng(33);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (double p : {1.5, 2.0, 3.0})
    for (double mu : {0.0, 0.2}) {
      auto law = MaterialLaw::power_law(p, 2.5, mu);
      for (int i = 0; i < 1000; ++i) {
        std::vector<double> x{u(rng), u(rng)};
        const auto a = eval_a(law, {0, 0}, 0, x);
        const double bound = law.a_star() * std::pow(x[0] * x[0] + x[1] * x[1] + mu * mu, 0.5 * (p - 1.0));
        EXPECT_LE(std::hypot(a[0], a[1]), bound * (1 + 1e-12));
      }
    }
}

TEST(MaterialLaw, JacobianMatchesFiniteDifferences) {
  std::mt19937 rng(34);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (double p : {1.5, 2.0, 3.0})
    for (double mu : {1e-8, 0.3}) {
      auto law = MaterialLaw::power_law(p, 1.3, mu);
      for (int i = 0; i < 20; ++i) {
        std::vector<double> x{u(rng), u(rng)};
        const auto jac = eval_a_jacobian(law, {0, 0}, 0, x);
        for (int c = 0; c < 2; ++c) {
          auto xp = x, xm = x;
          xp[c] += 1e-6;
          xm[c] -= 1e-6;
          const auto ap = eval_a(law, {0, 0}, 0, xp), am = eval_a(law, {0, 0}, 0, xm);
          for (int r = 0; r < 2; ++r)
            EXPECT_NEAR(jac[r * 2 + c], (ap[r] - am[r]) / 2e-6, 1e-5 * std::max(1.0, std::abs(jac[r * 2 + c])));
        }
      }
    }
}

TEST(MaterialLaw, Validation) {
  EXPECT_THROW(MaterialLaw::power_law(1.0, 1.0).validate(), ParameterError);
  EXPECT_THROW(MaterialLaw::power_law(2.0, -1.0).validate(), ParameterError);
  auto law = MaterialLaw::power_law(2.0, 1.0);
  law.b_kind = BKind::Linear;
  law.lambda = -1.0;
  EXPECT_THROW(law.validate(), ParameterError);
}

TEST(MaterialLaw, CustomStressHasNoPotential) {
  MaterialLaw law;
  law.custom_stress = [](const Point&, double, std::span<const double> xi) {
    return std::array<double, 2>{xi[0] + xi[0] * xi[0] * xi[0], xi.size() > 1 ? xi[1] : 0.0};
  };
  EXPECT_FALSE(law.has_potential());
  EXPECT_THROW(eval_potential_A(law, {0, 0}, 0, vec2(1, 1)), UnsupportedStructure);
  const auto jac = eval_a_jacobian(law, {0, 0}, 0, vec2(1.0, 0.5));
  EXPECT_NEAR(jac[0], 4.0, 1e-6);
  EXPECT_NEAR(jac[3], 1.0, 1e-6);
}
