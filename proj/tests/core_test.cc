#include "rcbf/core.h"

#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "rcbf/errors.h"
#include "rcbf/systems.h"
#include "test_support.h"

namespace rcbf {
namespace {

// Independent conjugate oracle: brute-force minimum of rho(y) - y d on a fine
// grid that contains the analytic minimizer's neighbourhood.
double grid_zeta(const std::function<double(double)>& rho, double d, double y_max) {
  double best = 0.0;
  const int n = 200001;
  for (int i = 0; i < n; ++i) {
    const double y = y_max * i / (n - 1);
    best = std::min(best, rho(y) - y * d);
  }
  return -best;
}

TEST(ClassKappaTest, LinearAndCubicValues) {
  EXPECT_EQ(ClassKappaInfE::linear(1.0)(0.0), 0.0);
  EXPECT_DOUBLE_EQ(ClassKappaInfE::linear(2.0).inverse(-1.6), -0.8);
  EXPECT_NEAR(ClassKappaInfE::cubic(1.0).inverse(8.0), 2.0, 1e-12);
  EXPECT_NEAR(ClassKappaInfE::cubic(2.0).inverse(-16.0), -2.0, 1e-12);
}

TEST(ClassKappaTest, InverseRoundTripOnGrid) {
  const std::vector<ClassKappaInfE> alphas = {
      ClassKappaInfE::linear(0.5), ClassKappaInfE::linear(3.0), ClassKappaInfE::cubic(1.0),
      ClassKappaInfE::custom([](double r) { return r + r * r * r; }, {}, 100.0)};
  for (const ClassKappaInfE& a : alphas) {
    double prev = -std::numeric_limits<double>::infinity();
    for (double r = -5.0; r <= 5.0; r += 0.125) {
      const double s = a(r);
      EXPECT_GT(s, prev) << a.describe() << " not increasing at " << r;
      prev = s;
      EXPECT_NEAR(a.inverse(s), r, 1e-9) << a.describe() << " r=" << r;
    }
    EXPECT_EQ(a(0.0), 0.0);
  }
}

TEST(ClassKappaTest, CustomInverseBracketFailure) {
  const ClassKappaInfE a = ClassKappaInfE::custom([](double r) { return r; }, {}, 1.0);
  EXPECT_THROW(a.inverse(5.0), InversionError);
  EXPECT_NEAR(a.inverse(0.5), 0.5, 1e-12);
}

TEST(ClassKappaTest, RejectsNonPositiveCoefficient) {
  EXPECT_THROW(ClassKappaInfE::linear(0.0), ConfigurationError);
  EXPECT_THROW(ClassKappaInfE::cubic(-1.0), ConfigurationError);
  EXPECT_THROW(ClassKappaInfE::custom({}), ConfigurationError);
}

TEST(RobustnessFunctionTest, PolynomialValues) {
  const auto p11 = RobustnessFunction::polynomial(1.0, 1.0);
  const auto p02 = RobustnessFunction::polynomial(0.2, 0.2);
  EXPECT_EQ(p11(0.0), 0.0);
  EXPECT_NEAR(p02(1.0), 0.4, 1e-15);
  EXPECT_EQ(p11(2.0), 6.0);
  EXPECT_THROW(p11(-1e-3), DomainError);
}

TEST(RobustnessFunctionTest, PolynomialEpsilonIsGamma1) {
  EXPECT_EQ(RobustnessFunction::polynomial(1.0, 1.0).epsilon(), 1.0);
  EXPECT_EQ(RobustnessFunction::polynomial(0.2, 0.2).epsilon(), 0.2);
}

TEST(RobustnessFunctionTest, PolynomialZetaMatchesGridOracle) {
  const auto p11 = RobustnessFunction::polynomial(1.0, 1.0);
  const auto p02 = RobustnessFunction::polynomial(0.2, 0.2);
  EXPECT_EQ(p11.zeta(0.5), 0.0);
  EXPECT_NEAR(p11.zeta(3.0), 1.0, 1e-15);
  EXPECT_NEAR(p02.zeta(1.0), 0.8, 1e-15);
  EXPECT_NEAR(grid_zeta([](double y) { return y + y * y; }, 3.0, 5.0), 1.0, 1e-8);
  EXPECT_NEAR(grid_zeta([](double y) { return 0.2 * y + 0.2 * y * y; }, 1.0, 5.0), 0.8, 1e-8);
}

TEST(RobustnessFunctionTest, GenericLinearEpsilon) {
  const auto lin = RobustnessFunction::generic([](double y) { return 2.0 * y; }, 100.0);
  EXPECT_NEAR(lin.epsilon(), 2.0, 1e-6);
}

TEST(RobustnessFunctionTest, GenericMatchesPolynomialClosedForm) {
  for (auto [g1, g2] : {std::pair{1.0, 1.0}, {0.2, 0.2}, {2.0, 0.5}}) {
    const auto poly = RobustnessFunction::polynomial(g1, g2);
    const auto gen = RobustnessFunction::generic(
        [g1 = g1, g2 = g2](double y) { return g1 * y + g2 * y * y; }, 100.0);
    EXPECT_NEAR(gen.epsilon(), g1, 1e-6);
    for (double d = 0.0; d <= 10.0; d += 0.37) {
      EXPECT_NEAR(gen.zeta(d), poly.zeta(d), 1e-6) << "g1=" << g1 << " d=" << d;
    }
  }
}

TEST(RobustnessFunctionTest, GenericErrors) {
  // rho(y) = y^2 has no positive linear lower bound.
  const auto quad = RobustnessFunction::generic([](double y) { return y * y; }, 10.0);
  EXPECT_THROW(quad.epsilon(), InvalidRobustnessFunction);
  EXPECT_NEAR(quad.zeta(2.0), 1.0, 1e-9);
  // rho(y) = y has an unbounded conjugate beyond d = 1.
  const auto lin = RobustnessFunction::generic([](double y) { return y; }, 10.0);
  EXPECT_THROW(lin.zeta(2.0), UnboundedConjugate);
  EXPECT_EQ(lin.zeta(0.5), 0.0);
  EXPECT_THROW(lin.zeta(-1.0), DomainError);
  EXPECT_THROW(RobustnessFunction::generic({}, 1.0), ConfigurationError);
  EXPECT_THROW(RobustnessFunction::generic([](double y) { return y; }, 0.0),
               ConfigurationError);
}

TEST(RobustnessFunctionTest, PropertiesOnSampledPoints) {
  const std::vector<RobustnessFunction> rhos = {
      RobustnessFunction::polynomial(1.0, 1.0), RobustnessFunction::polynomial(0.2, 0.2),
      RobustnessFunction::polynomial(2.0, 0.5),
      RobustnessFunction::generic([](double y) { return 0.5 * y + std::pow(y, 1.5); }, 50.0)};
  for (const RobustnessFunction& rho : rhos) {
    const double eps = rho.epsilon();
    EXPECT_EQ(rho(0.0), 0.0);
    for (double y = 0.0; y <= 20.0; y += 0.05) {
      EXPECT_GE(rho(y), eps * y - 1e-9) << rho.describe() << " y=" << y;
    }
    double prev = 0.0;
    for (double d = 0.0; d <= 10.0; d += 0.05) {
      const double z = rho.zeta(d);
      EXPECT_GE(z, 0.0);
      EXPECT_GE(z, prev - 1e-12) << rho.describe() << " d=" << d;
      if (d <= eps) EXPECT_LE(z, 1e-9) << rho.describe() << " d=" << d;
      if (rho.is_polynomial() && d > eps) EXPECT_GT(z, 0.0);
      prev = z;
    }
  }
}

TEST(LieDerivativesTest, ScalarExampleHandValues) {
  const Plant p = scalar_example();
  const LieDerivatives at0 = lie_derivatives(p.system, p.barrier, StateVec::Zero(1));
  EXPECT_EQ(at0.lfh, 0.0);
  EXPECT_EQ(at0.lgh[0], 0.0);
  const LieDerivatives at1 = lie_derivatives(p.system, p.barrier, StateVec::Constant(1, 1.0));
  EXPECT_NEAR(at1.lfh, 0.205, 1e-12);
  EXPECT_EQ(at1.lgh[0], 0.0);
}

TEST(LieDerivativesTest, ZeroGradientAnnihilates) {
  ControlAffineSystem sys = testing::single_integrator(3);
  sys.f = [](const StateVec& x) -> StateVec { return x.array() + 1.0; };
  Barrier flat;
  flat.h = [](const StateVec&) { return 0.5; };
  flat.grad_h = [](const StateVec&) { return StateVec::Zero(3); };
  const LieDerivatives lie = lie_derivatives(sys, flat, StateVec::Ones(3));
  EXPECT_EQ(lie.lfh, 0.0);
  EXPECT_TRUE(lie.lgh.isZero());
}

TEST(LieDerivativesTest, LinearInDrift) {
  const Plant p = segway();
  ControlAffineSystem doubled = p.system;
  doubled.f = [f = p.system.f](const StateVec& x) -> StateVec { return 2.0 * f(x); };
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int k = 0; k < 50; ++k) {
    StateVec x(4);
    for (int i = 0; i < 4; ++i) x[i] = u(rng);
    const double a = lie_derivatives(p.system, p.barrier, x).lfh;
    const double b = lie_derivatives(doubled, p.barrier, x).lfh;
    EXPECT_NEAR(b, 2.0 * a, 1e-12 * std::max(1.0, std::abs(a)));
  }
}

TEST(LieDerivativesTest, DimensionMismatchThrows) {
  const Plant p = scalar_example();
  EXPECT_THROW(lie_derivatives(p.system, p.barrier, StateVec::Zero(2)), ConfigurationError);
  ControlAffineSystem bad = p.system;
  bad.g = [](const StateVec&) { return InputMatrix::Zero(2, 1); };
  EXPECT_THROW(lie_derivatives(bad, p.barrier, StateVec::Zero(1)), ConfigurationError);
}

TEST(ValidateBarrierTest, SegwayGradientMatchesDifferences) {
  const Plant p = segway();
  const Box box{StateVec::Constant(4, -1.0), StateVec::Constant(4, 1.0)};
  const BarrierReport r = validate_barrier(p.barrier, tensor_grid(box, std::vector<int>(4, 7)));
  EXPECT_EQ(r.points, 7u * 7u * 7u * 7u);
  EXPECT_LE(r.max_relative_gradient_error, 1e-6);
}

TEST(ValidateBarrierTest, ScalarBarrierIsRegular) {
  const Plant p = scalar_example();
  const Box box{StateVec::Constant(1, -2.0), StateVec::Constant(1, 2.0)};
  const BarrierReport r = validate_barrier(p.barrier, tensor_grid(box, 1e-3));
  EXPECT_TRUE(r.regularity_violations.empty());
  EXPECT_LE(r.max_relative_gradient_error, 1e-4);
}

TEST(ValidateBarrierTest, ConstantBarrierIsDegenerate) {
  Barrier flat;
  flat.h = [](const StateVec&) { return -1.0; };
  flat.grad_h = [](const StateVec&) { return StateVec::Zero(1); };
  const Box box{StateVec::Constant(1, -1.0), StateVec::Constant(1, 1.0)};
  const auto grid = tensor_grid(box, std::vector<int>{11});
  const BarrierReport r = validate_barrier(flat, grid);
  EXPECT_EQ(r.max_relative_gradient_error, 0.0);
  EXPECT_EQ(r.regularity_violations.size(), grid.size());
}

TEST(GridTest, TensorGridIncludesEndpoints) {
  const Box box{StateVec::Constant(2, -1.0), StateVec::Constant(2, 1.0)};
  const auto grid = tensor_grid(box, std::vector<int>{3, 5});
  ASSERT_EQ(grid.size(), 15u);
  EXPECT_EQ(grid.front(), box.lo);
  EXPECT_EQ(grid.back(), box.hi);
  const auto stepped = tensor_grid(Box{StateVec::Constant(1, -2.0), StateVec::Constant(1, 2.0)}, 1e-3);
  EXPECT_EQ(stepped.size(), 4001u);
  EXPECT_EQ(stepped[2000][0], 0.0);
  EXPECT_THROW((Box{StateVec::Zero(2), StateVec::Zero(2)}.require_volume()), ConfigurationError);
}

}  // namespace
}  // namespace rcbf
