#include "rcbf/uncertainty.h"

#include <random>

#include <gtest/gtest.h>

#include "rcbf/systems.h"
#include "test_support.h"

namespace rcbf {
namespace {

TEST(CounterRngTest, KeyedDeterminism) {
  auto a = counter_rng(7, 12, 3);
  auto b = counter_rng(7, 12, 3);
  EXPECT_EQ(a(), b());
  EXPECT_NE(counter_rng(7, 12, 3)(), counter_rng(7, 13, 3)());
  EXPECT_NE(counter_rng(7, 12, 3)(), counter_rng(8, 12, 3)());
  EXPECT_NE(counter_rng(7, 12, 3)(), counter_rng(7, 12, 4)());
}

TEST(EstimateTest, ExactAndOffset) {
  const Plant p = scalar_example();
  const StateVec x = StateVec::Constant(1, 0.3);
  EXPECT_EQ(corrupt_estimate(ExactEstimate{}, x, p.barrier), x);
  const Plant s = segway();
  StateVec e(4);
  e << 0.3, 0.0, -0.4, 0.0;
  const StateVec xs = segway_initial_state();
  EXPECT_DOUBLE_EQ((corrupt_estimate(ConstantOffset{e}, xs, s.barrier) - xs).norm(), 0.5);
  EXPECT_DOUBLE_EQ(estimate_bound(ConstantOffset{e}), 0.5);
}

TEST(EstimateTest, InwardGradientScalar) {
  const Plant p = scalar_example();
  const StateVec x = StateVec::Constant(1, 0.5);
  const StateVec xhat = corrupt_estimate(InwardGradient{0.1}, x, p.barrier);
  EXPECT_NEAR(xhat[0], 0.4, 1e-15);
  EXPECT_GT(p.barrier.h(xhat), p.barrier.h(x));
  // Vanishing gradient falls back to the first axis.
  const StateVec at0 = corrupt_estimate(InwardGradient{0.1}, StateVec::Zero(1), p.barrier);
  EXPECT_EQ(at0[0], 0.1);
}

TEST(EstimateTest, InwardGradientRaisesBarrier) {
  const Plant sc = scalar_example();
  const Plant sg = segway();
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int k = 0; k < 500; ++k) {
    const double delta = 0.1 * std::abs(u(rng));
    StateVec x1 = StateVec::Constant(1, 1.5 * u(rng));
    if (std::abs(x1[0]) > 0.05 + delta) {
      const StateVec xh = corrupt_estimate(InwardGradient{delta}, x1, sc.barrier);
      EXPECT_GE(sc.barrier.h(xh), sc.barrier.h(x1));
    }
    StateVec x4(4);
    x4 << u(rng), u(rng), 5.0 * u(rng), 2.0 * u(rng);
    if (sg.barrier.grad_h(x4).norm() > 1e-3) {
      const StateVec xh = corrupt_estimate(InwardGradient{delta}, x4, sg.barrier);
      EXPECT_GE(sg.barrier.h(xh), sg.barrier.h(x4) - 1e-12);
    }
  }
}

TEST(EstimateTest, RandomBoundedRespectsBoundAndIsDeterministic) {
  const Plant p = segway();
  const StateVec x = segway_initial_state();
  const RandomBoundedEstimate model{0.2, 99};
  for (std::uint64_t step = 0; step < 10000; ++step) {
    const StateVec xh = corrupt_estimate(model, x, p.barrier, step);
    EXPECT_LE((xh - x).norm(), 0.2 + 1e-12);
  }
  EXPECT_EQ(corrupt_estimate(model, x, p.barrier, 123), corrupt_estimate(model, x, p.barrier, 123));
  EXPECT_NE(corrupt_estimate(model, x, p.barrier, 123), corrupt_estimate(model, x, p.barrier, 124));
}

TEST(DisturbanceTest, Examples) {
  const Plant p = scalar_example();
  const StateVec x = StateVec::Constant(1, 0.5);
  EXPECT_EQ(sample_disturbance(NoDisturbance{}, p.system, p.barrier, x), InputVec::Zero(1));
  EXPECT_NEAR(lie_derivatives(p.system, p.barrier, x).lgh[0], -0.75, 1e-15);
  EXPECT_NEAR(sample_disturbance(WorstCaseAntiGradient{0.1}, p.system, p.barrier, x)[0], 0.1,
              1e-15);
  EXPECT_EQ(sample_disturbance(WorstCaseAntiGradient{0.1}, p.system, p.barrier,
                               StateVec::Constant(1, 1.0))[0],
            0.0);
  const InputVec d = InputVec::Constant(1, -0.3);
  EXPECT_EQ(sample_disturbance(ConstantDisturbance{d}, p.system, p.barrier, x), d);
  EXPECT_DOUBLE_EQ(disturbance_bound(ConstantDisturbance{d}), 0.3);
}

TEST(DisturbanceTest, RandomBoundedRespectsBound) {
  const ControlAffineSystem sys = testing::single_integrator(3);
  const Barrier bar = testing::unit_ball_barrier();
  const RandomBoundedDisturbance model{0.7, 5};
  const StateVec x = StateVec::Constant(3, 0.1);
  for (std::uint64_t step = 0; step < 10000; ++step) {
    EXPECT_LE(sample_disturbance(model, sys, bar, x, step).norm(), 0.7 + 1e-12);
  }
  EXPECT_EQ(sample_disturbance(model, sys, bar, x, 17), sample_disturbance(model, sys, bar, x, 17));
}

TEST(DisturbanceTest, WorstCaseMinimizesHdot) {
  const ControlAffineSystem sys = testing::single_integrator(3);
  const Barrier bar = testing::unit_ball_barrier();
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const double dbar = 0.4;
  for (int k = 0; k < 20; ++k) {
    StateVec x(3);
    x << u(rng), u(rng), u(rng);
    const InputVec lgh = lie_derivatives(sys, bar, x).lgh;
    const InputVec d = sample_disturbance(WorstCaseAntiGradient{dbar}, sys, bar, x);
    EXPECT_NEAR(lgh.dot(d), -dbar * lgh.norm(), 1e-12);
    for (std::uint64_t j = 0; j < 1000; ++j) {
      auto r = counter_rng(k, j, 1);
      const Eigen::VectorXd s = bounded_sample(r, 3, dbar);
      EXPECT_GE(lgh.dot(s), lgh.dot(d) - 1e-12);
    }
  }
}

}  // namespace
}  // namespace rcbf
