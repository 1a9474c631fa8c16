#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <variant>

#include "rcbf/core.h"

namespace rcbf {

/// Generator keyed by (seed, step, stream): the same key always yields the
/// same draws, regardless of evaluation order.
std::mt19937_64 counter_rng(std::uint64_t seed, std::uint64_t step,
                            std::uint64_t stream = 0);

/// delta * v * w with v uniform on the unit sphere and w uniform on [0, 1].
Eigen::VectorXd bounded_sample(std::mt19937_64& rng, int dim, double radius);

// --- state estimates ---------------------------------------------------------

struct ExactEstimate {};
/// xhat = x + offset.
struct ConstantOffset {
  StateVec offset;
};
/// xhat = x + delta grad_h / |grad_h|: the estimate looks safer than the truth.
struct InwardGradient {
  double delta = 0.0;
};
struct RandomBoundedEstimate {
  double delta = 0.0;
  std::uint64_t seed = 0;
};

using EstimateModel =
    std::variant<ExactEstimate, ConstantOffset, InwardGradient, RandomBoundedEstimate>;

/// Produces the estimate handed to the controller at the given step. At a
/// vanishing gradient InwardGradient moves along the first coordinate axis.
StateVec corrupt_estimate(const EstimateModel& model, const StateVec& x,
                          const Barrier& bar, std::uint64_t step = 0);

/// Worst-case |xhat - x| the model can produce.
double estimate_bound(const EstimateModel& model);
std::string describe(const EstimateModel& model);

// --- actuation disturbances ------------------------------------------------

struct NoDisturbance {};
struct ConstantDisturbance {
  InputVec d;
};
/// d = -dbar L_gh(x)^T / |L_gh(x)|, the direction that decreases hdot most.
struct WorstCaseAntiGradient {
  double dbar = 0.0;
};
struct RandomBoundedDisturbance {
  double dbar = 0.0;
  std::uint64_t seed = 0;
};

using DisturbanceModel = std::variant<NoDisturbance, ConstantDisturbance,
                                      WorstCaseAntiGradient, RandomBoundedDisturbance>;

InputVec sample_disturbance(const DisturbanceModel& model,
                            const ControlAffineSystem& sys, const Barrier& bar,
                            const StateVec& x, std::uint64_t step = 0);

double disturbance_bound(const DisturbanceModel& model);
std::string describe(const DisturbanceModel& model);

}  // namespace rcbf
