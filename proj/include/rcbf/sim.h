#pragma once

#include <functional>
#include <string>
#include <vector>

#include "rcbf/core.h"
#include "rcbf/filters.h"
#include "rcbf/uncertainty.h"

namespace rcbf {

struct SimConfig {
  double dt = 1e-3;        // s
  double horizon = 20.0;   // s
  double escape_radius = 1e3;
  int record_stride = 1;

  /// Throws ConfigurationError for non-positive values or dt > horizon.
  void validate() const;
};

enum class OutcomeKind { kCompleted, kEscaped, kInfeasible };

struct Outcome {
  OutcomeKind kind = OutcomeKind::kCompleted;
  /// Time of escape or filter failure; the horizon for completed runs.
  double time = 0.0;
  std::string detail;
};

std::string to_string(OutcomeKind kind);

struct Trajectory {
  std::vector<double> times;
  std::vector<StateVec> states;
  std::vector<StateVec> estimates;
  std::vector<InputVec> inputs;
  std::vector<InputVec> disturbances;
  std::vector<double> h_values;
  std::vector<double> slacks;
  Outcome outcome;

  std::size_t size() const { return times.size(); }
};

using Controller = std::function<InputVec(const StateVec&)>;

Controller nominal_zero(int m);
/// u = -K x. Throws ConfigurationError when K is not m x n for the system.
Controller nominal_linear(const Eigen::MatrixXd& gain, const ControlAffineSystem& sys);
Controller nominal_constant(const InputVec& u);

/// Classical RK4 step of xdot = f(x) + g(x) u with u held over the step.
/// Throws NumericBlowup if the result is not finite.
StateVec rk4_step(const ControlAffineSystem& sys, const StateVec& x,
                  const InputVec& u, double dt);

/// Closed loop with zero-order hold: each step evaluates the estimate, the
/// filtered nominal input at the estimate and the disturbance at the true
/// state, then integrates one RK4 step. Escapes (|x| > escape_radius or a
/// non-finite state) and filter infeasibility end the run and are reported in
/// the outcome. Invalid configurations throw ConfigurationError.
Trajectory simulate(const ControlAffineSystem& sys, const Barrier& bar,
                    const SafetyFilter& filter, const Controller& nominal,
                    const EstimateModel& estimate, const DisturbanceModel& disturbance,
                    const StateVec& x0, const SimConfig& cfg);

/// The filtered controller x -> filter(nominal(x), x).u evaluated at exact states.
Controller filtered_controller(const ControlAffineSystem& sys, const Barrier& bar,
                               const SafetyFilter& filter, const Controller& nominal);

}  // namespace rcbf
