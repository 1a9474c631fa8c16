#include "rcbf/sim.h"

#include <cmath>

#include "rcbf/errors.h"

namespace rcbf {

void SimConfig::validate() const {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ConfigurationError("sim.dt must be positive");
  if (!(horizon > 0.0) || !std::isfinite(horizon)) {
    throw ConfigurationError("sim.horizon must be positive");
  }
  if (dt > horizon) throw ConfigurationError("sim.dt exceeds sim.horizon");
  if (!(escape_radius > 0.0)) throw ConfigurationError("sim.escape_radius must be positive");
  if (record_stride < 1) throw ConfigurationError("sim.record_stride must be >= 1");
}

std::string to_string(OutcomeKind kind) {
  switch (kind) {
    case OutcomeKind::kCompleted:
      return "completed";
    case OutcomeKind::kEscaped:
      return "escaped";
    case OutcomeKind::kInfeasible:
      return "infeasible";
  }
  return "unknown";
}

Controller nominal_zero(int m) {
  return [m](const StateVec&) { return InputVec::Zero(m); };
}

Controller nominal_linear(const Eigen::MatrixXd& gain, const ControlAffineSystem& sys) {
  if (gain.rows() != sys.m || gain.cols() != sys.n) {
    throw ConfigurationError("gain has shape " + std::to_string(gain.rows()) + "x" +
                             std::to_string(gain.cols()) + ", expected " +
                             std::to_string(sys.m) + "x" + std::to_string(sys.n));
  }
  return [gain](const StateVec& x) -> InputVec { return -gain * x; };
}

Controller nominal_constant(const InputVec& u) {
  return [u](const StateVec&) { return u; };
}

StateVec rk4_step(const ControlAffineSystem& sys, const StateVec& x,
                  const InputVec& u, double dt) {
  if (!(dt > 0.0)) throw ConfigurationError("rk4_step needs dt > 0");
  const StateVec k1 = sys.vector_field(x, u);
  const StateVec k2 = sys.vector_field(x + 0.5 * dt * k1, u);
  const StateVec k3 = sys.vector_field(x + 0.5 * dt * k2, u);
  const StateVec k4 = sys.vector_field(x + dt * k3, u);
  StateVec next = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  if (!next.allFinite()) throw NumericBlowup("RK4 step produced a non-finite state");
  return next;
}

Trajectory simulate(const ControlAffineSystem& sys, const Barrier& bar,
                    const SafetyFilter& filter, const Controller& nominal,
                    const EstimateModel& estimate, const DisturbanceModel& disturbance,
                    const StateVec& x0, const SimConfig& cfg) {
  cfg.validate();
  if (x0.size() != sys.n) throw ConfigurationError("x0 has wrong dimension");
  if (!x0.allFinite()) throw ConfigurationError("x0 is not finite");

  const long steps = std::lround(cfg.horizon / cfg.dt);
  Trajectory traj;
  StateVec x = x0;
  for (long k = 0;; ++k) {
    const double t = static_cast<double>(k) * cfg.dt;
    const auto step = static_cast<std::uint64_t>(k);
    const StateVec xhat = corrupt_estimate(estimate, x, bar, step);
    FilterResult res;
    try {
      res = filter.apply(sys, bar, nominal(xhat), xhat);
    } catch (const InfeasibleAtState& e) {
      traj.outcome = {OutcomeKind::kInfeasible, t, e.what()};
      break;
    }
    const InputVec d = sample_disturbance(disturbance, sys, bar, x, step);

    if (k % cfg.record_stride == 0 || k == steps) {
      traj.times.push_back(t);
      traj.states.push_back(x);
      traj.estimates.push_back(xhat);
      traj.inputs.push_back(res.u);
      traj.disturbances.push_back(d);
      traj.h_values.push_back(bar.h(x));
      traj.slacks.push_back(res.slack);
    }
    if (k == steps) {
      traj.outcome = {OutcomeKind::kCompleted, t, {}};
      break;
    }
    const double t_next = static_cast<double>(k + 1) * cfg.dt;
    try {
      x = rk4_step(sys, x, res.u + d, cfg.dt);
    } catch (const NumericBlowup& e) {
      traj.outcome = {OutcomeKind::kEscaped, t_next, e.what()};
      break;
    }
    if (x.norm() > cfg.escape_radius) {
      traj.outcome = {OutcomeKind::kEscaped, t_next, "state left the escape radius"};
      break;
    }
  }
  return traj;
}

Controller filtered_controller(const ControlAffineSystem& sys, const Barrier& bar,
                               const SafetyFilter& filter, const Controller& nominal) {
  return [sys, bar, filter, nominal](const StateVec& x) {
    return filter.apply(sys, bar, nominal(x), x).u;
  };
}

}  // namespace rcbf
