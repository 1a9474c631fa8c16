#include "rcbf/systems.h"

#include <cmath>

#include "rcbf/errors.h"

namespace rcbf {

Plant scalar_example() {
  Plant plant;
  plant.system.n = 1;
  plant.system.m = 1;
  plant.system.label = "scalar";
  plant.system.f = [](const StateVec& x) -> StateVec {
    const double s = x[0];
    return StateVec::Constant(1, s * (s - 1.05) * (s + 1.05));
  };
  plant.system.g = [](const StateVec& x) -> InputMatrix {
    return InputMatrix::Constant(1, 1, 1.0 - x[0] * x[0]);
  };
  plant.barrier.h = [](const StateVec& x) { return 1.0 - x[0] * x[0]; };
  plant.barrier.grad_h = [](const StateVec& x) -> StateVec {
    return StateVec::Constant(1, -2.0 * x[0]);
  };
  return plant;
}

void SegwayParams::validate() const {
  const double positives[] = {wheel_mass,      body_mass,    body_inertia,
                              body_com_length, wheel_radius, gravity};
  for (double v : positives) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw ConfigurationError("segway masses, inertia, lengths and gravity must be positive");
    }
  }
  if (!(viscous_friction >= 0.0)) {
    throw ConfigurationError("segway viscous_friction must be >= 0");
  }
  // det M(phi) is smallest at cos(phi)^2 = 1.
  const double m11 = wheel_mass * 1.5 + body_mass;
  const double m22 = body_inertia + body_mass * body_com_length * body_com_length;
  const double m12 = body_mass * body_com_length;
  if (m11 * m22 - m12 * m12 <= 1e-12 * m11 * m22) {
    throw ConfigurationError("segway mass matrix is singular for these parameters");
  }
}

Plant segway(const SegwayParams& params) {
  params.validate();
  const SegwayParams p = params;

  struct Terms {
    Eigen::Vector2d drift;
    Eigen::Vector2d input;
  };
  auto accelerations = [p](const StateVec& x) {
    const double phi = x[1];
    const double v = x[2];
    const double omega = x[3];
    const double r = p.wheel_radius;
    const double l = p.body_com_length;
    const double mb = p.body_mass;
    Eigen::Matrix2d mass;
    mass << p.wheel_mass * 1.5 + mb, mb * l * std::cos(phi),  //
        mb * l * std::cos(phi), p.body_inertia + mb * l * l;
    const double slip = v / r - omega;
    const Eigen::Vector2d bias(mb * l * std::sin(phi) * omega * omega -
                                   p.viscous_friction * slip / r,
                               mb * p.gravity * l * std::sin(phi) + p.viscous_friction * slip);
    const Eigen::Matrix2d inv = mass.inverse();
    return Terms{inv * bias, inv * Eigen::Vector2d(1.0 / r, -1.0)};
  };

  Plant plant;
  plant.system.n = 4;
  plant.system.m = 1;
  plant.system.label = "segway";
  plant.system.f = [accelerations](const StateVec& x) -> StateVec {
    const Terms t = accelerations(x);
    StateVec out(4);
    out << x[2], x[3], t.drift[0], t.drift[1];
    return out;
  };
  plant.system.g = [accelerations](const StateVec& x) -> InputMatrix {
    const Terms t = accelerations(x);
    InputMatrix out = InputMatrix::Zero(4, 1);
    out(2, 0) = t.input[0];
    out(3, 0) = t.input[1];
    return out;
  };
  plant.barrier.h = [](const StateVec& x) {
    const double phi = x[1];
    const double omega = x[3];
    return 1.0 - (3.0 * phi * phi + 2.0 * phi * omega + omega * omega);
  };
  plant.barrier.grad_h = [](const StateVec& x) -> StateVec {
    const double phi = x[1];
    const double omega = x[3];
    StateVec grad(4);
    grad << 0.0, -6.0 * phi - 2.0 * omega, 0.0, -2.0 * phi - 2.0 * omega;
    return grad;
  };
  return plant;
}

Eigen::MatrixXd default_segway_gain() {
  Eigen::MatrixXd k(1, 4);
  k << -3.16227766, -159.28718108, -14.33933614, -28.41466569;
  return k;
}

StateVec segway_initial_state() {
  StateVec x0(4);
  x0 << -4.0, -0.5, 0.0, 1.0;
  return x0;
}

}  // namespace rcbf
