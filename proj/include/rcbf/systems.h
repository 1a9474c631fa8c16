#pragma once

#include "rcbf/core.h"

namespace rcbf {

/// A system together with the barrier defining its safe set.
struct Plant {
  ControlAffineSystem system;
  Barrier barrier;
};

/// xdot = x (x - 1.05)(x + 1.05) + (1 - x^2) u with h(x) = 1 - x^2.
/// Both L_gh zeros on the boundary (x = +-1) are control-degenerate.
Plant scalar_example();

/// Physical parameters of the planar wheeled inverted pendulum (SI units).
struct SegwayParams {
  double wheel_mass = 2.0;        // kg, uniform disc
  double body_mass = 40.0;        // kg
  double body_inertia = 4.0;      // kg m^2 about the body COM
  double body_com_length = 0.5;   // m, axle to body COM
  double wheel_radius = 0.25;     // m
  double gravity = 9.81;          // m/s^2
  double viscous_friction = 1.0;  // N m s, on the axle relative rate

  /// Throws ConfigurationError for non-physical values or a singular mass matrix.
  void validate() const;
};

/// Wheeled inverted pendulum in x = (p, phi, v, omega) driven by the axle
/// torque u, with h(x) = 1 - (3 phi^2 + 2 phi omega + omega^2).
///
/// With wheel inertia I_w = m_w r^2 / 2 and M(phi) =
///   [ m_w + I_w/r^2 + m_b     m_b l cos(phi) ]
///   [ m_b l cos(phi)          I_b + m_b l^2  ]
/// the accelerations solve
///   M(phi) [vdot; omegadot] = [ m_b l sin(phi) omega^2 - b (v/r - omega)/r ;
///                               m_b g l sin(phi) + b (v/r - omega) ]
///                             + [ 1/r ; -1 ] u.
Plant segway(const SegwayParams& params = {});

/// Fixed 1x4 LQR gain (u = -K x) for the default parameters, computed offline
/// with Q = diag(25, 1, 5, 1), R = 0.5 on the upright linearization.
Eigen::MatrixXd default_segway_gain();

/// (p, phi, v, omega) = (-4, -0.5, 0, 1).
StateVec segway_initial_state();

}  // namespace rcbf
