#pragma once

#include <vector>

#include <Eigen/Dense>

#include "apexgame/track.hpp"

namespace apexgame {

// One vehicle's state in the Frenet frame. p_x is kept lap-unwrapped
// (cumulative arc length); track-local lookups wrap it internally.
// Velocities v_tilde_* are in the body frame; phi is the heading error
// against the track tangent, wrapped to (-pi, pi].
struct CarState {
  double p_x = 0.0;
  double p_y = 0.0;
  double phi = 0.0;
  double v_tilde_x = 0.0;
  double v_tilde_y = 0.0;
  double omega = 0.0;
};

struct ControlInput {
  double d = 0.0;      // throttle
  double delta = 0.0;  // steering angle, rad
};

struct VehicleParams {
  double m = 1200.0;    // kg
  double I_z = 1560.0;  // kg m^2
  double l_f = 1.2;     // m
  double l_r = 1.4;     // m
  // Longitudinal force: F_rx = (C1 - C2*v) * d - C3 - C4*v^2.
  double C1 = 8000.0;
  double C2 = 120.0;
  double C3 = 200.0;
  double C4 = 4.0;
  // Pacejka lateral force: F = D * sin(C * atan(B * alpha)).
  double B_f = 10.0, C_f = 1.9, D_f = 5300.0;
  double B_r = 11.0, C_r = 1.9, D_r = 5600.0;
  double d_min = -1.0, d_max = 1.0;
  double delta_min = -0.42, delta_max = 0.42;
  double delta_rate_min = -0.1, delta_rate_max = 0.1;  // rad per step
};

struct InteractionConfig {
  double unsafe_dist = 1.0;  // m
  double w_max = 6.0;        // m, from the track
};

// Floor applied to v_tilde_x inside the slip-angle denominators.
inline constexpr double kSlipSpeedFloor = 0.1;

// One explicit-Euler step of the Frenet-frame bicycle model with Pacejka
// lateral forces. kappa is the track curvature at the car's p_x.
// Throws SingularFrenet when |1 - kappa * p_y| < 1e-6.
CarState step(const CarState& state, const ControlInput& u, const VehicleParams& vp,
              double kappa, double dt);

// Same step plus the Jacobians of the next state w.r.t. the current state (A)
// and the control (B). dkappa_dpx is the local slope of the curvature lookup,
// so planners can propagate sensitivity through the curvature schedule.
CarState step_with_jacobian(const CarState& state, const ControlInput& u,
                            const VehicleParams& vp, double kappa, double dkappa_dpx,
                            double dt, Eigen::Matrix<double, 6, 6>& A,
                            Eigen::Matrix<double, 6, 2>& B);

// Frenet-frame velocity components derived from a state.
double frenet_vx(const CarState& state, double kappa);
double frenet_vy(const CarState& state);

// Near-collision and off-track rules, applied after the dynamics step on a
// snapshot of the incoming states. For each pair closer than unsafe_dist in
// the global frame the leading car's v_tilde_x is halved and the trailing
// car's is cut to a third (ties in p_x: the lower index takes the 1/2
// penalty). Cars with |p_y| > w_max/2 get v_tilde_x halved, phi reset to 0
// and p_y clamped to the boundary.
std::vector<CarState> apply_interaction_rules(std::vector<CarState> states,
                                              const InteractionConfig& cfg,
                                              const Track& track);

}  // namespace apexgame
