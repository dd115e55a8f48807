#include "apexgame/dynamics.hpp"

#include <algorithm>
#include <cmath>

#include "apexgame/errors.hpp"
#include "apexgame/util.hpp"

namespace apexgame {

namespace {

struct Forces {
  double F_rx, F_fy, F_ry;
  double alpha_f, alpha_r;
};

Forces tire_forces(const CarState& x, const ControlInput& u, const VehicleParams& vp) {
  Forces f;
  const double v_slip = std::max(x.v_tilde_x, kSlipSpeedFloor);
  f.alpha_f = u.delta - std::atan((x.omega * vp.l_f + x.v_tilde_y) / v_slip);
  f.alpha_r = std::atan((x.omega * vp.l_r - x.v_tilde_y) / v_slip);
  f.F_fy = vp.D_f * std::sin(vp.C_f * std::atan(vp.B_f * f.alpha_f));
  f.F_ry = vp.D_r * std::sin(vp.C_r * std::atan(vp.B_r * f.alpha_r));
  f.F_rx = (vp.C1 - vp.C2 * x.v_tilde_x) * u.d - vp.C3 - vp.C4 * x.v_tilde_x * x.v_tilde_x;
  return f;
}

double check_denom(const CarState& x, double kappa) {
  const double denom = 1.0 - kappa * x.p_y;
  if (std::abs(denom) < 1e-6) {
    throw SingularFrenet("|1 - kappa * p_y| = " + std::to_string(std::abs(denom)) +
                         " at p_y = " + std::to_string(x.p_y));
  }
  return denom;
}

}  // namespace

double frenet_vx(const CarState& x, double kappa) {
  const double denom = check_denom(x, kappa);
  return (x.v_tilde_x * std::cos(x.phi) - x.v_tilde_y * std::sin(x.phi)) / denom;
}

double frenet_vy(const CarState& x) {
  return x.v_tilde_x * std::sin(x.phi) + x.v_tilde_y * std::cos(x.phi);
}

CarState step(const CarState& x, const ControlInput& u, const VehicleParams& vp,
              double kappa, double dt) {
  const double denom = check_denom(x, kappa);
  const double c = std::cos(x.phi), s = std::sin(x.phi);
  const double vx_f = (x.v_tilde_x * c - x.v_tilde_y * s) / denom;
  const double vy_f = x.v_tilde_x * s + x.v_tilde_y * c;
  const Forces f = tire_forces(x, u, vp);

  CarState n;
  n.p_x = x.p_x + dt * vx_f;
  n.p_y = x.p_y + dt * vy_f;
  n.phi = wrap_angle(x.phi + dt * (x.omega - kappa * vx_f));
  n.v_tilde_x =
      x.v_tilde_x + dt * (f.F_rx - f.F_fy * std::sin(u.delta) + vp.m * x.v_tilde_y * x.omega) / vp.m;
  n.v_tilde_y =
      x.v_tilde_y + dt * (f.F_ry + f.F_fy * std::cos(u.delta) - vp.m * x.v_tilde_x * x.omega) / vp.m;
  n.omega = x.omega + dt * (f.F_fy * vp.l_f * std::cos(u.delta) - f.F_ry * vp.l_r) / vp.I_z;
  return n;
}

CarState step_with_jacobian(const CarState& x, const ControlInput& u,
                            const VehicleParams& vp, double kappa, double dkappa_dpx,
                            double dt, Eigen::Matrix<double, 6, 6>& A,
                            Eigen::Matrix<double, 6, 2>& B) {
  const double denom = check_denom(x, kappa);
  const double c = std::cos(x.phi), s = std::sin(x.phi);
  const double num = x.v_tilde_x * c - x.v_tilde_y * s;
  const double vx_f = num / denom;
  const double cd = std::cos(u.delta), sd = std::sin(u.delta);

  const double v_slip = std::max(x.v_tilde_x, kSlipSpeedFloor);
  const double dvslip_dvx = x.v_tilde_x > kSlipSpeedFloor ? 1.0 : 0.0;

  const double gf = (x.omega * vp.l_f + x.v_tilde_y) / v_slip;
  const double gr = (x.omega * vp.l_r - x.v_tilde_y) / v_slip;
  const double alpha_f = u.delta - std::atan(gf);
  const double alpha_r = std::atan(gr);
  const double datan_f = 1.0 / (1.0 + gf * gf);
  const double datan_r = 1.0 / (1.0 + gr * gr);

  // d(alpha)/d(state)
  const double daf_dvx = datan_f * (x.omega * vp.l_f + x.v_tilde_y) / (v_slip * v_slip) * dvslip_dvx;
  const double daf_dvy = -datan_f / v_slip;
  const double daf_dw = -datan_f * vp.l_f / v_slip;
  const double dar_dvx = -datan_r * (x.omega * vp.l_r - x.v_tilde_y) / (v_slip * v_slip) * dvslip_dvx;
  const double dar_dvy = -datan_r / v_slip;
  const double dar_dw = datan_r * vp.l_r / v_slip;

  const double tf = std::atan(vp.B_f * alpha_f);
  const double tr = std::atan(vp.B_r * alpha_r);
  const double F_fy = vp.D_f * std::sin(vp.C_f * tf);
  const double F_ry = vp.D_r * std::sin(vp.C_r * tr);
  const double dFfy = vp.D_f * std::cos(vp.C_f * tf) * vp.C_f * vp.B_f /
                      (1.0 + vp.B_f * vp.B_f * alpha_f * alpha_f);
  const double dFry = vp.D_r * std::cos(vp.C_r * tr) * vp.C_r * vp.B_r /
                      (1.0 + vp.B_r * vp.B_r * alpha_r * alpha_r);

  const double F_rx = (vp.C1 - vp.C2 * x.v_tilde_x) * u.d - vp.C3 - vp.C4 * x.v_tilde_x * x.v_tilde_x;
  const double dFrx_dvx = -vp.C2 * u.d - 2.0 * vp.C4 * x.v_tilde_x;
  const double dFrx_dd = vp.C1 - vp.C2 * x.v_tilde_x;

  CarState n;
  n.p_x = x.p_x + dt * vx_f;
  n.p_y = x.p_y + dt * (x.v_tilde_x * s + x.v_tilde_y * c);
  n.phi = wrap_angle(x.phi + dt * (x.omega - kappa * vx_f));
  n.v_tilde_x = x.v_tilde_x + dt * (F_rx - F_fy * sd + vp.m * x.v_tilde_y * x.omega) / vp.m;
  n.v_tilde_y = x.v_tilde_y + dt * (F_ry + F_fy * cd - vp.m * x.v_tilde_x * x.omega) / vp.m;
  n.omega = x.omega + dt * (F_fy * vp.l_f * cd - F_ry * vp.l_r) / vp.I_z;

  // Partials of the Frenet velocity vx_f. kappa follows the planner's lookup
  // slope through p_x.
  const double ddenom_dpx = -x.p_y * dkappa_dpx;
  const double dvxf_dpx = -num * ddenom_dpx / (denom * denom);
  const double dvxf_dpy = num * kappa / (denom * denom);
  const double dvxf_dphi = (-x.v_tilde_x * s - x.v_tilde_y * c) / denom;
  const double dvxf_dvx = c / denom;
  const double dvxf_dvy = -s / denom;

  A.setIdentity();
  // p_x row
  A(0, 0) += dt * dvxf_dpx;
  A(0, 1) = dt * dvxf_dpy;
  A(0, 2) = dt * dvxf_dphi;
  A(0, 3) = dt * dvxf_dvx;
  A(0, 4) = dt * dvxf_dvy;
  // p_y row
  A(1, 2) = dt * num;
  A(1, 3) = dt * s;
  A(1, 4) = dt * c;
  // phi row: d/dt phi = omega - kappa(p_x) * vx_f
  A(2, 0) = -dt * (dkappa_dpx * vx_f + kappa * dvxf_dpx);
  A(2, 1) = -dt * kappa * dvxf_dpy;
  A(2, 2) += -dt * kappa * dvxf_dphi;
  A(2, 3) = -dt * kappa * dvxf_dvx;
  A(2, 4) = -dt * kappa * dvxf_dvy;
  A(2, 5) = dt;
  // v_tilde_x row
  A(3, 3) += dt * (dFrx_dvx - dFfy * daf_dvx * sd) / vp.m;
  A(3, 4) = dt * (-dFfy * daf_dvy * sd + vp.m * x.omega) / vp.m;
  A(3, 5) = dt * (-dFfy * daf_dw * sd + vp.m * x.v_tilde_y) / vp.m;
  // v_tilde_y row
  A(4, 3) = dt * (dFry * dar_dvx + dFfy * daf_dvx * cd - vp.m * x.omega) / vp.m;
  A(4, 4) += dt * (dFry * dar_dvy + dFfy * daf_dvy * cd) / vp.m;
  A(4, 5) = dt * (dFry * dar_dw + dFfy * daf_dw * cd - vp.m * x.v_tilde_x) / vp.m;
  // omega row
  A(5, 3) = dt * (dFfy * daf_dvx * vp.l_f * cd - dFry * dar_dvx * vp.l_r) / vp.I_z;
  A(5, 4) = dt * (dFfy * daf_dvy * vp.l_f * cd - dFry * dar_dvy * vp.l_r) / vp.I_z;
  A(5, 5) += dt * (dFfy * daf_dw * vp.l_f * cd - dFry * dar_dw * vp.l_r) / vp.I_z;

  B.setZero();
  B(3, 0) = dt * dFrx_dd / vp.m;
  B(3, 1) = dt * (-dFfy * sd - F_fy * cd) / vp.m;
  B(4, 1) = dt * (dFfy * cd - F_fy * sd) / vp.m;
  B(5, 1) = dt * (dFfy * vp.l_f * cd - F_fy * vp.l_f * sd) / vp.I_z;
  return n;
}

std::vector<CarState> apply_interaction_rules(std::vector<CarState> states,
                                              const InteractionConfig& cfg,
                                              const Track& track) {
  const std::vector<CarState> snapshot = states;
  const double len = track.total_length();

  const auto global_pos = [&](const CarState& c) {
    double px = c.p_x;
    if (!track.closed()) px = std::clamp(px, 0.0, len);
    return track.frenet_to_global(px, c.p_y);
  };

  // Collision rule first, decided on the snapshot.
  for (std::size_t i = 0; i < snapshot.size(); ++i) {
    for (std::size_t j = i + 1; j < snapshot.size(); ++j) {
      const double dist = (global_pos(snapshot[i]) - global_pos(snapshot[j])).norm();
      if (dist >= cfg.unsafe_dist) continue;
      const bool i_leads = snapshot[i].p_x >= snapshot[j].p_x;  // tie: lower index leads
      const std::size_t lead = i_leads ? i : j;
      const std::size_t trail = i_leads ? j : i;
      states[lead].v_tilde_x *= 0.5;
      states[trail].v_tilde_x /= 3.0;
    }
  }

  // Off-track rule: slow down, re-align with the track, clamp to the edge.
  const double half = 0.5 * cfg.w_max;
  for (auto& c : states) {
    if (std::abs(c.p_y) > half) {
      c.v_tilde_x *= 0.5;
      c.phi = 0.0;
      c.p_y = std::clamp(c.p_y, -half, half);
    }
  }
  return states;
}

}  // namespace apexgame
