#pragma once

#include <array>
#include <optional>
#include <vector>

#include "apexgame/dynamics.hpp"
#include "apexgame/raceline.hpp"
#include "apexgame/track.hpp"
#include "apexgame/util.hpp"

namespace apexgame {

// The five scalars shaping one car's policy: tracking weight q, raceline
// speed scale zeta, overtake lateral reach s1 (m), longitudinal decay s2
// (1/m^2) and speed-gap sensitivity s3 (s/m).
struct PolicyParams {
  double q = 4.0;
  double zeta = 1.0;
  double s1 = 2.0;
  double s2 = 0.05;
  double s3 = 0.3;

  std::array<double, 5> as_array() const { return {q, zeta, s1, s2, s3}; }
  static PolicyParams from_array(const std::array<double, 5>& a) {
    return {a[0], a[1], a[2], a[3], a[4]};
  }
};

struct ThetaBox {
  PolicyParams lo{0.5, 0.5, 0.0, 0.001, 0.0};
  PolicyParams hi{10.0, 1.2, 4.0, 0.2, 1.0};

  PolicyParams clamp(const PolicyParams& p) const;
  PolicyParams sample(Rng& rng) const;
  bool contains(const PolicyParams& p, double tol = 1e-12) const;
};

struct MpcConfig {
  int K = 20;                    // planning horizon steps
  double dt = 0.1;               // s
  double p_x_min = 5.0;          // longitudinal separation, m
  double p_y_min = 2.5;          // lateral separation, m
  double w_max = 6.0;            // track width for the boundary constraint, m
  double penalty_weight = 400.0;  // soft-constraint scale
  int max_iters = 40;
  double tol = 1e-6;
  bool blocking_sign_flip = false;  // negate the blocking shift (see docs)
};

struct ReferenceTrajectory {
  std::vector<double> p_x, p_y;  // k = 1..K
};

// Time-sampled raceline points integrated from the anchor with zeta-scaled
// raceline velocities; index 0 is the anchor, so positions/velocities run
// k = 0..K.
struct PerturbedTrajectory {
  std::vector<double> p_x, p_y;  // Frenet positions
  std::vector<double> v_x;       // zeta-scaled Frenet longitudinal speed
};

// An opponent's predicted motion over the horizon: constant longitudinal
// speed, zero lateral speed. p_x has entries k = 0..K.
struct OpponentPrediction {
  bool present = false;
  double p_y = 0.0;
  double v_x = 0.0;
  std::vector<double> p_x;
};

PerturbedTrajectory perturbed_raceline(const Track& track, const RaceLine& raceline,
                                       const CarState& state, double zeta, int K,
                                       double dt);

OpponentPrediction predict_opponent(const CarState& opp, const Track& track, int K,
                                    double dt);

// Lateral shifts (k = 1..K) steering the reference away from nearby cars.
// ego_p_y and the opponents' p_y are the time-t values. sign(0) resolves to +1.
std::vector<double> overtake_adjustment(double ego_p_y, const PerturbedTrajectory& pert,
                                        const OpponentPrediction& ahead,
                                        const OpponentPrediction& behind, double s1,
                                        double s2);

// Lateral shifts (k = 1..K) moving the reference relative to cars the ego is
// ahead of but slower than.
std::vector<double> blocking_adjustment(const PerturbedTrajectory& pert,
                                        const OpponentPrediction& ahead,
                                        const OpponentPrediction& behind, double s2,
                                        double s3, bool sign_flip = false);

// Perturbed raceline plus overtake and blocking shifts, lateral component
// clipped to [-w_max/2, w_max/2].
ReferenceTrajectory reference_trajectory(const Track& track, const RaceLine& raceline,
                                         const std::vector<CarState>& joint, int ego,
                                         const PolicyParams& theta, const MpcConfig& cfg);

// Nearest car ahead of / behind the ego by longitudinal position. Cars tied
// with the ego count as behind. Returns indices or -1.
std::pair<int, int> nearest_opponents(const std::vector<CarState>& joint, int ego);

struct MpcSolution {
  ControlInput u0;
  std::vector<ControlInput> controls;  // K
  std::vector<CarState> planned;       // K+1, planned[0] = initial state
  double objective = 0.0;
  double constraint_residual = 0.0;  // max violation of track/separation constraints
  int iterations = 0;
};

// Single-shooting tracking MPC: projected gradient descent through the
// rolled-out dynamics with analytic adjoint gradients. Control boxes and
// steering-rate limits are enforced by projection; track and separation
// constraints enter as smooth hinge penalties. The returned objective never
// exceeds the warm start's (or the zero-control-delta sequence's when no warm
// start is given). Throws NonFiniteObjective when no finite-cost rollout is
// found.
MpcSolution mpc_solve(const Track& track, const CarState& state,
                      const ReferenceTrajectory& ref,
                      const std::vector<OpponentPrediction>& opponents, double q,
                      const VehicleParams& vp, const MpcConfig& cfg,
                      const std::vector<ControlInput>* warm = nullptr,
                      double delta_prev = 0.0);

// One MPC policy instance for one car. Keeps the warm-start cache (previous
// solution shifted by one step) and the previously applied steering angle.
// Not safe for concurrent calls on the same instance.
class PolicyController {
 public:
  PolicyController(const Track* track, const RaceLine* raceline, const VehicleParams* vp,
                   MpcConfig cfg)
      : track_(track), raceline_(raceline), vp_(vp), cfg_(cfg) {}

  ControlInput act(const std::vector<CarState>& joint, int ego, const PolicyParams& theta);
  const MpcSolution& last_solution() const { return last_; }
  void reset();

 private:
  const Track* track_;
  const RaceLine* raceline_;
  const VehicleParams* vp_;
  MpcConfig cfg_;
  std::vector<ControlInput> warm_;
  bool has_warm_ = false;
  double delta_prev_ = 0.0;
  MpcSolution last_;
};

namespace mpc_detail {

// Exposed for tests: objective evaluation, adjoint gradient and the
// projection onto the control boxes and steering-rate chain.
double objective(const Track& track, const CarState& x0, const ReferenceTrajectory& ref,
                 const std::vector<OpponentPrediction>& opponents, double q,
                 const VehicleParams& vp, const MpcConfig& cfg,
                 const std::vector<ControlInput>& controls,
                 std::vector<CarState>* states_out = nullptr,
                 double* residual_out = nullptr);

std::vector<Eigen::Vector2d> gradient(const Track& track, const CarState& x0,
                                      const ReferenceTrajectory& ref,
                                      const std::vector<OpponentPrediction>& opponents,
                                      double q, const VehicleParams& vp,
                                      const MpcConfig& cfg,
                                      const std::vector<ControlInput>& controls);

std::vector<ControlInput> project(std::vector<ControlInput> controls,
                                  const VehicleParams& vp, double delta_prev);

}  // namespace mpc_detail

}  // namespace apexgame
