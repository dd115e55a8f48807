#include "apexgame/policy.hpp"

#include <cmath>

#include "apexgame/errors.hpp"
#include "apexgame/util.hpp"
#include "doctest.h"
#include "test_helpers.hpp"

using namespace apexgame;
using apexgame::testing::ring_track;
using apexgame::testing::s_track;
using apexgame::testing::straight_track;

namespace {

// Raceline pinned to the centerline with a constant speed, for controlled
// policy tests.
RaceLine centerline_raceline(const Track& t, double v) {
  RaceLine rl;
  rl.closed = t.closed();
  const std::size_t n = t.size();
  rl.x.resize(n);
  rl.y.resize(n);
  rl.s = t.arc_length();
  rl.psi = t.tangent_angle();
  rl.kappa = t.curvature();
  rl.eta.assign(n, 0.0);
  rl.v_x.assign(n, v);
  rl.a_x.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    rl.x[i] = t.samples()[i].x;
    rl.y[i] = t.samples()[i].y;
  }
  return rl;
}

// Independent oracle for the overtake and blocking shifts: a direct scalar
// transcription of the reference-shaping formulas, written separately from
// the implementation.
struct OracleOpponent {
  bool present;
  double p_y, v;
  double p_x0;
};

double oracle_overtake_k(double ego_py, double pert_px_k, const OracleOpponent& opp,
                         double s1, double s2, int k, double dt) {
  if (!opp.present) return 0.0;
  const double diff = ego_py - opp.p_y;
  const double sgn = diff >= 0.0 ? 1.0 : -1.0;
  const double dpx = pert_px_k - (opp.p_x0 + k * dt * opp.v);
  const double inner = (s1 - std::abs(diff)) * std::exp(-s2 * dpx * dpx);
  return sgn * (inner > 0.0 ? inner : 0.0);
}

double oracle_blocking_k(double pert_px_k, double pert_py_k, double pert_vx_k,
                         const OracleOpponent& opp, double s2, double s3, int k,
                         double dt) {
  if (!opp.present) return 0.0;
  const double opp_px_k = opp.p_x0 + k * dt * opp.v;
  if (pert_vx_k > opp.v) return 0.0;
  if (pert_px_k < opp_px_k) return 0.0;
  const double dpx = pert_px_k - opp_px_k;
  return (opp.p_y - pert_py_k) * (1.0 - std::exp(-s3 * (pert_vx_k - opp.v))) *
         std::exp(-s2 * dpx * dpx);
}

}  // namespace

TEST_CASE("perturbed raceline reproduces its source at zeta = 1") {
  const Track t = s_track();
  const RaceLine rl = centerline_raceline(t, 8.0);
  CarState car;
  car.p_x = 25.0;  // exactly on a raceline sample
  car.p_y = 0.0;
  const int K = 15;
  const double dt = 0.1;
  const PerturbedTrajectory pert = perturbed_raceline(t, rl, car, 1.0, K, dt);

  // independent time-sampling of the raceline itself
  double sigma = 25.0;
  for (int k = 0; k <= K; ++k) {
    CHECK(pert.p_x[static_cast<std::size_t>(k)] == doctest::Approx(sigma).epsilon(1e-9));
    CHECK(std::abs(pert.p_y[static_cast<std::size_t>(k)]) < 1e-9);
    sigma += 8.0 * dt;
  }
}

TEST_CASE("perturbed raceline with zeta = 0 stays at the anchor") {
  const Track t = straight_track();
  const RaceLine rl = centerline_raceline(t, 10.0);
  CarState car;
  car.p_x = 30.3;
  car.p_y = 1.0;
  const PerturbedTrajectory pert = perturbed_raceline(t, rl, car, 0.0, 10, 0.1);
  for (std::size_t k = 0; k <= 10; ++k) {
    CHECK(pert.p_x[k] == doctest::Approx(30.3).epsilon(1e-12));
    CHECK(pert.p_y[k] == doctest::Approx(0.0).scale(1).epsilon(1e-12));
  }
}

TEST_CASE("perturbed raceline zeta scaling on a straight") {
  const Track t = straight_track(201, 1.0);
  const RaceLine rl = centerline_raceline(t, 10.0);
  CarState car;
  car.p_x = 50.0;
  const PerturbedTrajectory pert = perturbed_raceline(t, rl, car, 0.5, 3, 0.1);
  CHECK(pert.p_x[1] - pert.p_x[0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(pert.p_x[2] - pert.p_x[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(pert.p_x[3] - pert.p_x[0] == doctest::Approx(1.5).epsilon(1e-12));
}

TEST_CASE("overtake adjustment formula cases") {
  PerturbedTrajectory pert;
  const int K = 5;
  pert.p_x.assign(K + 1, 100.0);
  pert.p_y.assign(K + 1, 0.0);
  pert.v_x.assign(K + 1, 10.0);

  OpponentPrediction none;
  OpponentPrediction opp;
  opp.present = true;
  opp.v_x = 0.0;
  opp.p_x.assign(K + 1, 100.0);  // zero longitudinal gap at every k

  SUBCASE("lateral gap at or beyond s1 contributes nothing") {
    opp.p_y = -2.5;
    const auto shift = overtake_adjustment(0.0, pert, opp, none, 2.0, 0.1);
    for (double v : shift) CHECK(v == 0.0);
  }
  SUBCASE("large longitudinal gap decays to nothing") {
    opp.p_y = 0.0;
    for (int k = 0; k <= K; ++k) opp.p_x[static_cast<std::size_t>(k)] = 70.0;  // gap 30 m
    const auto shift = overtake_adjustment(1.0, pert, opp, none, 2.0, 0.1);
    for (double v : shift) {
      CHECK(v >= 0.0);
      CHECK(v < 1e-30);
    }
  }
  SUBCASE("head-to-head shift is s1 - |dy|") {
    opp.p_y = 0.0;
    const auto shift = overtake_adjustment(1.0, pert, opp, none, 2.0, 0.1);
    for (double v : shift) CHECK(v == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("per-opponent contribution never exceeds s1") {
    Rng rng(5);
    for (int trial = 0; trial < 200; ++trial) {
      opp.p_y = rng.uniform(-3.0, 3.0);
      const double s1 = rng.uniform(0.0, 4.0);
      const auto shift = overtake_adjustment(rng.uniform(-3.0, 3.0), pert, opp, none, s1,
                                             rng.uniform(0.0, 0.3));
      for (double v : shift) CHECK(std::abs(v) <= s1 + 1e-12);
    }
  }
}

TEST_CASE("blocking adjustment formula cases") {
  PerturbedTrajectory pert;
  const int K = 4;
  pert.p_x.assign(K + 1, 50.0);
  pert.p_y.assign(K + 1, 0.0);
  pert.v_x.assign(K + 1, 9.0);

  OpponentPrediction none;
  OpponentPrediction opp;
  opp.present = true;
  opp.p_y = 1.0;
  opp.v_x = 10.0;
  opp.p_x.assign(K + 1, 50.0);

  SUBCASE("faster ego never blocks") {
    PerturbedTrajectory fast = pert;
    fast.v_x.assign(K + 1, 11.0);
    const auto shift = blocking_adjustment(fast, none, opp, 0.1, 0.5);
    for (double v : shift) CHECK(v == 0.0);
  }
  SUBCASE("ego behind the opponent never blocks") {
    OpponentPrediction ahead = opp;
    ahead.p_x.assign(K + 1, 80.0);
    const auto shift = blocking_adjustment(pert, ahead, none, 0.1, 0.5);
    for (double v : shift) CHECK(v == 0.0);
  }
  SUBCASE("verbatim formula value") {
    // dy = 1, v gap = -1, s3 = 0.5: h = 1 * (1 - e^{0.5}) = -0.64872
    const auto shift = blocking_adjustment(pert, none, opp, 0.1, 0.5);
    for (double v : shift) CHECK(v == doctest::Approx(1.0 - std::exp(0.5)).epsilon(1e-9));
    const auto flipped = blocking_adjustment(pert, none, opp, 0.1, 0.5, true);
    for (std::size_t k = 0; k < flipped.size(); ++k) CHECK(flipped[k] == -shift[k]);
  }
}

TEST_CASE("reference shifts match the direct-evaluation oracle") {
  Rng rng(404);
  const double dt = 0.1;
  const int K = 12;
  for (int trial = 0; trial < 1000; ++trial) {
    PerturbedTrajectory pert;
    pert.p_x.resize(K + 1);
    pert.p_y.resize(K + 1);
    pert.v_x.resize(K + 1);
    double px = rng.uniform(0.0, 200.0);
    for (int k = 0; k <= K; ++k) {
      pert.p_x[static_cast<std::size_t>(k)] = px;
      px += rng.uniform(0.0, 2.5);
      pert.p_y[static_cast<std::size_t>(k)] = rng.uniform(-3.0, 3.0);
      pert.v_x[static_cast<std::size_t>(k)] = rng.uniform(0.0, 25.0);
    }
    const double ego_py = rng.uniform(-3.0, 3.0);
    const double s1 = rng.uniform(0.0, 4.0);
    const double s2 = rng.uniform(0.0, 0.3);
    const double s3 = rng.uniform(0.0, 1.0);

    OracleOpponent oracle[2];
    OpponentPrediction pred[2];
    for (int o = 0; o < 2; ++o) {
      // exercise absent slots, exact ties in p_y and speed, both orders in p_x
      oracle[o].present = rng.uniform() < 0.8;
      pred[o].present = oracle[o].present;
      oracle[o].p_y = rng.uniform() < 0.15 ? ego_py : rng.uniform(-3.0, 3.0);
      oracle[o].v = rng.uniform() < 0.15 ? pert.v_x[2] : rng.uniform(0.0, 25.0);
      oracle[o].p_x0 = rng.uniform() < 0.15 ? pert.p_x[0] : rng.uniform(0.0, 200.0);
      pred[o].p_y = oracle[o].p_y;
      pred[o].v_x = oracle[o].v;
      pred[o].p_x.resize(K + 1);
      for (int k = 0; k <= K; ++k) {
        pred[o].p_x[static_cast<std::size_t>(k)] = oracle[o].p_x0 + k * dt * oracle[o].v;
      }
    }

    const auto ot = overtake_adjustment(ego_py, pert, pred[0], pred[1], s1, s2);
    const auto bl = blocking_adjustment(pert, pred[0], pred[1], s2, s3);
    for (int k = 1; k <= K; ++k) {
      const std::size_t i = static_cast<std::size_t>(k);
      double ot_expect = 0.0, bl_expect = 0.0;
      for (int o = 0; o < 2; ++o) {
        ot_expect += oracle_overtake_k(ego_py, pert.p_x[i], oracle[o], s1, s2, k, dt);
        bl_expect += oracle_blocking_k(pert.p_x[i], pert.p_y[i], pert.v_x[i], oracle[o],
                                       s2, s3, k, dt);
      }
      CHECK(ot[i - 1] == doctest::Approx(ot_expect).epsilon(1e-9).scale(1.0));
      CHECK(bl[i - 1] == doctest::Approx(bl_expect).epsilon(1e-9).scale(1.0));
    }
  }
}

TEST_CASE("reference trajectory composition and clipping") {
  const Track t = straight_track(301, 1.0);
  const RaceLine rl = centerline_raceline(t, 10.0);
  MpcConfig cfg;
  cfg.w_max = t.w_max();
  PolicyParams theta;
  theta.zeta = 1.0;

  SUBCASE("solo car tracks the clipped perturbed raceline") {
    std::vector<CarState> joint(1);
    joint[0].p_x = 50.0;
    joint[0].p_y = 0.4;
    joint[0].v_tilde_x = 10.0;
    const ReferenceTrajectory ref = reference_trajectory(t, rl, joint, 0, theta, cfg);
    const PerturbedTrajectory pert =
        perturbed_raceline(t, rl, joint[0], theta.zeta, cfg.K, cfg.dt);
    for (int k = 1; k <= cfg.K; ++k) {
      CHECK(ref.p_x[k - 1] == pert.p_x[static_cast<std::size_t>(k)]);
      CHECK(ref.p_y[k - 1] == pert.p_y[static_cast<std::size_t>(k)]);
    }
  }

  SUBCASE("lateral reference is clipped to the track half width") {
    std::vector<CarState> joint(2);
    joint[0] = {50.0, 2.9, 0.0, 10.0, 0.0, 0.0};
    joint[1] = {51.0, 2.7, 0.0, 10.0, 0.0, 0.0};
    PolicyParams aggressive = theta;
    aggressive.s1 = 4.0;  // shift would exceed the track edge
    const ReferenceTrajectory ref = reference_trajectory(t, rl, joint, 0, aggressive, cfg);
    for (double y : ref.p_y) CHECK(std::abs(y) <= 0.5 * cfg.w_max + 1e-12);
    CHECK(ref.p_y[0] == doctest::Approx(0.5 * cfg.w_max).epsilon(1e-12));
  }

  SUBCASE("three-car reference equals pert + overtake + blocking") {
    std::vector<CarState> joint(3);
    joint[0] = {50.0, 0.5, 0.0, 10.0, 0.0, 0.0};
    joint[1] = {56.0, -0.5, 0.0, 8.0, 0.0, 0.0};
    joint[2] = {45.0, 1.0, 0.0, 12.0, 0.0, 0.0};
    const ReferenceTrajectory ref = reference_trajectory(t, rl, joint, 0, theta, cfg);

    const PerturbedTrajectory pert =
        perturbed_raceline(t, rl, joint[0], theta.zeta, cfg.K, cfg.dt);
    const OpponentPrediction ahead = predict_opponent(joint[1], t, cfg.K, cfg.dt);
    const OpponentPrediction behind = predict_opponent(joint[2], t, cfg.K, cfg.dt);
    const auto ot = overtake_adjustment(joint[0].p_y, pert, ahead, behind, theta.s1, theta.s2);
    const auto bl = blocking_adjustment(pert, ahead, behind, theta.s2, theta.s3);
    for (int k = 1; k <= cfg.K; ++k) {
      const std::size_t i = static_cast<std::size_t>(k);
      const double expect =
          std::clamp(pert.p_y[i] + ot[i - 1] + bl[i - 1], -0.5 * cfg.w_max, 0.5 * cfg.w_max);
      CHECK(ref.p_y[i - 1] == doctest::Approx(expect).epsilon(1e-12).scale(1.0));
    }
  }

  SUBCASE("s1 = 0 and s3 = 0 degenerate to the perturbed raceline") {
    std::vector<CarState> joint(3);
    joint[0] = {50.0, 0.5, 0.0, 10.0, 0.0, 0.0};
    joint[1] = {52.0, 0.4, 0.0, 9.0, 0.0, 0.0};
    joint[2] = {49.0, -0.4, 0.0, 11.0, 0.0, 0.0};
    PolicyParams passive = theta;
    passive.s1 = 0.0;
    passive.s3 = 0.0;
    const ReferenceTrajectory ref = reference_trajectory(t, rl, joint, 0, passive, cfg);
    const PerturbedTrajectory pert =
        perturbed_raceline(t, rl, joint[0], passive.zeta, cfg.K, cfg.dt);
    for (int k = 1; k <= cfg.K; ++k) {
      const std::size_t i = static_cast<std::size_t>(k);
      const double expect = std::clamp(pert.p_y[i], -0.5 * cfg.w_max, 0.5 * cfg.w_max);
      CHECK(ref.p_y[i - 1] == doctest::Approx(expect).epsilon(1e-12).scale(1.0));
    }
  }
}

TEST_CASE("reference mirror symmetry on a straight track") {
  const Track t = straight_track(301, 1.0);
  const RaceLine rl = centerline_raceline(t, 10.0);
  MpcConfig cfg;
  cfg.w_max = t.w_max();
  Rng rng(808);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<CarState> joint(3), mirrored(3);
    for (int i = 0; i < 3; ++i) {
      auto& c = joint[static_cast<std::size_t>(i)];
      c.p_x = rng.uniform(30.0, 120.0);
      c.p_y = rng.uniform(0.1, 2.5) * (rng.uniform() < 0.5 ? -1.0 : 1.0);
      c.phi = rng.uniform(-0.3, 0.3);
      c.v_tilde_x = rng.uniform(2.0, 15.0);
      c.v_tilde_y = rng.uniform(-1.0, 1.0);
      c.omega = rng.uniform(-0.5, 0.5);
      auto& m = mirrored[static_cast<std::size_t>(i)];
      m = c;
      m.p_y = -c.p_y;
      m.phi = -c.phi;
      m.v_tilde_y = -c.v_tilde_y;
      m.omega = -c.omega;
    }
    PolicyParams theta;
    theta.s1 = rng.uniform(0.0, 4.0);
    theta.s2 = rng.uniform(0.0, 0.2);
    theta.s3 = rng.uniform(0.0, 1.0);
    theta.zeta = rng.uniform(0.5, 1.2);
    const ReferenceTrajectory a = reference_trajectory(t, rl, joint, 0, theta, cfg);
    const ReferenceTrajectory b = reference_trajectory(t, rl, mirrored, 0, theta, cfg);
    for (int k = 0; k < cfg.K; ++k) {
      CHECK(a.p_x[static_cast<std::size_t>(k)] == b.p_x[static_cast<std::size_t>(k)]);
      CHECK(a.p_y[static_cast<std::size_t>(k)] == -b.p_y[static_cast<std::size_t>(k)]);
    }
  }
}

TEST_CASE("mpc adjoint gradient matches finite differences") {
  const Track t = s_track();
  const RaceLine rl = centerline_raceline(t, 9.0);
  MpcConfig cfg;
  cfg.K = 8;
  cfg.w_max = t.w_max();
  VehicleParams vp;
  Rng rng(21);

  for (int trial = 0; trial < 10; ++trial) {
    CarState x0;
    x0.p_x = rng.uniform(10.0, 80.0);
    x0.p_y = rng.uniform(-1.5, 1.5);
    x0.phi = rng.uniform(-0.2, 0.2);
    x0.v_tilde_x = rng.uniform(3.0, 12.0);
    x0.v_tilde_y = rng.uniform(-0.5, 0.5);
    x0.omega = rng.uniform(-0.3, 0.3);

    std::vector<CarState> joint{x0};
    PolicyParams theta;
    const ReferenceTrajectory ref = reference_trajectory(t, rl, joint, 0, theta, cfg);

    std::vector<OpponentPrediction> opps(1);
    opps[0] = predict_opponent({x0.p_x + rng.uniform(2.0, 8.0), rng.uniform(-2.0, 2.0),
                                0.0, 8.0, 0.0, 0.0},
                               t, cfg.K, cfg.dt);

    std::vector<ControlInput> u(static_cast<std::size_t>(cfg.K));
    for (auto& c : u) c = {rng.uniform(-0.5, 0.8), rng.uniform(-0.2, 0.2)};

    const auto grad = mpc_detail::gradient(t, x0, ref, opps, theta.q, vp, cfg, u);
    const double h = 1e-6;
    for (std::size_t k = 0; k < u.size(); ++k) {
      for (int c = 0; c < 2; ++c) {
        auto up = u, um = u;
        (c == 0 ? up[k].d : up[k].delta) += h;
        (c == 0 ? um[k].d : um[k].delta) -= h;
        const double fp = mpc_detail::objective(t, x0, ref, opps, theta.q, vp, cfg, up);
        const double fm = mpc_detail::objective(t, x0, ref, opps, theta.q, vp, cfg, um);
        const double fd = (fp - fm) / (2.0 * h);
        CHECK(grad[k][c] == doctest::Approx(fd).epsilon(2e-4).scale(1.0));
      }
    }
  }
}

TEST_CASE("mpc self-consistency: tracking its own rollout") {
  const Track t = straight_track(501, 1.0);
  const RaceLine rl = centerline_raceline(t, 10.0);
  VehicleParams vp;
  MpcConfig cfg;
  cfg.w_max = t.w_max();
  cfg.max_iters = 300;

  CarState x0;
  x0.p_x = 20.0;
  x0.v_tilde_x = 9.0;

  const ControlInput gen{0.3, 0.0};
  ReferenceTrajectory ref;
  CarState x = x0;
  for (int k = 1; k <= cfg.K; ++k) {
    x = step(x, gen, vp, t.kappa_at(x.p_x), cfg.dt);
    ref.p_x.push_back(x.p_x);
    ref.p_y.push_back(x.p_y);
  }

  const MpcSolution sol = mpc_solve(t, x0, ref, {}, 4.0, vp, cfg);
  CHECK(sol.objective <= 1e-2 * cfg.K);
  CHECK(std::abs(sol.u0.d - gen.d) <= 0.1 * (vp.d_max - vp.d_min));
  CHECK(std::abs(sol.u0.delta - gen.delta) <= 0.1 * (vp.delta_max - vp.delta_min));
}

TEST_CASE("mpc is unaffected by far-away opponents") {
  const Track t = straight_track(501, 1.0);
  const RaceLine rl = centerline_raceline(t, 10.0);
  VehicleParams vp;
  MpcConfig cfg;
  cfg.w_max = t.w_max();

  CarState x0;
  x0.p_x = 50.0;
  x0.p_y = 0.5;
  x0.v_tilde_x = 8.0;
  std::vector<CarState> joint{x0};
  const ReferenceTrajectory ref = reference_trajectory(t, rl, joint, 0, PolicyParams{}, cfg);

  std::vector<OpponentPrediction> far(2);
  far[0] = predict_opponent({x0.p_x + 100.0, 0.0, 0.0, 8.0, 0.0, 0.0}, t, cfg.K, cfg.dt);
  far[1] = predict_opponent({x0.p_x - 100.0, 0.0, 0.0, 8.0, 0.0, 0.0}, t, cfg.K, cfg.dt);

  const MpcSolution a = mpc_solve(t, x0, ref, {}, 4.0, vp, cfg);
  const MpcSolution b = mpc_solve(t, x0, ref, far, 4.0, vp, cfg);
  CHECK(a.objective == b.objective);
  for (std::size_t k = 0; k < a.controls.size(); ++k) {
    CHECK(a.controls[k].d == b.controls[k].d);
    CHECK(a.controls[k].delta == b.controls[k].delta);
  }
}

TEST_CASE("mpc keeps an already-optimal warm start") {
  const Track t = straight_track(501, 1.0);
  VehicleParams vp;
  MpcConfig cfg;
  cfg.K = 1;
  cfg.w_max = t.w_max();

  CarState x0;
  x0.p_x = 20.0;
  x0.v_tilde_x = 9.0;
  const std::vector<ControlInput> warm{{0.25, 0.0}};
  const CarState x1 = step(x0, warm[0], vp, 0.0, cfg.dt);
  ReferenceTrajectory ref;
  ref.p_x = {x1.p_x};
  ref.p_y = {x1.p_y};

  const MpcSolution sol = mpc_solve(t, x0, ref, {}, 4.0, vp, cfg, &warm, 0.0);
  CHECK(sol.objective == 0.0);
  CHECK(sol.controls[0].d == warm[0].d);
  CHECK(sol.controls[0].delta == warm[0].delta);
}

TEST_CASE("mpc monotone improvement and in-box controls") {
  const Track t = s_track();
  const RaceLine rl = centerline_raceline(t, 9.0);
  VehicleParams vp;
  MpcConfig cfg;
  cfg.w_max = t.w_max();
  cfg.max_iters = 12;
  Rng rng(62);

  for (int trial = 0; trial < 30; ++trial) {
    CarState x0;
    x0.p_x = rng.uniform(10.0, 100.0);
    x0.p_y = rng.uniform(-2.0, 2.0);
    x0.phi = rng.uniform(-0.3, 0.3);
    x0.v_tilde_x = rng.uniform(1.0, 14.0);
    x0.v_tilde_y = rng.uniform(-0.5, 0.5);
    x0.omega = rng.uniform(-0.3, 0.3);
    std::vector<CarState> joint{x0};
    const ReferenceTrajectory ref = reference_trajectory(t, rl, joint, 0, PolicyParams{}, cfg);

    std::vector<ControlInput> warm(static_cast<std::size_t>(cfg.K));
    for (auto& c : warm) c = {rng.uniform(-1.0, 1.0), rng.uniform(-0.4, 0.4)};
    const double delta_prev = rng.uniform(-0.3, 0.3);
    warm = mpc_detail::project(std::move(warm), vp, delta_prev);
    const double warm_obj =
        mpc_detail::objective(t, x0, ref, {}, 4.0, vp, cfg, warm);

    const MpcSolution sol = mpc_solve(t, x0, ref, {}, 4.0, vp, cfg, &warm, delta_prev);
    CHECK(sol.objective <= warm_obj);

    double prev = delta_prev;
    for (const auto& u : sol.controls) {
      CHECK(u.d >= vp.d_min);
      CHECK(u.d <= vp.d_max);
      CHECK(u.delta >= vp.delta_min - 1e-15);
      CHECK(u.delta <= vp.delta_max + 1e-15);
      CHECK(u.delta - prev >= vp.delta_rate_min - 1e-15);
      CHECK(u.delta - prev <= vp.delta_rate_max + 1e-15);
      prev = u.delta;
    }
  }
}

TEST_CASE("policy controller tracks the raceline closed loop") {
  const Track t = ring_track(60.0, 240, 8.0);
  const RaceLine geo = compute_raceline(t, 2.0);
  VelocityProfileConfig vcfg;
  vcfg.v_cap = 16.0;
  const RaceLine rl = with_profile(geo, velocity_profile(geo, vcfg, 0.9));

  VehicleParams vp;
  MpcConfig cfg;
  cfg.w_max = t.w_max();

  // start on the raceline at its profile speed
  CarState x0;
  x0.p_x = 0.0;
  x0.p_y = rl.eta[0];
  x0.v_tilde_x = rl.v_x[0];

  PolicyController ctl(&t, &rl, &vp, cfg);
  PolicyParams theta;
  theta.q = 6.0;
  theta.zeta = 1.0;

  std::vector<CarState> joint{x0};
  double worst = 0.0;
  for (int step_i = 0; step_i < 100; ++step_i) {
    const ControlInput u = ctl.act(joint, 0, theta);
    joint[0] = step(joint[0], u, vp, t.kappa_at(joint[0].p_x), cfg.dt);
    // lateral distance to the raceline at the car's arc position
    const PerturbedTrajectory anchor = perturbed_raceline(t, rl, joint[0], 0.0, 1, cfg.dt);
    worst = std::max(worst, std::abs(joint[0].p_y - anchor.p_y[0]));
  }
  CHECK(worst < 0.5);
}
