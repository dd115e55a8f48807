#pragma once

#include "apexgame/game.hpp"
#include "test_helpers.hpp"

namespace apexgame::testing {

// Shared fixtures for race-level tests: a ring circuit with a profiled
// raceline and a light MPC config.
struct ContextFixture {
  Track track;
  RaceLine raceline;
  VehicleParams vehicle;
  RaceContext ctx;

  explicit ContextFixture(double radius = 60.0, int samples = 240, double w = 8.0,
                          int mpc_iters = 10)
      : track(ring_track(radius, samples, w)) {
    const RaceLine geometry = compute_raceline(track, 2.0);
    VelocityProfileConfig vcfg;
    vcfg.v_cap = 16.0;
    raceline = with_profile(geometry, velocity_profile(geometry, vcfg, 0.9));

    ctx.track = &track;
    ctx.raceline = &raceline;
    ctx.vehicle = &vehicle;
    ctx.mpc.w_max = track.w_max();
    ctx.mpc.max_iters = mpc_iters;
    ctx.game.n_cars = 3;
    ctx.game.T = 50;
  }
};

}  // namespace apexgame::testing
