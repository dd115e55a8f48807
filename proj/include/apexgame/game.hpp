#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "apexgame/dynamics.hpp"
#include "apexgame/policy.hpp"
#include "apexgame/raceline.hpp"
#include "apexgame/track.hpp"

namespace apexgame {

// Frenet box a car may start in.
struct StartRegion {
  double p_x_lo = 0.0, p_x_hi = 10.0;
  double p_y_lo = -1.5, p_y_hi = 1.5;
};

struct GameConfig {
  int n_cars = 3;
  double gamma = 0.99;
  double dt = 0.1;
  int T = 200;  // steps per race
  ThetaBox theta_box;
  double unsafe_dist = 1.0;
  std::vector<StartRegion> start_regions{{30.0, 40.0, -1.5, 1.5},
                                         {15.0, 25.0, -1.5, 1.5},
                                         {0.0, 10.0, -1.5, 1.5}};
  double start_speed_lo = 4.0;
  double start_speed_hi = 8.0;
  // Shift the whole start grid by a per-race random arc offset (closed tracks
  // only) so datasets cover every part of the lap.
  bool randomize_start_anchor = false;
};

// Everything a race needs besides per-race inputs. The referenced objects
// must outlive the context.
struct RaceContext {
  const Track* track = nullptr;
  const RaceLine* raceline = nullptr;  // with velocity profile applied
  const VehicleParams* vehicle = nullptr;
  MpcConfig mpc;
  GameConfig game;
};

struct RaceRecord {
  int race_id = 0;
  std::uint64_t seed = 0;
  std::vector<PolicyParams> theta;
  std::vector<std::vector<CarState>> states;        // T+1 joint frames
  std::vector<std::vector<ControlInput>> controls;  // T joint frames
  std::vector<std::vector<double>> utilities;       // T frames, one entry per car
  int winner = 0;
};

// Relative-progress reward of car i for the transition prev -> next,
// evaluated on lap-unwrapped longitudinal positions.
double utility(const std::vector<CarState>& prev, const std::vector<CarState>& next, int i);

double discounted_return(std::span<const double> utilities, double gamma);

// Called before each step; may rewrite the per-car policy parameters (the
// online controllers hook in here).
using ThetaHook =
    std::function<void(int t, const std::vector<CarState>&, std::vector<PolicyParams>&)>;

// Simulates one race: per step each car's MPC policy acts on the joint state,
// the dynamics advance each car, then the interaction rules apply.
// Deterministic given its inputs; the seed is recorded, not consumed.
RaceRecord rollout(const RaceContext& ctx, const std::vector<CarState>& start,
                   std::vector<PolicyParams> theta, int T, std::uint64_t seed,
                   const ThetaHook& hook = nullptr);

// Start states sampled from the configured regions (random region order,
// pairwise global distance > unsafe_dist). Throws StartSamplingFailed after
// bounded retries.
std::vector<CarState> sample_starts(const RaceContext& ctx, Rng& rng);

// Simulated races with theta drawn uniformly from the box and starts from
// sample_starts; race r uses the RNG stream derived from (seed, r). Races run
// on a worker pool; outputs are ordered by race id.
std::vector<RaceRecord> generate_races(const RaceContext& ctx, int n_races,
                                       std::uint64_t seed, unsigned n_threads = 0);

}  // namespace apexgame
