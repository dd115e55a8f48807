#include "apexgame/game.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "apexgame/errors.hpp"
#include "apexgame/util.hpp"

namespace apexgame {

double utility(const std::vector<CarState>& prev, const std::vector<CarState>& next, int i) {
  // with no opponents the lead reduces to plain progress
  const auto lead = [i](const std::vector<CarState>& joint) {
    if (joint.size() == 1) return joint.front().p_x;
    double best = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < static_cast<int>(joint.size()); ++j) {
      if (j != i) best = std::max(best, joint[static_cast<std::size_t>(j)].p_x);
    }
    return joint[static_cast<std::size_t>(i)].p_x - best;
  };
  return lead(next) - lead(prev);
}

double discounted_return(std::span<const double> utilities, double gamma) {
  double sum = 0.0;
  double g = 1.0;
  for (const double u : utilities) {
    sum += g * u;
    g *= gamma;
  }
  return sum;
}

RaceRecord rollout(const RaceContext& ctx, const std::vector<CarState>& start,
                   std::vector<PolicyParams> theta, int T, std::uint64_t seed,
                   const ThetaHook& hook) {
  const int n = static_cast<int>(start.size());
  RaceRecord rec;
  rec.seed = seed;
  rec.states.reserve(static_cast<std::size_t>(T) + 1);
  rec.controls.reserve(static_cast<std::size_t>(T));
  rec.utilities.reserve(static_cast<std::size_t>(T));
  rec.states.push_back(start);

  InteractionConfig icfg;
  icfg.unsafe_dist = ctx.game.unsafe_dist;
  icfg.w_max = ctx.track->w_max();

  std::vector<PolicyController> controllers;
  controllers.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    controllers.emplace_back(ctx.track, ctx.raceline, ctx.vehicle, ctx.mpc);
  }

  std::vector<CarState> joint = start;
  for (int t = 0; t < T; ++t) {
    if (hook) hook(t, joint, theta);

    std::vector<ControlInput> controls(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      controls[static_cast<std::size_t>(i)] =
          controllers[static_cast<std::size_t>(i)].act(joint, i, theta[static_cast<std::size_t>(i)]);
    }

    std::vector<CarState> next(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      const auto k = static_cast<std::size_t>(i);
      next[k] = step(joint[k], controls[k], *ctx.vehicle,
                     ctx.track->kappa_at(joint[k].p_x), ctx.game.dt);
    }
    next = apply_interaction_rules(std::move(next), icfg, *ctx.track);

    std::vector<double> us(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) us[static_cast<std::size_t>(i)] = utility(joint, next, i);

    rec.controls.push_back(std::move(controls));
    rec.utilities.push_back(std::move(us));
    joint = std::move(next);
    rec.states.push_back(joint);
  }

  rec.theta = std::move(theta);
  rec.winner = 0;
  for (int i = 1; i < n; ++i) {
    if (joint[static_cast<std::size_t>(i)].p_x > joint[static_cast<std::size_t>(rec.winner)].p_x) {
      rec.winner = i;
    }
  }
  return rec;
}

std::vector<CarState> sample_starts(const RaceContext& ctx, Rng& rng) {
  const int n = ctx.game.n_cars;
  const auto& regions = ctx.game.start_regions;
  if (regions.empty()) throw ValidationError("no start regions configured");

  // random region order; region r holds car slot r (mod #regions)
  std::vector<std::size_t> order(regions.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(order);

  double anchor = 0.0;
  if (ctx.game.randomize_start_anchor && ctx.track->closed()) {
    anchor = rng.uniform(0.0, ctx.track->total_length());
  }

  for (int attempt = 0; attempt < 1000; ++attempt) {
    std::vector<CarState> starts(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      const StartRegion& reg = regions[order[static_cast<std::size_t>(i) % order.size()]];
      auto& c = starts[static_cast<std::size_t>(i)];
      c.p_x = anchor + rng.uniform(reg.p_x_lo, reg.p_x_hi);
      c.p_y = rng.uniform(reg.p_y_lo, reg.p_y_hi);
      c.phi = 0.0;
      c.v_tilde_x = rng.uniform(ctx.game.start_speed_lo, ctx.game.start_speed_hi);
      c.v_tilde_y = 0.0;
      c.omega = 0.0;
    }
    bool ok = true;
    for (int i = 0; i < n && ok; ++i) {
      for (int j = i + 1; j < n && ok; ++j) {
        const Eigen::Vector2d a = ctx.track->frenet_to_global(
            starts[static_cast<std::size_t>(i)].p_x, starts[static_cast<std::size_t>(i)].p_y);
        const Eigen::Vector2d b = ctx.track->frenet_to_global(
            starts[static_cast<std::size_t>(j)].p_x, starts[static_cast<std::size_t>(j)].p_y);
        ok = (a - b).norm() > ctx.game.unsafe_dist;
      }
    }
    if (ok) return starts;
  }
  throw StartSamplingFailed("could not place " + std::to_string(n) +
                            " cars without overlap after 1000 attempts");
}

std::vector<RaceRecord> generate_races(const RaceContext& ctx, int n_races,
                                       std::uint64_t seed, unsigned n_threads) {
  if (n_races < 1) throw ValidationError("n_races must be >= 1");
  std::vector<RaceRecord> records(static_cast<std::size_t>(n_races));
  parallel_for(
      static_cast<std::size_t>(n_races),
      [&](std::size_t r) {
        Rng rng = Rng::derive(seed, r);
        std::vector<PolicyParams> theta(static_cast<std::size_t>(ctx.game.n_cars));
        for (auto& th : theta) th = ctx.game.theta_box.sample(rng);
        const std::vector<CarState> starts = sample_starts(ctx, rng);
        records[r] = rollout(ctx, starts, std::move(theta), ctx.game.T,
                             splitmix64(seed ^ splitmix64(r)));
        records[r].race_id = static_cast<int>(r);
      },
      n_threads);
  return records;
}

}  // namespace apexgame
