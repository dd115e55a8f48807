#include "apexgame/equilibrium.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "apexgame/errors.hpp"
#include "apexgame/util.hpp"

namespace apexgame {

namespace {

Eigen::VectorXd theta_to_vec(const std::vector<PolicyParams>& theta) {
  Eigen::VectorXd v(5 * static_cast<Eigen::Index>(theta.size()));
  Eigen::Index k = 0;
  for (const auto& th : theta) {
    for (const double x : th.as_array()) v[k++] = x;
  }
  return v;
}

std::vector<PolicyParams> vec_to_theta(const Eigen::VectorXd& v) {
  std::vector<PolicyParams> theta(static_cast<std::size_t>(v.size() / 5));
  for (std::size_t i = 0; i < theta.size(); ++i) {
    std::array<double, 5> a;
    for (int j = 0; j < 5; ++j) a[static_cast<std::size_t>(j)] = v[static_cast<Eigen::Index>(5 * i + j)];
    theta[i] = PolicyParams::from_array(a);
  }
  return theta;
}

double ego_return(const RaceContext& ctx, const std::vector<CarState>& x,
                  const std::vector<PolicyParams>& theta, int i, int horizon) {
  const RaceRecord rec = rollout(ctx, x, theta, horizon, 0);
  std::vector<double> us;
  us.reserve(rec.utilities.size());
  for (const auto& frame : rec.utilities) us.push_back(frame[static_cast<std::size_t>(i)]);
  return discounted_return(us, ctx.game.gamma);
}

}  // namespace

Eigen::VectorXd argmax_box(const std::function<double(const Eigen::VectorXd&)>& f,
                           const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& grad,
                           const Eigen::VectorXd& x0, const Eigen::VectorXd& lo,
                           const Eigen::VectorXd& hi, const ArgmaxConfig& cfg,
                           double* best_value) {
  const auto project = [&](Eigen::VectorXd v) { return v.cwiseMax(lo).cwiseMin(hi); };

  Eigen::VectorXd best = project(x0);
  double best_f = f(best);

  Rng rng(splitmix64(cfg.seed ^ 0xa59a));
  for (int r = 0; r <= cfg.restarts; ++r) {
    Eigen::VectorXd x = best;
    if (r > 0) {
      for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = rng.uniform(lo[i], hi[i]);
    } else {
      x = project(x0);
    }
    double fx = f(x);
    double step = cfg.learning_rate;
    for (int it = 0; it < cfg.max_iters; ++it) {
      const Eigen::VectorXd g = grad(x);
      if (!g.allFinite()) break;
      bool moved = false;
      for (int bt = 0; bt < 20; ++bt) {
        const Eigen::VectorXd trial = project(x + step * g);
        const double ft = f(trial);
        if (ft > fx && (trial - x).lpNorm<Eigen::Infinity>() > 0.0) {
          x = trial;
          fx = ft;
          moved = true;
          if (bt == 0) step *= 1.3;
          break;
        }
        step *= 0.5;
        if (step < 1e-14) break;
      }
      if (!moved) break;
    }
    if (fx > best_f) {
      best_f = fx;
      best = x;
    }
  }
  if (best_value != nullptr) *best_value = best_f;
  return best;
}

std::vector<PolicyParams> maximize_potential(const Mlp& phi,
                                             const std::vector<CarState>& x,
                                             const Track& track,
                                             const std::vector<PolicyParams>& current,
                                             int ego, const ThetaBox& box,
                                             const ArgmaxConfig& cfg, double* phi_value) {
  const Eigen::VectorXd feats = state_features(x, track);
  const Eigen::Index n_theta = 5 * static_cast<Eigen::Index>(current.size());

  Eigen::VectorXd lo(n_theta), hi(n_theta);
  const auto bl = box.lo.as_array(), bh = box.hi.as_array();
  const Eigen::VectorXd cur = theta_to_vec(current);
  for (Eigen::Index k = 0; k < n_theta; ++k) {
    if (cfg.ego_block_only &&
        (k < 5 * static_cast<Eigen::Index>(ego) || k >= 5 * (static_cast<Eigen::Index>(ego) + 1))) {
      lo[k] = hi[k] = cur[k];  // frozen blocks
    } else {
      lo[k] = bl[static_cast<std::size_t>(k % 5)];
      hi[k] = bh[static_cast<std::size_t>(k % 5)];
    }
  }

  const auto assemble = [&](const Eigen::VectorXd& tv) {
    Eigen::VectorXd in(feats.size() + n_theta);
    in.head(feats.size()) = feats;
    in.tail(n_theta) = tv;
    return in;
  };
  const auto f = [&](const Eigen::VectorXd& tv) { return phi.forward(assemble(tv))[0]; };
  const auto g = [&](const Eigen::VectorXd& tv) {
    return phi.input_gradient(assemble(tv)).tail(n_theta).eval();
  };

  const Eigen::VectorXd best = argmax_box(f, g, cur, lo, hi, cfg, phi_value);
  return vec_to_theta(best);
}

RegretReport nash_regret(const RaceContext& ctx, const std::vector<CarState>& x,
                         const std::vector<PolicyParams>& theta_star, int i,
                         RegretMode mode, int budget, const Mlp* value_net,
                         double value_range, int horizon, std::uint64_t seed,
                         int state_id, unsigned n_threads) {
  Rng rng(splitmix64(seed ^ 0x4e672e7ULL));
  std::vector<PolicyParams> candidates;
  candidates.push_back(theta_star[static_cast<std::size_t>(i)]);
  for (int c = 1; c < budget; ++c) candidates.push_back(ctx.game.theta_box.sample(rng));

  std::vector<double> values(candidates.size());
  const auto eval_candidate = [&](std::size_t c) {
    std::vector<PolicyParams> theta = theta_star;
    theta[static_cast<std::size_t>(i)] = candidates[c];
    if (mode == RegretMode::kRollout) {
      values[c] = ego_return(ctx, x, theta, i, horizon);
    } else {
      values[c] = value_net->forward(state_theta_features(x, theta, *ctx.track))[0];
    }
  };
  if (mode == RegretMode::kRollout) {
    parallel_for(candidates.size(), eval_candidate, n_threads);
  } else {
    for (std::size_t c = 0; c < candidates.size(); ++c) eval_candidate(c);
  }

  RegretReport rep;
  rep.state_id = state_id;
  rep.candidate_count = static_cast<int>(candidates.size());
  const double star = values[0];
  rep.regret = *std::max_element(values.begin(), values.end()) - star;
  rep.regret_rel = value_range > 0.0 ? rep.regret / value_range : 0.0;
  return rep;
}

double certify_prop1(double lambda, double alpha_hat) { return lambda + alpha_hat; }

std::vector<PolicyParams> ibr(const RaceContext& ctx, const std::vector<CarState>& x,
                              int horizon, int rounds, std::vector<PolicyParams> theta,
                              int budget, std::uint64_t seed, unsigned n_threads) {
  const int n = static_cast<int>(theta.size());
  const auto bl = ctx.game.theta_box.lo.as_array();
  const auto bh = ctx.game.theta_box.hi.as_array();
  (void)seed;  // candidate grids are deterministic

  for (int round = 0; round < rounds; ++round) {
    for (int car = 0; car < n; ++car) {
      // 3 values per parameter around the current block, clamped to the box
      std::array<std::array<double, 3>, 5> axes;
      const auto cur = theta[static_cast<std::size_t>(car)].as_array();
      for (std::size_t p = 0; p < 5; ++p) {
        const double step = 0.25 * (bh[p] - bl[p]);
        axes[p] = {std::clamp(cur[p] - step, bl[p], bh[p]), cur[p],
                   std::clamp(cur[p] + step, bl[p], bh[p])};
      }
      std::vector<PolicyParams> candidates;
      candidates.reserve(243);
      for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b)
          for (int c = 0; c < 3; ++c)
            for (int d = 0; d < 3; ++d)
              for (int e = 0; e < 3; ++e) {
                candidates.push_back(PolicyParams::from_array(
                    {axes[0][static_cast<std::size_t>(a)], axes[1][static_cast<std::size_t>(b)],
                     axes[2][static_cast<std::size_t>(c)], axes[3][static_cast<std::size_t>(d)],
                     axes[4][static_cast<std::size_t>(e)]}));
              }
      if (budget > 0 && static_cast<int>(candidates.size()) > budget) {
        // deterministic stride subsample, always keeping the current theta
        std::vector<PolicyParams> kept;
        kept.reserve(static_cast<std::size_t>(budget));
        kept.push_back(theta[static_cast<std::size_t>(car)]);
        const double stride = static_cast<double>(candidates.size()) / (budget - 1);
        for (int k = 0; k + 1 < budget; ++k) {
          kept.push_back(candidates[static_cast<std::size_t>(k * stride)]);
        }
        candidates = std::move(kept);
      }

      std::vector<double> values(candidates.size());
      parallel_for(
          candidates.size(),
          [&](std::size_t c) {
            std::vector<PolicyParams> trial = theta;
            trial[static_cast<std::size_t>(car)] = candidates[c];
            values[c] = ego_return(ctx, x, trial, car, horizon);
          },
          n_threads);
      const std::size_t best =
          static_cast<std::size_t>(std::max_element(values.begin(), values.end()) - values.begin());
      theta[static_cast<std::size_t>(car)] = candidates[best];
    }
  }
  return theta;
}

RaceRecord race(const RaceContext& ctx, const std::vector<ControllerSpec>& specs,
                const std::vector<CarState>& start, int T, std::uint64_t seed) {
  const int n = static_cast<int>(specs.size());
  std::vector<PolicyParams> theta(static_cast<std::size_t>(n));
  Rng rng(splitmix64(seed ^ 0x2acecaULL));
  for (int i = 0; i < n; ++i) {
    const ControllerSpec& spec = specs[static_cast<std::size_t>(i)];
    theta[static_cast<std::size_t>(i)] = spec.kind == ControllerSpec::Kind::kRandom
                                             ? ctx.game.theta_box.sample(rng)
                                             : spec.fixed_theta;
  }

  // per-car warm starts for the potential argmax
  std::vector<std::vector<PolicyParams>> warm(static_cast<std::size_t>(n), theta);

  const ThetaHook hook = [&](int t, const std::vector<CarState>& joint,
                             std::vector<PolicyParams>& th) {
    for (int i = 0; i < n; ++i) {
      const ControllerSpec& spec = specs[static_cast<std::size_t>(i)];
      const int cadence = std::max(1, spec.replan_every);
      if (t % cadence != 0) continue;
      if (spec.kind == ControllerSpec::Kind::kPotential) {
        ArgmaxConfig acfg = spec.argmax;
        acfg.seed = splitmix64(seed ^ (0x1000ULL * static_cast<std::uint64_t>(t) + static_cast<std::uint64_t>(i)));
        warm[static_cast<std::size_t>(i)][static_cast<std::size_t>(i)] = th[static_cast<std::size_t>(i)];
        const std::vector<PolicyParams> sol =
            maximize_potential(*spec.phi, joint, *ctx.track, warm[static_cast<std::size_t>(i)],
                               i, ctx.game.theta_box, acfg);
        warm[static_cast<std::size_t>(i)] = sol;
        th[static_cast<std::size_t>(i)] = sol[static_cast<std::size_t>(i)];
      } else if (spec.kind == ControllerSpec::Kind::kIbr) {
        const std::vector<PolicyParams> sol =
            ibr(ctx, joint, spec.ibr_horizon, spec.ibr_rounds, th, spec.ibr_budget, seed);
        th[static_cast<std::size_t>(i)] = sol[static_cast<std::size_t>(i)];
      }
    }
  };

  bool needs_hook = false;
  for (const auto& spec : specs) {
    needs_hook = needs_hook || spec.kind == ControllerSpec::Kind::kPotential ||
                 spec.kind == ControllerSpec::Kind::kIbr;
  }
  RaceRecord rec = rollout(ctx, start, theta, T, seed, needs_hook ? hook : ThetaHook{});
  return rec;
}

}  // namespace apexgame
