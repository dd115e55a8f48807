#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "apexgame/game.hpp"
#include "apexgame/learning.hpp"
#include "apexgame/mlp.hpp"

namespace apexgame {

struct ArgmaxConfig {
  double learning_rate = 1e-4;
  int max_iters = 1000;
  int restarts = 2;
  bool ego_block_only = false;  // restrict the search to the ego's theta block
  std::uint64_t seed = 0;
};

// Projected gradient ascent of f over the box [lo, hi], warm-started at x0
// plus cfg.restarts random restarts. The returned point's value is never
// below f(x0).
Eigen::VectorXd argmax_box(const std::function<double(const Eigen::VectorXd&)>& f,
                           const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& grad,
                           const Eigen::VectorXd& x0, const Eigen::VectorXd& lo,
                           const Eigen::VectorXd& hi, const ArgmaxConfig& cfg,
                           double* best_value = nullptr);

// theta* maximizing Phi(x, .) over the joint parameter box, warm-started at
// `current`. With ego_block_only only the ego block moves; either way the
// full joint argmax is computed and the caller keeps the blocks it controls.
std::vector<PolicyParams> maximize_potential(const Mlp& phi,
                                             const std::vector<CarState>& x,
                                             const Track& track,
                                             const std::vector<PolicyParams>& current,
                                             int ego, const ThetaBox& box,
                                             const ArgmaxConfig& cfg,
                                             double* phi_value = nullptr);

enum class RegretMode { kValueNet, kRollout };

struct RegretReport {
  int state_id = 0;
  double regret = 0.0;
  double regret_rel = 0.0;
  int candidate_count = 0;
};

// Best unilateral improvement available to car i against theta_star, over a
// random candidate set of `budget` draws plus theta_star's own block.
// kValueNet scores candidates with the value net; kRollout scores them with
// truncated deterministic rollouts of `horizon` steps.
RegretReport nash_regret(const RaceContext& ctx, const std::vector<CarState>& x,
                         const std::vector<PolicyParams>& theta_star, int i,
                         RegretMode mode, int budget, const Mlp* value_net,
                         double value_range, int horizon, std::uint64_t seed,
                         int state_id = 0, unsigned n_threads = 0);

// Certified suboptimality of a potential argmax: epsilon = lambda + alpha.
double certify_prop1(double lambda, double alpha_hat);

// Round-robin iterated best response over truncated rollouts. Each car scans
// a grid of 3 values per parameter around its current theta (subsampled to
// `budget` candidates) and adopts the best reply; `rounds` full passes.
std::vector<PolicyParams> ibr(const RaceContext& ctx, const std::vector<CarState>& x,
                              int horizon, int rounds, std::vector<PolicyParams> theta,
                              int budget, std::uint64_t seed, unsigned n_threads = 0);

struct ControllerSpec {
  enum class Kind { kFixed, kRandom, kPotential, kIbr };
  Kind kind = Kind::kFixed;
  PolicyParams fixed_theta;       // kFixed
  const Mlp* phi = nullptr;       // kPotential
  ArgmaxConfig argmax;            // kPotential
  int replan_every = 10;          // kPotential / kIbr, in steps
  int ibr_rounds = 6;             // kIbr
  int ibr_budget = 27;            // kIbr
  int ibr_horizon = 20;           // kIbr, steps
};

// One race with per-car controllers. Fixed controllers keep their theta, so
// an all-fixed race reduces exactly to game::rollout. Potential controllers
// re-solve the potential argmax every replan_every steps with the previous
// solution as the warm start; IBR controllers re-plan on the same cadence.
RaceRecord race(const RaceContext& ctx, const std::vector<ControllerSpec>& specs,
                const std::vector<CarState>& start, int T, std::uint64_t seed);

}  // namespace apexgame
