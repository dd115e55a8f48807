#include "apexgame/policy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "apexgame/errors.hpp"

namespace apexgame {

namespace {

double sign_plus(double v) { return v < 0.0 ? -1.0 : 1.0; }  // sign(0) = +1

// Signed difference a - b wrapped into [-L/2, L/2) for closed tracks.
double signed_s_diff(double a, double b, const Track& track) {
  double d = a - b;
  if (track.closed()) {
    const double len = track.total_length();
    d = std::fmod(d, len);
    if (d < -0.5 * len) d += len;
    if (d >= 0.5 * len) d -= len;
  }
  return d;
}

}  // namespace

PolicyParams ThetaBox::clamp(const PolicyParams& p) const {
  const auto a = p.as_array(), l = lo.as_array(), h = hi.as_array();
  std::array<double, 5> out;
  for (std::size_t i = 0; i < 5; ++i) out[i] = std::clamp(a[i], l[i], h[i]);
  return PolicyParams::from_array(out);
}

PolicyParams ThetaBox::sample(Rng& rng) const {
  const auto l = lo.as_array(), h = hi.as_array();
  std::array<double, 5> out;
  for (std::size_t i = 0; i < 5; ++i) out[i] = rng.uniform(l[i], h[i]);
  return PolicyParams::from_array(out);
}

bool ThetaBox::contains(const PolicyParams& p, double tol) const {
  const auto a = p.as_array(), l = lo.as_array(), h = hi.as_array();
  for (std::size_t i = 0; i < 5; ++i) {
    if (a[i] < l[i] - tol || a[i] > h[i] + tol) return false;
  }
  return true;
}

PerturbedTrajectory perturbed_raceline(const Track& track, const RaceLine& raceline,
                                       const CarState& state, double zeta, int K,
                                       double dt) {
  const std::size_t n = raceline.size();
  const std::size_t n_seg = n - 1;
  const double s_local = track.wrap_s(state.p_x);

  // Project the car's Frenet position onto the raceline polyline in
  // (track arc length, lateral offset) space.
  double best_d2 = std::numeric_limits<double>::infinity();
  double sigma_anchor = 0.0;  // raceline arc coordinate
  double anchor_s_local = 0.0, anchor_eta = 0.0;
  for (std::size_t j = 0; j < n_seg; ++j) {
    const double s0 = track.arc_length()[j];
    const double ds = track.arc_length()[j + 1] - track.arc_length()[j];
    const double de = raceline.eta[j + 1] - raceline.eta[j];
    const double rel = signed_s_diff(s_local, s0, track);
    const double len2 = ds * ds + de * de;
    double t = len2 > 0.0 ? (rel * ds + (state.p_y - raceline.eta[j]) * de) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    const double dd_s = rel - t * ds;
    const double dd_e = state.p_y - raceline.eta[j] - t * de;
    const double d2 = dd_s * dd_s + dd_e * dd_e;
    if (d2 < best_d2) {
      best_d2 = d2;
      sigma_anchor = raceline.s[j] + t * (raceline.s[j + 1] - raceline.s[j]);
      anchor_s_local = s0 + t * ds;
      anchor_eta = raceline.eta[j] + t * de;
    }
  }

  // Continue in the car's unwrapped longitudinal frame.
  const double anchor_p_x = state.p_x + signed_s_diff(anchor_s_local, s_local, track);

  const double sigma_total = raceline.s.back();
  const auto locate = [&](double sigma) {
    if (raceline.closed) {
      sigma = std::fmod(sigma, sigma_total);
      if (sigma < 0.0) sigma += sigma_total;
    } else {
      sigma = std::clamp(sigma, 0.0, sigma_total);
    }
    std::size_t j = static_cast<std::size_t>(
        std::upper_bound(raceline.s.begin(), raceline.s.end(), sigma) - raceline.s.begin());
    j = std::min(std::max<std::size_t>(j, 1) - 1, n_seg - 1);
    const double seg = raceline.s[j + 1] - raceline.s[j];
    const double t = seg > 0.0 ? (sigma - raceline.s[j]) / seg : 0.0;
    return std::tuple<std::size_t, double, double>{j, t, seg};
  };

  PerturbedTrajectory out;
  out.p_x.resize(static_cast<std::size_t>(K) + 1);
  out.p_y.resize(static_cast<std::size_t>(K) + 1);
  out.v_x.resize(static_cast<std::size_t>(K) + 1);
  out.p_x[0] = anchor_p_x;
  out.p_y[0] = anchor_eta;

  double sigma = sigma_anchor;
  for (int k = 0; k <= K; ++k) {
    const auto [j, t, seg] = locate(sigma);
    const double speed = (1.0 - t) * raceline.v_x[j] + t * raceline.v_x[j + 1];
    const double dir_s = seg > 0.0 ? (track.arc_length()[j + 1] - track.arc_length()[j]) / seg : 1.0;
    const double dir_e = seg > 0.0 ? (raceline.eta[j + 1] - raceline.eta[j]) / seg : 0.0;
    out.v_x[static_cast<std::size_t>(k)] = zeta * speed * dir_s;
    if (k < K) {
      out.p_x[static_cast<std::size_t>(k) + 1] =
          out.p_x[static_cast<std::size_t>(k)] + zeta * speed * dir_s * dt;
      out.p_y[static_cast<std::size_t>(k) + 1] =
          out.p_y[static_cast<std::size_t>(k)] + zeta * speed * dir_e * dt;
      // the raceline itself is sampled at its own (unscaled) speed
      sigma += speed * dt;
    }
  }
  return out;
}

OpponentPrediction predict_opponent(const CarState& opp, const Track& track, int K,
                                    double dt) {
  OpponentPrediction pred;
  pred.present = true;
  pred.p_y = opp.p_y;
  pred.v_x = frenet_vx(opp, track.kappa_at(opp.p_x));
  pred.p_x.resize(static_cast<std::size_t>(K) + 1);
  for (int k = 0; k <= K; ++k) pred.p_x[static_cast<std::size_t>(k)] = opp.p_x + k * dt * pred.v_x;
  return pred;
}

std::vector<double> overtake_adjustment(double ego_p_y, const PerturbedTrajectory& pert,
                                        const OpponentPrediction& ahead,
                                        const OpponentPrediction& behind, double s1,
                                        double s2) {
  const std::size_t K = pert.p_x.size() - 1;
  std::vector<double> shift(K, 0.0);
  for (const OpponentPrediction* opp : {&ahead, &behind}) {
    if (!opp->present) continue;
    const double dy = ego_p_y - opp->p_y;
    for (std::size_t k = 1; k <= K; ++k) {
      const double dpx = pert.p_x[k] - opp->p_x[k];
      shift[k - 1] +=
          sign_plus(dy) * std::max((s1 - std::abs(dy)) * std::exp(-s2 * dpx * dpx), 0.0);
    }
  }
  return shift;
}

std::vector<double> blocking_adjustment(const PerturbedTrajectory& pert,
                                        const OpponentPrediction& ahead,
                                        const OpponentPrediction& behind, double s2,
                                        double s3, bool sign_flip) {
  const std::size_t K = pert.p_x.size() - 1;
  std::vector<double> shift(K, 0.0);
  for (const OpponentPrediction* opp : {&behind, &ahead}) {
    if (!opp->present) continue;
    for (std::size_t k = 1; k <= K; ++k) {
      if (!(pert.v_x[k] <= opp->v_x)) continue;
      if (!(pert.p_x[k] >= opp->p_x[k])) continue;
      const double dpx = pert.p_x[k] - opp->p_x[k];
      const double h = (opp->p_y - pert.p_y[k]) *
                       (1.0 - std::exp(-s3 * (pert.v_x[k] - opp->v_x))) *
                       std::exp(-s2 * dpx * dpx);
      shift[k - 1] += sign_flip ? -h : h;
    }
  }
  return shift;
}

std::pair<int, int> nearest_opponents(const std::vector<CarState>& joint, int ego) {
  int ahead = -1, behind = -1;
  double ahead_gap = std::numeric_limits<double>::infinity();
  double behind_gap = std::numeric_limits<double>::infinity();
  for (int j = 0; j < static_cast<int>(joint.size()); ++j) {
    if (j == ego) continue;
    const double gap =
        joint[static_cast<std::size_t>(j)].p_x - joint[static_cast<std::size_t>(ego)].p_x;
    if (gap > 0.0) {
      if (gap < ahead_gap) {
        ahead_gap = gap;
        ahead = j;
      }
    } else if (-gap < behind_gap) {
      behind_gap = -gap;
      behind = j;
    }
  }
  return {ahead, behind};
}

ReferenceTrajectory reference_trajectory(const Track& track, const RaceLine& raceline,
                                         const std::vector<CarState>& joint, int ego,
                                         const PolicyParams& theta, const MpcConfig& cfg) {
  const CarState& me = joint[static_cast<std::size_t>(ego)];
  const PerturbedTrajectory pert =
      perturbed_raceline(track, raceline, me, theta.zeta, cfg.K, cfg.dt);

  const auto [ahead_idx, behind_idx] = nearest_opponents(joint, ego);
  OpponentPrediction ahead, behind;
  if (ahead_idx >= 0) {
    ahead = predict_opponent(joint[static_cast<std::size_t>(ahead_idx)], track, cfg.K, cfg.dt);
  }
  if (behind_idx >= 0) {
    behind = predict_opponent(joint[static_cast<std::size_t>(behind_idx)], track, cfg.K, cfg.dt);
  }

  const std::vector<double> ot =
      overtake_adjustment(me.p_y, pert, ahead, behind, theta.s1, theta.s2);
  const std::vector<double> bl =
      blocking_adjustment(pert, ahead, behind, theta.s2, theta.s3, cfg.blocking_sign_flip);

  ReferenceTrajectory ref;
  ref.p_x.resize(static_cast<std::size_t>(cfg.K));
  ref.p_y.resize(static_cast<std::size_t>(cfg.K));
  const double half = 0.5 * cfg.w_max;
  for (int k = 1; k <= cfg.K; ++k) {
    const std::size_t i = static_cast<std::size_t>(k);
    ref.p_x[i - 1] = pert.p_x[i];
    ref.p_y[i - 1] = std::clamp(pert.p_y[i] + ot[i - 1] + bl[i - 1], -half, half);
  }
  return ref;
}

namespace mpc_detail {

std::vector<ControlInput> project(std::vector<ControlInput> controls,
                                  const VehicleParams& vp, double delta_prev) {
  double prev = delta_prev;
  for (auto& u : controls) {
    u.d = std::clamp(u.d, vp.d_min, vp.d_max);
    const double lo = std::max(vp.delta_min, prev + vp.delta_rate_min);
    const double hi = std::min(vp.delta_max, prev + vp.delta_rate_max);
    u.delta = std::clamp(u.delta, lo, hi);
    prev = u.delta;
  }
  return controls;
}

namespace {

struct StageCostGrad {
  double d_px = 0.0, d_py = 0.0;
};

double separation_penalty(double dx, double dy, const MpcConfig& cfg, StageCostGrad* g) {
  const double hx = std::max(0.0, 1.0 - std::abs(dx) / cfg.p_x_min);
  const double hy = std::max(0.0, 1.0 - std::abs(dy) / cfg.p_y_min);
  const double prod = hx * hy;
  if (g != nullptr && prod > 0.0) {
    const double sx = dx >= 0.0 ? 1.0 : -1.0;
    const double sy = dy >= 0.0 ? 1.0 : -1.0;
    g->d_px += cfg.penalty_weight * 2.0 * prod * hy * (-sx / cfg.p_x_min);
    g->d_py += cfg.penalty_weight * 2.0 * prod * hx * (-sy / cfg.p_y_min);
  }
  return cfg.penalty_weight * prod * prod;
}

// Tracking + penalty cost of one planned state; optionally its gradient and
// the hard-constraint violation.
double stage_cost(const CarState& x, std::size_t k, const ReferenceTrajectory& ref,
                  const std::vector<OpponentPrediction>& opponents, double q,
                  const MpcConfig& cfg, StageCostGrad* g, double* violation) {
  const double ex = x.p_x - ref.p_x[k - 1];
  const double ey = x.p_y - ref.p_y[k - 1];
  double c = q * (ex * ex + ey * ey);
  if (g != nullptr) {
    g->d_px += 2.0 * q * ex;
    g->d_py += 2.0 * q * ey;
  }

  const double half = 0.5 * cfg.w_max;
  const double over = std::abs(x.p_y) - half;
  if (over > 0.0) {
    c += cfg.penalty_weight * over * over;
    if (g != nullptr) g->d_py += cfg.penalty_weight * 2.0 * over * (x.p_y >= 0.0 ? 1.0 : -1.0);
    if (violation != nullptr) *violation = std::max(*violation, over);
  }

  for (const auto& opp : opponents) {
    if (!opp.present) continue;
    const double dx = x.p_x - opp.p_x[k];
    const double dy = x.p_y - opp.p_y;
    c += separation_penalty(dx, dy, cfg, g);
    if (violation != nullptr && std::abs(dx) < cfg.p_x_min && std::abs(dy) < cfg.p_y_min) {
      *violation = std::max(*violation, std::min(cfg.p_x_min - std::abs(dx),
                                                 cfg.p_y_min - std::abs(dy)));
    }
  }
  return c;
}

}  // namespace

double objective(const Track& track, const CarState& x0, const ReferenceTrajectory& ref,
                 const std::vector<OpponentPrediction>& opponents, double q,
                 const VehicleParams& vp, const MpcConfig& cfg,
                 const std::vector<ControlInput>& controls,
                 std::vector<CarState>* states_out, double* residual_out) {
  const std::size_t K = controls.size();
  double cost = 0.0;
  double violation = 0.0;
  CarState x = x0;
  if (states_out != nullptr) {
    states_out->clear();
    states_out->push_back(x);
  }
  for (std::size_t k = 1; k <= K; ++k) {
    try {
      x = step(x, controls[k - 1], vp, track.kappa_at(x.p_x), cfg.dt);
    } catch (const SingularFrenet&) {
      return std::numeric_limits<double>::infinity();
    }
    if (states_out != nullptr) states_out->push_back(x);
    cost += stage_cost(x, k, ref, opponents, q, cfg, nullptr,
                       residual_out != nullptr ? &violation : nullptr);
  }
  for (std::size_t k = 1; k < K; ++k) {
    const double dd = controls[k].d - controls[k - 1].d;
    const double dl = controls[k].delta - controls[k - 1].delta;
    cost += dd * dd + dl * dl;
  }
  if (residual_out != nullptr) *residual_out = violation;
  return std::isfinite(cost) ? cost : std::numeric_limits<double>::infinity();
}

std::vector<Eigen::Vector2d> gradient(const Track& track, const CarState& x0,
                                      const ReferenceTrajectory& ref,
                                      const std::vector<OpponentPrediction>& opponents,
                                      double q, const VehicleParams& vp,
                                      const MpcConfig& cfg,
                                      const std::vector<ControlInput>& controls) {
  const std::size_t K = controls.size();
  std::vector<CarState> xs(K + 1);
  std::vector<Eigen::Matrix<double, 6, 6>> A(K);
  std::vector<Eigen::Matrix<double, 6, 2>> B(K);
  xs[0] = x0;
  for (std::size_t k = 0; k < K; ++k) {
    const double s_here = xs[k].p_x;
    const double h = 1e-3;
    const double kappa = track.kappa_at(s_here);
    const double dkappa = (track.kappa_at(s_here + h) - track.kappa_at(s_here - h)) / (2.0 * h);
    xs[k + 1] = step_with_jacobian(xs[k], controls[k], vp, kappa, dkappa, cfg.dt, A[k], B[k]);
  }

  std::vector<Eigen::Vector2d> grad(K, Eigen::Vector2d::Zero());
  Eigen::Matrix<double, 6, 1> lambda = Eigen::Matrix<double, 6, 1>::Zero();
  for (std::size_t k = K; k >= 1; --k) {
    StageCostGrad g;
    stage_cost(xs[k], k, ref, opponents, q, cfg, &g, nullptr);
    lambda[0] += g.d_px;
    lambda[1] += g.d_py;
    grad[k - 1] = B[k - 1].transpose() * lambda;
    lambda = A[k - 1].transpose() * lambda;
  }
  for (std::size_t k = 1; k < K; ++k) {
    const double dd = controls[k].d - controls[k - 1].d;
    const double dl = controls[k].delta - controls[k - 1].delta;
    grad[k] += Eigen::Vector2d{2.0 * dd, 2.0 * dl};
    grad[k - 1] -= Eigen::Vector2d{2.0 * dd, 2.0 * dl};
  }
  return grad;
}

}  // namespace mpc_detail

MpcSolution mpc_solve(const Track& track, const CarState& state,
                      const ReferenceTrajectory& ref,
                      const std::vector<OpponentPrediction>& opponents, double q,
                      const VehicleParams& vp, const MpcConfig& cfg,
                      const std::vector<ControlInput>* warm, double delta_prev) {
  using namespace mpc_detail;
  const std::size_t K = static_cast<std::size_t>(cfg.K);

  std::vector<ControlInput> u0(K);
  if (warm != nullptr && warm->size() == K) {
    u0 = *warm;
  } else {
    // zero-control-delta start: constant throttle 0, constant steering
    for (auto& u : u0) u = {0.0, delta_prev};
  }
  u0 = project(std::move(u0), vp, delta_prev);

  MpcSolution best;
  best.controls = u0;
  best.objective = objective(track, state, ref, opponents, q, vp, cfg, u0, &best.planned,
                             &best.constraint_residual);
  if (!std::isfinite(best.objective)) {
    throw NonFiniteObjective("MPC rollout diverged from the start state");
  }

  std::vector<ControlInput> u = u0;
  double obj = best.objective;
  double step_size = 0.1;
  int stall = 0;
  int iter = 0;
  for (; iter < cfg.max_iters; ++iter) {
    const std::vector<Eigen::Vector2d> g =
        gradient(track, state, ref, opponents, q, vp, cfg, u);
    double gmax = 0.0;
    for (const auto& gi : g) gmax = std::max(gmax, gi.lpNorm<Eigen::Infinity>());
    if (!(gmax > 1e-14) || !std::isfinite(gmax)) break;

    bool accepted = false;
    for (int bt = 0; bt < 30; ++bt) {
      std::vector<ControlInput> trial = u;
      const double scale = step_size / gmax;
      for (std::size_t k = 0; k < K; ++k) {
        trial[k].d -= scale * g[k][0];
        trial[k].delta -= scale * g[k][1];
      }
      trial = project(std::move(trial), vp, delta_prev);
      const double trial_obj = objective(track, state, ref, opponents, q, vp, cfg, trial);
      if (trial_obj < obj - 1e-14) {
        u = std::move(trial);
        obj = trial_obj;
        accepted = true;
        if (bt == 0) step_size = std::min(step_size * 1.5, 1.0);
        break;
      }
      step_size *= 0.5;
      if (step_size < 1e-12) break;
    }
    if (!accepted) break;

    if (obj < best.objective) {
      const double gain = best.objective - obj;
      best.objective = obj;
      best.controls = u;
      stall = gain < cfg.tol * std::max(1.0, std::abs(obj)) ? stall + 1 : 0;
      if (stall >= 3) break;
    }
  }

  best.objective = objective(track, state, ref, opponents, q, vp, cfg, best.controls,
                             &best.planned, &best.constraint_residual);
  best.u0 = best.controls.front();
  best.iterations = iter;
  return best;
}

ControlInput PolicyController::act(const std::vector<CarState>& joint, int ego,
                                   const PolicyParams& theta) {
  const ReferenceTrajectory ref =
      reference_trajectory(*track_, *raceline_, joint, ego, theta, cfg_);

  const auto [ahead_idx, behind_idx] = nearest_opponents(joint, ego);
  std::vector<OpponentPrediction> opponents;
  for (int idx : {ahead_idx, behind_idx}) {
    if (idx >= 0) {
      opponents.push_back(
          predict_opponent(joint[static_cast<std::size_t>(idx)], *track_, cfg_.K, cfg_.dt));
    }
  }

  std::vector<ControlInput> shifted;
  const std::vector<ControlInput>* warm = nullptr;
  if (has_warm_ && warm_.size() == static_cast<std::size_t>(cfg_.K)) {
    shifted.assign(warm_.begin() + 1, warm_.end());
    shifted.push_back(warm_.back());
    warm = &shifted;
  }

  ControlInput u;
  try {
    last_ = mpc_solve(*track_, joint[static_cast<std::size_t>(ego)], ref, opponents,
                      theta.q, *vp_, cfg_, warm, delta_prev_);
    warm_ = last_.controls;
    has_warm_ = true;
    u = last_.u0;
  } catch (const NonFiniteObjective&) {
    // defensive stop: straighten the wheel, minimum throttle
    u = {vp_->d_min, 0.0};
    has_warm_ = false;
    last_ = MpcSolution{};
    last_.u0 = u;
  }
  delta_prev_ = u.delta;
  return u;
}

void PolicyController::reset() {
  warm_.clear();
  has_warm_ = false;
  delta_prev_ = 0.0;
  last_ = MpcSolution{};
}

}  // namespace apexgame
