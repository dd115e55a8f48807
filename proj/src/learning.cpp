#include "apexgame/learning.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "apexgame/errors.hpp"
#include "apexgame/util.hpp"

namespace apexgame {

int state_feature_dim(int n_cars) { return 8 * n_cars; }

// Track position enters as the lap angle's cosine/sine so the encoding stays
// continuous across the start/finish seam; the signed gap to the best
// opponent is the quantity the utility telescopes on.
Eigen::VectorXd state_features(const std::vector<CarState>& joint, const Track& track) {
  Eigen::VectorXd f(state_feature_dim(static_cast<int>(joint.size())));
  const double len = track.total_length();
  Eigen::Index k = 0;
  for (std::size_t i = 0; i < joint.size(); ++i) {
    const CarState& c = joint[i];
    const double angle = 2.0 * std::numbers::pi * track.wrap_s(c.p_x) / len;
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < joint.size(); ++j) {
      if (j != i) best = std::max(best, joint[j].p_x);
    }
    const double gap = joint.size() == 1 ? 0.0 : c.p_x - best;
    f[k++] = std::cos(angle);
    f[k++] = std::sin(angle);
    f[k++] = gap;
    f[k++] = c.p_y;
    f[k++] = c.phi;
    f[k++] = c.v_tilde_x;
    f[k++] = c.v_tilde_y;
    f[k++] = c.omega;
  }
  return f;
}

Eigen::VectorXd potential_input(const Eigen::VectorXd& state_feats,
                                const std::vector<PolicyParams>& theta) {
  Eigen::VectorXd f(state_feats.size() + 5 * static_cast<Eigen::Index>(theta.size()));
  f.head(state_feats.size()) = state_feats;
  Eigen::Index k = state_feats.size();
  for (const PolicyParams& th : theta) {
    for (const double v : th.as_array()) f[k++] = v;
  }
  return f;
}

Eigen::VectorXd state_theta_features(const std::vector<CarState>& joint,
                                     const std::vector<PolicyParams>& theta,
                                     const Track& track) {
  return potential_input(state_features(joint, track), theta);
}

namespace {

struct SgdState {
  std::vector<Eigen::MatrixXd> vel_w;
  std::vector<Eigen::VectorXd> vel_b;

  explicit SgdState(const Mlp& net) {
    vel_w.resize(net.weights.size());
    vel_b.resize(net.biases.size());
    for (std::size_t l = 0; l < net.weights.size(); ++l) {
      vel_w[l] = Eigen::MatrixXd::Zero(net.weights[l].rows(), net.weights[l].cols());
      vel_b[l] = Eigen::VectorXd::Zero(net.biases[l].size());
    }
  }

  void apply(Mlp& net, const Mlp::Gradients& g, double lr, double momentum,
             double weight_decay) {
    for (std::size_t l = 0; l < net.weights.size(); ++l) {
      vel_w[l] = momentum * vel_w[l] - lr * (g.weights[l] + weight_decay * net.weights[l]);
      vel_b[l] = momentum * vel_b[l] - lr * g.biases[l];
      net.weights[l] += vel_w[l];
      net.biases[l] += vel_b[l];
    }
  }
};

std::vector<int> full_widths(int in, const std::vector<int>& hidden, int out) {
  std::vector<int> w;
  w.push_back(in);
  w.insert(w.end(), hidden.begin(), hidden.end());
  w.push_back(out);
  return w;
}

double mean_sq(const Eigen::VectorXd& v) {
  return v.size() == 0 ? 0.0 : v.squaredNorm() / static_cast<double>(v.size());
}

}  // namespace

ValueTraining train_value(const std::vector<RaceRecord>& races, int car,
                          const Track& track, const std::vector<int>& hidden,
                          const TrainConfig& cfg) {
  if (races.empty()) throw EmptyDataset("no races in the dataset");
  const int T = static_cast<int>(races.front().utilities.size());
  const double h_frac = std::clamp(cfg.horizon_fraction, 0.0, 1.0);
  const int t_max = std::max(1, static_cast<int>(std::ceil(T * h_frac)));
  const int stride = std::max(1, t_max / std::max(1, cfg.samples_per_race));

  // Monte-Carlo return-to-go per race, sub-sampled along the early part of
  // the race (see TrainConfig::horizon_fraction).
  struct Sample {
    std::size_t race;
    int t;
  };
  std::vector<Sample> samples;
  for (std::size_t r = 0; r < races.size(); ++r) {
    const int Tr = std::min(static_cast<int>(races[r].utilities.size()), t_max);
    for (int t = 0; t < Tr; t += stride) samples.push_back({r, t});
  }

  const auto mc_returns = [&](const RaceRecord& rec) {
    const int Tr = static_cast<int>(rec.utilities.size());
    std::vector<double> g(static_cast<std::size_t>(Tr) + 1, 0.0);
    for (int t = Tr - 1; t >= 0; --t) {
      g[static_cast<std::size_t>(t)] =
          rec.utilities[static_cast<std::size_t>(t)][static_cast<std::size_t>(car)] +
          cfg.gamma * g[static_cast<std::size_t>(t) + 1];
    }
    return g;
  };

  const Eigen::Index dim = state_theta_features(races.front().states.front(),
                                                races.front().theta, track)
                               .size();
  Eigen::MatrixXd X(static_cast<Eigen::Index>(samples.size()), dim);
  Eigen::VectorXd y(static_cast<Eigen::Index>(samples.size()));
  {
    std::vector<std::vector<double>> returns(races.size());
    for (std::size_t r = 0; r < races.size(); ++r) returns[r] = mc_returns(races[r]);
    for (std::size_t s = 0; s < samples.size(); ++s) {
      const RaceRecord& rec = races[samples[s].race];
      X.row(static_cast<Eigen::Index>(s)) = state_theta_features(
          rec.states[static_cast<std::size_t>(samples[s].t)], rec.theta, track);
      y[static_cast<Eigen::Index>(s)] =
          returns[samples[s].race][static_cast<std::size_t>(samples[s].t)];
    }
  }

  // split by race so validation states come from unseen races
  const std::size_t val_race_start =
      races.size() - static_cast<std::size_t>(std::ceil(cfg.val_fraction * races.size()));
  std::vector<Eigen::Index> train_idx, val_idx;
  for (std::size_t s = 0; s < samples.size(); ++s) {
    (samples[s].race < val_race_start ? train_idx : val_idx)
        .push_back(static_cast<Eigen::Index>(s));
  }
  if (train_idx.empty()) throw EmptyDataset("no training samples after the split");

  ValueTraining out;
  out.value_min = y.minCoeff();
  out.value_max = y.maxCoeff();

  Mlp net(full_widths(static_cast<int>(dim), hidden, 1), splitmix64(cfg.seed ^ 0x5eed));
  {
    Eigen::MatrixXd Xtr(static_cast<Eigen::Index>(train_idx.size()), dim);
    for (std::size_t k = 0; k < train_idx.size(); ++k) Xtr.row(static_cast<Eigen::Index>(k)) = X.row(train_idx[k]);
    net.fit_normalization(Xtr);
  }

  // standardized targets for conditioning; the transform is folded back into
  // the net after training
  double t_mean = 0.0, t_std = 0.0;
  for (const Eigen::Index i : train_idx) t_mean += y[i];
  t_mean /= static_cast<double>(train_idx.size());
  for (const Eigen::Index i : train_idx) t_std += (y[i] - t_mean) * (y[i] - t_mean);
  t_std = std::sqrt(t_std / static_cast<double>(train_idx.size()));
  if (t_std < 1e-9) t_std = 1.0;

  Eigen::VectorXd y_std = (y.array() - t_mean) / t_std;

  Rng rng(Rng::derive(cfg.seed, 0x11a0 + static_cast<std::uint64_t>(car)).next_u64());
  SgdState opt(net);
  Mlp::Gradients grads;
  grads.init_like(net);
  std::vector<Eigen::Index> order = train_idx;

  const bool snapshot = cfg.snapshot_best_val && !val_idx.empty();
  Eigen::MatrixXd Xval;
  Eigen::VectorXd yval_std;
  if (snapshot) {
    Xval.resize(static_cast<Eigen::Index>(val_idx.size()), dim);
    yval_std.resize(static_cast<Eigen::Index>(val_idx.size()));
    for (std::size_t k = 0; k < val_idx.size(); ++k) {
      Xval.row(static_cast<Eigen::Index>(k)) = X.row(val_idx[k]);
      yval_std[static_cast<Eigen::Index>(k)] = y_std[val_idx[k]];
    }
  }
  double best_val = std::numeric_limits<double>::infinity();
  std::vector<Eigen::MatrixXd> best_w = net.weights;
  std::vector<Eigen::VectorXd> best_b = net.biases;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (cfg.td_lambda) {
      // forward-view TD(lambda) targets bootstrapped from the current net
      for (std::size_t r = 0; r < races.size(); ++r) {
        const RaceRecord& rec = races[r];
        const int Tr = static_cast<int>(rec.utilities.size());
        Eigen::MatrixXd Xr(Tr + 1, dim);
        for (int t = 0; t <= Tr; ++t) {
          Xr.row(t) = state_theta_features(rec.states[static_cast<std::size_t>(t)],
                                           rec.theta, track);
        }
        const Eigen::MatrixXd v_hat = net.forward_batch(Xr);
        std::vector<double> g(static_cast<std::size_t>(Tr) + 1);
        g[static_cast<std::size_t>(Tr)] = v_hat(Tr, 0);
        for (int t = Tr - 1; t >= 0; --t) {
          const double u =
              rec.utilities[static_cast<std::size_t>(t)][static_cast<std::size_t>(car)];
          g[static_cast<std::size_t>(t)] =
              u + cfg.gamma * ((1.0 - cfg.lambda) * v_hat(t + 1, 0) +
                               cfg.lambda * g[static_cast<std::size_t>(t) + 1]);
        }
        for (std::size_t s = 0; s < samples.size(); ++s) {
          if (samples[s].race == r) {
            y_std[static_cast<Eigen::Index>(s)] =
                (g[static_cast<std::size_t>(samples[s].t)] - t_mean) / t_std;
          }
        }
      }
    }

    rng.shuffle(order);
    double epoch_loss = 0.0;
    std::size_t batches = 0;
    for (std::size_t b = 0; b < order.size(); b += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t nb = std::min<std::size_t>(cfg.batch_size, order.size() - b);
      Eigen::MatrixXd Xb(static_cast<Eigen::Index>(nb), dim);
      Eigen::VectorXd yb(static_cast<Eigen::Index>(nb));
      for (std::size_t k = 0; k < nb; ++k) {
        Xb.row(static_cast<Eigen::Index>(k)) = X.row(order[b + k]);
        yb[static_cast<Eigen::Index>(k)] = y_std[order[b + k]];
      }
      // two passes: predictions first, then the weighted backward pass
      const Eigen::MatrixXd pred = net.forward_batch(Xb);
      const Eigen::VectorXd err = pred.col(0) - yb;
      for (auto& w : grads.weights) w.setZero();
      for (auto& bb : grads.biases) bb.setZero();
      net.forward_backward(Xb, 2.0 * err / static_cast<double>(nb), grads);
      opt.apply(net, grads, cfg.learning_rate, cfg.momentum, cfg.weight_decay);
      epoch_loss += mean_sq(err);
      ++batches;
    }
    out.epoch_loss.push_back(batches > 0 ? epoch_loss / static_cast<double>(batches) : 0.0);
    if (snapshot) {
      const double v = mean_sq(net.forward_batch(Xval).col(0) - yval_std);
      if (v < best_val) {
        best_val = v;
        best_w = net.weights;
        best_b = net.biases;
      }
    }
  }
  if (snapshot) {
    net.weights = best_w;
    net.biases = best_b;
  }

  // fold the target standardization into the net
  net.out_mean = t_mean;
  net.out_scale = t_std;

  const auto eval = [&](const std::vector<Eigen::Index>& idx, double* r2) {
    if (idx.empty()) return 0.0;
    Eigen::MatrixXd Xe(static_cast<Eigen::Index>(idx.size()), dim);
    Eigen::VectorXd ye(static_cast<Eigen::Index>(idx.size()));
    for (std::size_t k = 0; k < idx.size(); ++k) {
      Xe.row(static_cast<Eigen::Index>(k)) = X.row(idx[k]);
      ye[static_cast<Eigen::Index>(k)] = y[idx[k]];
    }
    const Eigen::VectorXd pred = net.forward_batch(Xe).col(0);
    const double mse = mean_sq(pred - ye);
    if (r2 != nullptr) {
      const double var = mean_sq(ye.array() - ye.mean());
      *r2 = var > 0.0 ? 1.0 - mse / var : 0.0;
    }
    return mse;
  };
  out.train_loss = eval(train_idx, nullptr);
  out.val_loss = eval(val_idx.empty() ? train_idx : val_idx, &out.r2);
  out.net = std::move(net);
  return out;
}

std::vector<PotentialSample> build_potential_samples(
    const std::vector<RaceRecord>& races, std::span<const Mlp> value_nets,
    const ThetaBox& box, const Track& track, int n_samples, std::uint64_t seed,
    const RaceContext* rollout_ctx, int rollout_horizon) {
  if (races.empty()) throw EmptyDataset("no races to draw states from");
  const int n_cars = static_cast<int>(races.front().states.front().size());
  Rng rng(splitmix64(seed ^ 0x90707ULL));

  std::vector<PotentialSample> samples;
  samples.reserve(static_cast<std::size_t>(n_samples));
  for (int s = 0; s < n_samples; ++s) {
    const RaceRecord& rec = races[rng.index(races.size())];
    const std::vector<CarState>& x = rec.states[rng.index(rec.states.size())];

    PotentialSample ps;
    ps.x = state_features(x, track);
    ps.i = static_cast<int>(rng.index(static_cast<std::size_t>(n_cars)));
    ps.theta.resize(static_cast<std::size_t>(n_cars));
    for (auto& th : ps.theta) th = box.sample(rng);
    ps.theta_i_prime = box.sample(rng);

    if (rollout_ctx != nullptr) {
      std::vector<PolicyParams> dev = ps.theta;
      dev[static_cast<std::size_t>(ps.i)] = ps.theta_i_prime;
      const RaceRecord a = rollout(*rollout_ctx, x, ps.theta, rollout_horizon, 0);
      const RaceRecord b = rollout(*rollout_ctx, x, dev, rollout_horizon, 0);
      std::vector<double> ua, ub;
      for (const auto& frame : a.utilities) ua.push_back(frame[static_cast<std::size_t>(ps.i)]);
      for (const auto& frame : b.utilities) ub.push_back(frame[static_cast<std::size_t>(ps.i)]);
      const double gamma = rollout_ctx->game.gamma;
      ps.dv = discounted_return(ua, gamma) - discounted_return(ub, gamma);
    } else {
      const Mlp& v_net = value_nets[static_cast<std::size_t>(ps.i)];
      std::vector<PolicyParams> dev = ps.theta;
      dev[static_cast<std::size_t>(ps.i)] = ps.theta_i_prime;
      const double va = v_net.forward(potential_input(ps.x, ps.theta))[0];
      const double vb = v_net.forward(potential_input(ps.x, dev))[0];
      ps.dv = va - vb;
    }
    samples.push_back(std::move(ps));
  }
  return samples;
}

PotentialTraining train_potential(const std::vector<PotentialSample>& samples,
                                  const std::vector<int>& hidden, const TrainConfig& cfg) {
  if (samples.empty()) throw EmptySamples("no potential samples");
  const Eigen::Index dim =
      potential_input(samples.front().x, samples.front().theta).size();

  const std::size_t n = samples.size();
  Eigen::MatrixXd Xa(static_cast<Eigen::Index>(n), dim);
  Eigen::MatrixXd Xb(static_cast<Eigen::Index>(n), dim);
  Eigen::VectorXd dv(static_cast<Eigen::Index>(n));
  for (std::size_t s = 0; s < n; ++s) {
    const PotentialSample& ps = samples[s];
    std::vector<PolicyParams> dev = ps.theta;
    dev[static_cast<std::size_t>(ps.i)] = ps.theta_i_prime;
    Xa.row(static_cast<Eigen::Index>(s)) = potential_input(ps.x, ps.theta);
    Xb.row(static_cast<Eigen::Index>(s)) = potential_input(ps.x, dev);
    dv[static_cast<Eigen::Index>(s)] = ps.dv;
  }

  const std::size_t n_train =
      n - static_cast<std::size_t>(std::ceil(cfg.val_fraction * static_cast<double>(n)));
  if (n_train == 0) throw EmptySamples("no training samples after the split");

  Mlp net(full_widths(static_cast<int>(dim), hidden, 1), splitmix64(cfg.seed ^ 0xf1));
  {
    Eigen::MatrixXd stacked(2 * static_cast<Eigen::Index>(n_train), dim);
    stacked.topRows(static_cast<Eigen::Index>(n_train)) =
        Xa.topRows(static_cast<Eigen::Index>(n_train));
    stacked.bottomRows(static_cast<Eigen::Index>(n_train)) =
        Xb.topRows(static_cast<Eigen::Index>(n_train));
    net.fit_normalization(stacked);
  }

  double dv_scale = std::sqrt(
      dv.head(static_cast<Eigen::Index>(n_train)).squaredNorm() / static_cast<double>(n_train));
  if (dv_scale < 1e-9) dv_scale = 1.0;
  const Eigen::VectorXd dv_std = dv / dv_scale;

  Rng rng(splitmix64(cfg.seed ^ 0xbead));
  SgdState opt(net);
  Mlp::Gradients grads;
  grads.init_like(net);
  std::vector<Eigen::Index> order(n_train);
  std::iota(order.begin(), order.end(), 0);

  const Eigen::Index n_val = static_cast<Eigen::Index>(n) - static_cast<Eigen::Index>(n_train);
  const bool snapshot = cfg.snapshot_best_val && n_val > 0;
  double best_val = std::numeric_limits<double>::infinity();
  std::vector<Eigen::MatrixXd> best_w = net.weights;
  std::vector<Eigen::VectorXd> best_b = net.biases;

  PotentialTraining out;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0.0;
    std::size_t batches = 0;
    for (std::size_t b = 0; b < order.size(); b += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t nb = std::min<std::size_t>(cfg.batch_size, order.size() - b);
      Eigen::MatrixXd Ba(static_cast<Eigen::Index>(nb), dim), Bb(static_cast<Eigen::Index>(nb), dim);
      Eigen::VectorXd tb(static_cast<Eigen::Index>(nb));
      for (std::size_t k = 0; k < nb; ++k) {
        Ba.row(static_cast<Eigen::Index>(k)) = Xa.row(order[b + k]);
        Bb.row(static_cast<Eigen::Index>(k)) = Xb.row(order[b + k]);
        tb[static_cast<Eigen::Index>(k)] = dv_std[order[b + k]];
      }
      const Eigen::VectorXd fa = net.forward_batch(Ba).col(0);
      const Eigen::VectorXd fb = net.forward_batch(Bb).col(0);
      const Eigen::VectorXd err = fa - fb - tb;
      for (auto& w : grads.weights) w.setZero();
      for (auto& bb : grads.biases) bb.setZero();
      const Eigen::VectorXd up = 2.0 * err / static_cast<double>(nb);
      net.forward_backward(Ba, up, grads);
      net.forward_backward(Bb, -up, grads);
      opt.apply(net, grads, cfg.learning_rate, cfg.momentum, cfg.weight_decay);
      epoch_loss += mean_sq(err);
      ++batches;
    }
    out.epoch_loss.push_back(batches > 0 ? epoch_loss / static_cast<double>(batches) : 0.0);
    if (snapshot) {
      const Eigen::VectorXd fa = net.forward_batch(Xa.bottomRows(n_val)).col(0);
      const Eigen::VectorXd fb = net.forward_batch(Xb.bottomRows(n_val)).col(0);
      const double v = mean_sq(fa - fb - dv_std.tail(n_val));
      if (v < best_val) {
        best_val = v;
        best_w = net.weights;
        best_b = net.biases;
      }
    }
  }
  if (snapshot) {
    net.weights = best_w;
    net.biases = best_b;
  }

  net.out_scale = dv_scale;  // out_mean stays 0: it cancels in differences

  // alpha_hat: worst violation over the held-out tail (the whole set when
  // there is no holdout)
  const Eigen::Index v0 = static_cast<Eigen::Index>(n_train == n ? 0 : n_train);
  const Eigen::VectorXd fa = net.forward_batch(Xa.bottomRows(static_cast<Eigen::Index>(n) - v0)).col(0);
  const Eigen::VectorXd fb = net.forward_batch(Xb.bottomRows(static_cast<Eigen::Index>(n) - v0)).col(0);
  out.alpha_hat =
      (fa - fb - dv.tail(static_cast<Eigen::Index>(n) - v0)).cwiseAbs().maxCoeff();
  out.train_loss = out.epoch_loss.empty() ? 0.0 : out.epoch_loss.back();
  out.net = std::move(net);
  return out;
}

GapSummary approximation_gap(const Mlp& phi, const std::vector<PotentialSample>& samples,
                             double value_range) {
  if (samples.empty()) throw EmptySamples("no samples for the gap evaluation");
  if (!(value_range >= 1e-9)) {
    throw DegenerateRange("value range " + std::to_string(value_range) + " is too small");
  }
  GapSummary out;
  out.gaps.reserve(samples.size());
  for (const PotentialSample& ps : samples) {
    std::vector<PolicyParams> dev = ps.theta;
    dev[static_cast<std::size_t>(ps.i)] = ps.theta_i_prime;
    const double da = phi.forward(potential_input(ps.x, ps.theta))[0];
    const double db = phi.forward(potential_input(ps.x, dev))[0];
    out.gaps.push_back(std::abs((da - db) - ps.dv) / value_range);
  }
  std::vector<double> sorted = out.gaps;
  std::sort(sorted.begin(), sorted.end());
  out.median = sorted[sorted.size() / 2];
  out.max = sorted.back();
  return out;
}

}  // namespace apexgame
