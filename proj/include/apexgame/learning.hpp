#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "apexgame/game.hpp"
#include "apexgame/mlp.hpp"

namespace apexgame {

struct TrainConfig {
  double learning_rate = 1e-4;
  int epochs = 2000;
  int batch_size = 256;
  std::uint64_t seed = 0;
  double gamma = 0.99;
  double momentum = 0.9;
  double weight_decay = 0.0;  // L2 coefficient applied to weights (not biases)
  double val_fraction = 0.1;
  // Keep the weights from the epoch with the best validation loss instead of
  // the last epoch (value regression only; needs val_fraction > 0).
  bool snapshot_best_val = false;
  bool td_lambda = false;  // value targets: Monte-Carlo returns or TD(lambda)
  double lambda = 0.9;
  int samples_per_race = 50;  // states drawn per race for value regression
  // States are sampled from the first horizon_fraction of each race so the
  // truncated return-to-go target keeps a long remaining horizon; late states
  // have targets pinned near zero by the truncation, not by the state.
  double horizon_fraction = 0.5;
};

// Feature layout: per car (p_x wrapped to the lap, p_y, phi, v~x, v~y,
// omega); state_theta_features appends every car's 5 policy parameters.
Eigen::VectorXd state_features(const std::vector<CarState>& joint, const Track& track);
Eigen::VectorXd state_theta_features(const std::vector<CarState>& joint,
                                     const std::vector<PolicyParams>& theta,
                                     const Track& track);
Eigen::VectorXd potential_input(const Eigen::VectorXd& state_feats,
                                const std::vector<PolicyParams>& theta);
int state_feature_dim(int n_cars);

struct ValueTraining {
  Mlp net;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double r2 = 0.0;  // on the validation split
  double value_min = 0.0, value_max = 0.0;  // target range over the dataset
  std::vector<double> epoch_loss;
};

// Regresses V^i(x, theta) onto the truncated discounted return-to-go with
// minibatch SGD; optional TD(lambda) targets bootstrap from the net itself.
ValueTraining train_value(const std::vector<RaceRecord>& races, int car,
                          const Track& track, const std::vector<int>& hidden,
                          const TrainConfig& cfg);

struct PotentialSample {
  Eigen::VectorXd x;  // state features
  std::vector<PolicyParams> theta;
  PolicyParams theta_i_prime;  // replaces theta[i] in the deviated profile
  int i = 0;
  double dv = 0.0;  // V^i(x, theta) - V^i(x, theta_i', theta^{-i})
};

// Samples unilateral-deviation tuples at states drawn from the dataset with
// parameters drawn from the box. dv targets come from the value nets; when
// rollout_ctx is given they are recomputed by paired truncated rollouts
// instead (audit mode).
std::vector<PotentialSample> build_potential_samples(
    const std::vector<RaceRecord>& races, std::span<const Mlp> value_nets,
    const ThetaBox& box, const Track& track, int n_samples, std::uint64_t seed,
    const RaceContext* rollout_ctx = nullptr, int rollout_horizon = 100);

struct PotentialTraining {
  Mlp net;
  double alpha_hat = 0.0;  // max |(dPhi) - dv| over the held-out samples
  double train_loss = 0.0;
  std::vector<double> epoch_loss;
};

// Minimizes the mean squared deviation-matching violation
// ((Phi(x,theta) - Phi(x,theta')) - dv)^2; the empirical approximation
// parameter alpha_hat is the max held-out violation.
PotentialTraining train_potential(const std::vector<PotentialSample>& samples,
                                  const std::vector<int>& hidden, const TrainConfig& cfg);

struct GapSummary {
  std::vector<double> gaps;  // |dPhi - dv| / value_range, per sample
  double median = 0.0;
  double max = 0.0;
};

GapSummary approximation_gap(const Mlp& phi, const std::vector<PotentialSample>& samples,
                             double value_range);

}  // namespace apexgame
