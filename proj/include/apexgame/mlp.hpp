#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

namespace apexgame {

// Feed-forward network with ReLU hidden layers, input normalization fixed at
// fit time, and an affine output transform (used to de-standardize regression
// targets). Plain double precision, deterministic for a fixed seed.
class Mlp {
 public:
  Mlp() = default;
  // widths = {in, hidden..., out}; He-initialized weights.
  Mlp(const std::vector<int>& widths, std::uint64_t seed);

  int input_dim() const { return widths.empty() ? 0 : widths.front(); }
  int output_dim() const { return widths.empty() ? 0 : widths.back(); }
  std::size_t layer_count() const { return weights.size(); }

  // Column statistics of X (rows = samples); variances floored at 1e-6.
  void fit_normalization(const Eigen::MatrixXd& X);

  Eigen::VectorXd forward(const Eigen::VectorXd& x) const;
  // Rows = samples. Scalar-output nets return one column.
  Eigen::MatrixXd forward_batch(const Eigen::MatrixXd& X) const;

  struct Gradients {
    std::vector<Eigen::MatrixXd> weights;
    std::vector<Eigen::VectorXd> biases;
    void init_like(const Mlp& net);
    void scale(double s);
  };

  // Reverse-mode parameter gradients of upstream^T * output for one input.
  Gradients gradients(const Eigen::VectorXd& x, const Eigen::VectorXd& upstream) const;

  // Batched scalar-output training pass: returns the predictions and
  // accumulates sum_i upstream[i] * d(pred_i)/d(params) into grads.
  Eigen::VectorXd forward_backward(const Eigen::MatrixXd& X,
                                   const Eigen::VectorXd& upstream,
                                   Gradients& grads) const;

  // d(output)/d(input) for scalar-output nets, through the normalization.
  Eigen::VectorXd input_gradient(const Eigen::VectorXd& x) const;

  std::vector<int> widths;
  std::vector<Eigen::MatrixXd> weights;  // layer l: out x in
  std::vector<Eigen::VectorXd> biases;
  Eigen::VectorXd norm_mean, norm_var;  // per input feature
  double out_mean = 0.0;
  double out_scale = 1.0;

 private:
  void check_input(Eigen::Index dim) const;
  Eigen::VectorXd normalized_scale() const;  // 1/sqrt(max(var, 1e-6))
};

}  // namespace apexgame
