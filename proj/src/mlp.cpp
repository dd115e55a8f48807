#include "apexgame/mlp.hpp"

#include <cmath>

#include "apexgame/errors.hpp"
#include "apexgame/util.hpp"

namespace apexgame {

Mlp::Mlp(const std::vector<int>& w, std::uint64_t seed) : widths(w) {
  if (widths.size() < 2) throw ValidationError("Mlp needs at least input and output widths");
  Rng rng(seed);
  weights.resize(widths.size() - 1);
  biases.resize(widths.size() - 1);
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const int in = widths[l], out = widths[l + 1];
    const double std_dev = std::sqrt(2.0 / in);
    weights[l].resize(out, in);
    for (int r = 0; r < out; ++r) {
      for (int c = 0; c < in; ++c) weights[l](r, c) = std_dev * rng.normal();
    }
    biases[l] = Eigen::VectorXd::Zero(out);
  }
  norm_mean = Eigen::VectorXd::Zero(widths.front());
  norm_var = Eigen::VectorXd::Ones(widths.front());
}

void Mlp::check_input(Eigen::Index dim) const {
  if (dim != input_dim()) {
    throw DimensionMismatch("expected input dim " + std::to_string(input_dim()) +
                            ", got " + std::to_string(dim));
  }
}

void Mlp::fit_normalization(const Eigen::MatrixXd& X) {
  check_input(X.cols());
  if (X.rows() == 0) throw EmptyDataset("cannot fit normalization on zero samples");
  norm_mean = X.colwise().mean();
  const Eigen::MatrixXd centered = X.rowwise() - norm_mean.transpose();
  norm_var = centered.array().square().colwise().mean();
}

Eigen::VectorXd Mlp::normalized_scale() const {
  return (norm_var.array().max(1e-6)).rsqrt();
}

Eigen::VectorXd Mlp::forward(const Eigen::VectorXd& x) const {
  check_input(x.size());
  Eigen::VectorXd h = (x - norm_mean).cwiseProduct(normalized_scale());
  for (std::size_t l = 0; l < weights.size(); ++l) {
    h = (weights[l] * h + biases[l]).eval();
    if (l + 1 < weights.size()) h = h.cwiseMax(0.0);
  }
  return (out_scale * h.array() + out_mean).matrix();
}

Eigen::MatrixXd Mlp::forward_batch(const Eigen::MatrixXd& X) const {
  check_input(X.cols());
  const Eigen::VectorXd scale = normalized_scale();
  Eigen::MatrixXd h =
      (X.rowwise() - norm_mean.transpose()).array().rowwise() * scale.transpose().array();
  for (std::size_t l = 0; l < weights.size(); ++l) {
    h = ((h * weights[l].transpose()).rowwise() + biases[l].transpose()).eval();
    if (l + 1 < weights.size()) h = h.cwiseMax(0.0);
  }
  return (out_scale * h.array() + out_mean).matrix();
}

void Mlp::Gradients::init_like(const Mlp& net) {
  weights.resize(net.weights.size());
  biases.resize(net.biases.size());
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    weights[l] = Eigen::MatrixXd::Zero(net.weights[l].rows(), net.weights[l].cols());
    biases[l] = Eigen::VectorXd::Zero(net.biases[l].size());
  }
}

void Mlp::Gradients::scale(double s) {
  for (auto& w : weights) w *= s;
  for (auto& b : biases) b *= s;
}

Mlp::Gradients Mlp::gradients(const Eigen::VectorXd& x,
                              const Eigen::VectorXd& upstream) const {
  check_input(x.size());
  if (upstream.size() != output_dim()) {
    throw DimensionMismatch("upstream dim " + std::to_string(upstream.size()) +
                            " != output dim " + std::to_string(output_dim()));
  }
  const std::size_t L = weights.size();
  std::vector<Eigen::VectorXd> acts(L + 1);
  acts[0] = (x - norm_mean).cwiseProduct(normalized_scale());
  for (std::size_t l = 0; l < L; ++l) {
    acts[l + 1] = weights[l] * acts[l] + biases[l];
    if (l + 1 < L) acts[l + 1] = acts[l + 1].cwiseMax(0.0);
  }

  Gradients g;
  g.init_like(*this);
  Eigen::VectorXd delta = out_scale * upstream;
  for (std::size_t l = L; l-- > 0;) {
    g.weights[l] = delta * acts[l].transpose();
    g.biases[l] = delta;
    if (l > 0) {
      delta = (weights[l].transpose() * delta).eval();
      delta = delta.cwiseProduct((acts[l].array() > 0.0).cast<double>().matrix());
    }
  }
  return g;
}

Eigen::VectorXd Mlp::forward_backward(const Eigen::MatrixXd& X,
                                      const Eigen::VectorXd& upstream,
                                      Gradients& grads) const {
  check_input(X.cols());
  if (output_dim() != 1) throw DimensionMismatch("forward_backward expects a scalar output");
  if (upstream.size() != X.rows()) {
    throw DimensionMismatch("upstream size must match the batch size");
  }
  const std::size_t L = weights.size();
  const Eigen::VectorXd scale = normalized_scale();
  std::vector<Eigen::MatrixXd> acts(L + 1);
  acts[0] =
      (X.rowwise() - norm_mean.transpose()).array().rowwise() * scale.transpose().array();
  for (std::size_t l = 0; l < L; ++l) {
    acts[l + 1] = ((acts[l] * weights[l].transpose()).rowwise() + biases[l].transpose()).eval();
    if (l + 1 < L) acts[l + 1] = acts[l + 1].cwiseMax(0.0);
  }

  // delta: n x width_{l+1}, seeded with the per-sample upstream weights
  Eigen::MatrixXd delta = out_scale * upstream;
  for (std::size_t l = L; l-- > 0;) {
    grads.weights[l] += delta.transpose() * acts[l];
    grads.biases[l] += delta.colwise().sum().transpose();
    if (l > 0) {
      delta = (delta * weights[l]).eval();
      delta = delta.cwiseProduct((acts[l].array() > 0.0).cast<double>().matrix());
    }
  }
  return (out_scale * acts[L].array() + out_mean).matrix();
}

Eigen::VectorXd Mlp::input_gradient(const Eigen::VectorXd& x) const {
  check_input(x.size());
  if (output_dim() != 1) throw DimensionMismatch("input_gradient expects a scalar output");
  const std::size_t L = weights.size();
  std::vector<Eigen::VectorXd> acts(L + 1);
  acts[0] = (x - norm_mean).cwiseProduct(normalized_scale());
  for (std::size_t l = 0; l < L; ++l) {
    acts[l + 1] = weights[l] * acts[l] + biases[l];
    if (l + 1 < L) acts[l + 1] = acts[l + 1].cwiseMax(0.0);
  }
  Eigen::VectorXd delta = Eigen::VectorXd::Constant(1, out_scale);
  for (std::size_t l = L; l-- > 0;) {
    delta = (weights[l].transpose() * delta).eval();
    if (l > 0) delta = delta.cwiseProduct((acts[l].array() > 0.0).cast<double>().matrix());
  }
  return delta.cwiseProduct(normalized_scale());
}

}  // namespace apexgame
