#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "lempc/mpc.hpp"
#include "lempc/polytope.hpp"

namespace lempc {

/// ReLU multilayer perceptron: L affine maps, ReLU after every map but the
/// last. layer_sizes = {inputs, hidden..., outputs}.
struct MlpParams {
  std::vector<int> layer_sizes;
  std::vector<MatrixXd> W;  // W[l] is layer_sizes[l+1] x layer_sizes[l]
  std::vector<VectorXd> b;

  std::size_t num_layers() const { return W.size(); }
  void validate() const;
};

/// Fan-in scaled uniform initialization, bound sqrt(6 / fan_in), zero biases.
MlpParams init_mlp(const std::vector<int>& layer_sizes, std::uint64_t seed);

VectorXd mlp_forward(const MlpParams& params, const VectorXd& x);

/// Column-wise forward pass over a batch (inputs x batch).
MatrixXd mlp_forward_batch(const MlpParams& params, const MatrixXd& X);

struct MlpGradient {
  std::vector<MatrixXd> dW;
  std::vector<VectorXd> db;
};

struct LossAndGradient {
  double loss = 0.0;
  MlpGradient grad;
};

/// Mean over the batch of |target - mlp(x)|^2, with reverse-mode gradients.
/// The ReLU derivative at exactly zero is taken as zero.
LossAndGradient loss_and_gradient(const MlpParams& params, const MatrixXd& X,
                                  const MatrixXd& Y);
LossAndGradient loss_and_gradient(const MlpParams& params, const std::vector<Sample>& batch);

double mse(const MlpParams& params, const MatrixXd& X, const MatrixXd& Y);

struct TrainConfig {
  double learning_rate = 1e-3;
  int epochs = 1000;
  std::uint64_t seed = 0;
  double validation_fraction = 0.2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
};

struct TrainResult {
  MlpParams params;
  std::vector<double> loss_history;  // training loss before each epoch's update
  double initial_loss = 0.0;
  double final_loss = 0.0;           // after the last update
  double validation_mse = 0.0;       // NaN when there is no validation split
  std::size_t train_size = 0;
  std::size_t validation_size = 0;
};

/// Full-batch Adam on the mean squared error. Deterministic per seed.
/// Throws NumericalError if the loss becomes non-finite.
TrainResult train(const std::vector<Sample>& dataset, const std::vector<int>& layer_sizes,
                  const TrainConfig& config);

/// u = Kx inside the terminal set, the network outside of it.
struct DualModeController {
  MatrixXd K;
  HPolytope sigma_inf;
  MlpParams mlp;
  double boundary_tol = 1e-9;

  bool linear_branch(const VectorXd& x) const { return contains(sigma_inf, x, boundary_tol); }
  VectorXd eval(const VectorXd& x) const;
};

}  // namespace lempc
