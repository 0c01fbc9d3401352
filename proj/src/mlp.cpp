#include "lempc/mlp.hpp"

#include <cmath>
#include <limits>
#include <numeric>

#include "lempc/error.hpp"
#include "lempc/random.hpp"

namespace lempc {

void MlpParams::validate() const {
  LEMPC_REQUIRE(layer_sizes.size() >= 2, "mlp: need at least input and output sizes");
  LEMPC_REQUIRE(W.size() + 1 == layer_sizes.size() && b.size() == W.size(),
                "mlp: layer count does not match layer_sizes");
  for (std::size_t l = 0; l < W.size(); ++l) {
    LEMPC_REQUIRE(W[l].rows() == layer_sizes[l + 1] && W[l].cols() == layer_sizes[l] &&
                      b[l].size() == layer_sizes[l + 1],
                  "mlp: layer dimensions do not chain");
    LEMPC_REQUIRE(W[l].allFinite() && b[l].allFinite(), "mlp: non-finite parameters");
  }
}

MlpParams init_mlp(const std::vector<int>& layer_sizes, std::uint64_t seed) {
  LEMPC_REQUIRE(layer_sizes.size() >= 2, "init_mlp: need at least input and output sizes");
  for (int s : layer_sizes) LEMPC_REQUIRE(s > 0, "init_mlp: layer sizes must be positive");
  MlpParams p;
  p.layer_sizes = layer_sizes;
  Rng rng(seed);
  for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
    const int fan_in = layer_sizes[l];
    const double bound = std::sqrt(6.0 / fan_in);
    MatrixXd W(layer_sizes[l + 1], fan_in);
    for (Eigen::Index i = 0; i < W.rows(); ++i)
      for (Eigen::Index j = 0; j < W.cols(); ++j) W(i, j) = rng.uniform(-bound, bound);
    p.W.push_back(std::move(W));
    p.b.push_back(VectorXd::Zero(layer_sizes[l + 1]));
  }
  return p;
}

VectorXd mlp_forward(const MlpParams& params, const VectorXd& x) {
  LEMPC_REQUIRE(!params.W.empty() && x.size() == params.W.front().cols(),
                "mlp_forward: input dimension mismatch");
  VectorXd a = x;
  const auto L = params.W.size();
  for (std::size_t l = 0; l < L; ++l) {
    a = params.W[l] * a + params.b[l];
    if (l + 1 < L) a = a.cwiseMax(0.0);
  }
  return a;
}

MatrixXd mlp_forward_batch(const MlpParams& params, const MatrixXd& X) {
  LEMPC_REQUIRE(!params.W.empty() && X.rows() == params.W.front().cols(),
                "mlp_forward_batch: input dimension mismatch");
  MatrixXd a = X;
  const auto L = params.W.size();
  for (std::size_t l = 0; l < L; ++l) {
    a = (params.W[l] * a).colwise() + params.b[l];
    if (l + 1 < L) a = a.cwiseMax(0.0);
  }
  return a;
}

LossAndGradient loss_and_gradient(const MlpParams& params, const MatrixXd& X,
                                  const MatrixXd& Y) {
  const auto n = X.cols();
  LEMPC_REQUIRE(n > 0, "loss_and_gradient: empty batch");
  LEMPC_REQUIRE(Y.cols() == n && Y.rows() == params.W.back().rows(),
                "loss_and_gradient: target dimension mismatch");
  const auto L = params.W.size();

  // activations[l] is the input of layer l; pre[l] its affine output.
  std::vector<MatrixXd> activations(L + 1);
  std::vector<MatrixXd> pre(L);
  activations[0] = X;
  for (std::size_t l = 0; l < L; ++l) {
    pre[l] = (params.W[l] * activations[l]).colwise() + params.b[l];
    activations[l + 1] = (l + 1 < L) ? MatrixXd(pre[l].cwiseMax(0.0)) : pre[l];
  }

  const MatrixXd err = activations[L] - Y;
  LossAndGradient out;
  out.loss = err.squaredNorm() / static_cast<double>(n);
  out.grad.dW.resize(L);
  out.grad.db.resize(L);

  MatrixXd delta = (2.0 / static_cast<double>(n)) * err;
  for (std::size_t l = L; l-- > 0;) {
    out.grad.dW[l] = delta * activations[l].transpose();
    out.grad.db[l] = delta.rowwise().sum();
    if (l == 0) break;
    delta = params.W[l].transpose() * delta;
    delta = delta.cwiseProduct((pre[l - 1].array() > 0.0).cast<double>().matrix());
  }
  return out;
}

namespace {

void to_matrices(const std::vector<Sample>& batch, MatrixXd& X, MatrixXd& Y) {
  LEMPC_REQUIRE(!batch.empty(), "empty batch");
  const auto m = batch.front().x.size();
  const auto k = batch.front().u.size();
  X.resize(m, static_cast<Eigen::Index>(batch.size()));
  Y.resize(k, static_cast<Eigen::Index>(batch.size()));
  for (std::size_t i = 0; i < batch.size(); ++i) {
    LEMPC_REQUIRE(batch[i].x.size() == m && batch[i].u.size() == k,
                  "inconsistent sample dimensions");
    X.col(static_cast<Eigen::Index>(i)) = batch[i].x;
    Y.col(static_cast<Eigen::Index>(i)) = batch[i].u;
  }
}

}  // namespace

LossAndGradient loss_and_gradient(const MlpParams& params, const std::vector<Sample>& batch) {
  MatrixXd X, Y;
  to_matrices(batch, X, Y);
  return loss_and_gradient(params, X, Y);
}

double mse(const MlpParams& params, const MatrixXd& X, const MatrixXd& Y) {
  return (mlp_forward_batch(params, X) - Y).squaredNorm() / static_cast<double>(X.cols());
}

TrainResult train(const std::vector<Sample>& dataset, const std::vector<int>& layer_sizes,
                  const TrainConfig& config) {
  LEMPC_REQUIRE(!dataset.empty(), "train: dataset is empty");
  LEMPC_REQUIRE(config.learning_rate > 0.0, "train: learning rate must be positive");
  LEMPC_REQUIRE(config.epochs >= 0, "train: epochs must be nonnegative");
  LEMPC_REQUIRE(config.validation_fraction >= 0.0 && config.validation_fraction < 1.0,
                "train: validation fraction must lie in [0, 1)");
  LEMPC_REQUIRE(layer_sizes.size() >= 2 &&
                    layer_sizes.front() == dataset.front().x.size() &&
                    layer_sizes.back() == dataset.front().u.size(),
                "train: layer sizes do not match the dataset dimensions");

  // Seeded split: the first floor(f n) shuffled indices validate.
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), 0);
  Rng split_rng = Rng::substream(config.seed, 1);
  for (std::size_t i = order.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(split_rng.uniform() * static_cast<double>(i));
    std::swap(order[i - 1], order[std::min(j, i - 1)]);
  }
  auto n_val = static_cast<std::size_t>(config.validation_fraction *
                                        static_cast<double>(dataset.size()));
  if (n_val >= dataset.size()) n_val = 0;
  std::vector<Sample> train_set, val_set;
  for (std::size_t k = 0; k < order.size(); ++k) {
    (k < n_val ? val_set : train_set).push_back(dataset[order[k]]);
  }

  TrainResult result;
  result.params = init_mlp(layer_sizes, config.seed);
  result.train_size = train_set.size();
  result.validation_size = val_set.size();

  MatrixXd X, Y;
  to_matrices(train_set, X, Y);

  MlpParams& p = result.params;
  const auto L = p.W.size();
  std::vector<MatrixXd> mW(L), vW(L);
  std::vector<VectorXd> mb(L), vb(L);
  for (std::size_t l = 0; l < L; ++l) {
    mW[l] = MatrixXd::Zero(p.W[l].rows(), p.W[l].cols());
    vW[l] = mW[l];
    mb[l] = VectorXd::Zero(p.b[l].size());
    vb[l] = mb[l];
  }

  result.initial_loss = mse(p, X, Y);
  result.loss_history.reserve(static_cast<std::size_t>(config.epochs));
  const double b1 = config.beta1;
  const double b2 = config.beta2;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const LossAndGradient lg = loss_and_gradient(p, X, Y);
    if (!std::isfinite(lg.loss)) {
      throw NumericalError("train: loss diverged at epoch " + std::to_string(epoch) +
                           "; lower the learning rate");
    }
    result.loss_history.push_back(lg.loss);
    const double c1 = 1.0 - std::pow(b1, epoch);
    const double c2 = 1.0 - std::pow(b2, epoch);
    const double step = config.learning_rate;
    for (std::size_t l = 0; l < L; ++l) {
      mW[l] = b1 * mW[l] + (1.0 - b1) * lg.grad.dW[l];
      vW[l] = b2 * vW[l] + (1.0 - b2) * lg.grad.dW[l].cwiseAbs2();
      p.W[l].array() -= step * (mW[l].array() / c1) /
                        ((vW[l].array() / c2).sqrt() + config.adam_eps);
      mb[l] = b1 * mb[l] + (1.0 - b1) * lg.grad.db[l];
      vb[l] = b2 * vb[l] + (1.0 - b2) * lg.grad.db[l].cwiseAbs2();
      p.b[l].array() -= step * (mb[l].array() / c1) /
                        ((vb[l].array() / c2).sqrt() + config.adam_eps);
    }
  }
  result.final_loss = mse(p, X, Y);
  if (!std::isfinite(result.final_loss)) throw NumericalError("train: loss diverged");

  if (!val_set.empty()) {
    MatrixXd Xv, Yv;
    to_matrices(val_set, Xv, Yv);
    result.validation_mse = mse(p, Xv, Yv);
  } else {
    result.validation_mse = std::numeric_limits<double>::quiet_NaN();
  }
  return result;
}

VectorXd DualModeController::eval(const VectorXd& x) const {
  if (linear_branch(x)) return K * x;
  return mlp_forward(mlp, x);
}

}  // namespace lempc
