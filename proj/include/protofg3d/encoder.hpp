#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace protofg3d {

struct DenseLayer {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;    // out

  bool operator==(const DenseLayer&) const = default;
};

/// Trainable map from raw view vectors to unit embeddings:
///   y = u / ||u||,  u = W x + b
/// or, with a hidden layer, u = W2 tanh(W1 x + b1) + b2.
class Encoder {
 public:
  Encoder() = default;
  explicit Encoder(std::vector<DenseLayer> layers);

  /// Parameters drawn from U[-1/sqrt(fan_in), 1/sqrt(fan_in)].
  static Encoder create(int input_dim, int output_dim, int hidden_dim, std::uint64_t seed);

  int input_dim() const { return static_cast<int>(layers_.front().weight.cols()); }
  int output_dim() const { return static_cast<int>(layers_.back().weight.rows()); }
  int hidden_dim() const { return layers_.size() > 1 ? static_cast<int>(layers_.front().weight.rows()) : 0; }

  const std::vector<DenseLayer>& layers() const { return layers_; }
  std::vector<DenseLayer>& layers() { return layers_; }

  bool operator==(const Encoder&) const = default;

 private:
  std::vector<DenseLayer> layers_;
};

/// Row-wise embeddings of `raw` (V x D_in). Throws DegenerateEmbedding when a
/// pre-normalization norm is <= 1e-12.
Eigen::MatrixXd encode(const Encoder& encoder, const Eigen::MatrixXd& raw);

struct EncoderGradients {
  std::vector<DenseLayer> layers;
  Eigen::MatrixXd input;  // dL / d raw
};

/// Backpropagates dL/dy (V x D) through the normalization and the layers.
EncoderGradients encode_backward(const Encoder& encoder, const Eigen::MatrixXd& raw,
                                 const Eigen::MatrixXd& grad_embeddings);

struct OptimizerState {
  std::vector<DenseLayer> velocity;
  double lr = 0.005;
  double momentum = 0.9;
  double weight_decay = 0.001;
};

OptimizerState make_optimizer(std::span<const DenseLayer> params, double lr, double momentum, double weight_decay);

/// v <- m v + g + wd theta;  theta <- theta - lr v
void sgd_step(std::span<DenseLayer> params, std::span<const DenseLayer> grads, OptimizerState& state);

/// Linear warm-up from 0 to lr0 over `warmup_steps`, then cosine decay to 0 at `total_steps`.
double scheduled_learning_rate(long step, long total_steps, long warmup_steps, double lr0);

}  // namespace protofg3d
