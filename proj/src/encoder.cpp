#include "protofg3d/encoder.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "protofg3d/error.hpp"

namespace protofg3d {

namespace {

constexpr double kMinNorm = 1e-12;

struct Forward {
  std::vector<Eigen::MatrixXd> inputs;  // input to each layer, V x in
  Eigen::MatrixXd pre;                  // u, V x D
  Eigen::VectorXd norms;
  Eigen::MatrixXd output;
};

Forward forward(const Encoder& encoder, const Eigen::MatrixXd& raw) {
  require(raw.cols() == encoder.input_dim(), "encode: input has " + std::to_string(raw.cols()) +
                                                 " columns, encoder expects " +
                                                 std::to_string(encoder.input_dim()));
  require(raw.allFinite(), "encode: non-finite input");
  Forward f;
  Eigen::MatrixXd a = raw;
  const auto& layers = encoder.layers();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    f.inputs.push_back(a);
    Eigen::MatrixXd z = a * layers[l].weight.transpose();
    z.rowwise() += layers[l].bias.transpose();
    a = (l + 1 < layers.size()) ? Eigen::MatrixXd(z.array().tanh()) : z;
  }
  f.pre = std::move(a);
  f.norms = f.pre.rowwise().norm();
  for (Eigen::Index v = 0; v < f.norms.size(); ++v)
    if (!(f.norms(v) > kMinNorm))
      throw Error(ErrorCode::DegenerateEmbedding,
                  "row " + std::to_string(v) + " has pre-normalization norm " + std::to_string(f.norms(v)));
  f.output = f.pre.array().colwise() / f.norms.array();
  return f;
}

}  // namespace

Encoder::Encoder(std::vector<DenseLayer> layers) : layers_(std::move(layers)) {
  require(!layers_.empty() && layers_.size() <= 2, "encoder must have one or two layers");
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    require(layers_[l].weight.rows() == layers_[l].bias.size(), "encoder: bias size mismatch");
    if (l > 0) require(layers_[l].weight.cols() == layers_[l - 1].weight.rows(), "encoder: layer shapes do not chain");
  }
}

Encoder Encoder::create(int input_dim, int output_dim, int hidden_dim, std::uint64_t seed) {
  require(input_dim >= 1 && output_dim >= 1 && hidden_dim >= 0, "encoder dimensions must be positive");
  std::mt19937_64 rng(seed);
  auto make = [&rng](int out, int in) {
    const double bound = 1.0 / std::sqrt(double(in));
    std::uniform_real_distribution<double> u(-bound, bound);
    DenseLayer layer{Eigen::MatrixXd(out, in), Eigen::VectorXd(out)};
    for (int i = 0; i < out; ++i)
      for (int j = 0; j < in; ++j) layer.weight(i, j) = u(rng);
    for (int i = 0; i < out; ++i) layer.bias(i) = u(rng);
    return layer;
  };
  std::vector<DenseLayer> layers;
  if (hidden_dim > 0) {
    layers.push_back(make(hidden_dim, input_dim));
    layers.push_back(make(output_dim, hidden_dim));
  } else {
    layers.push_back(make(output_dim, input_dim));
  }
  return Encoder(std::move(layers));
}

Eigen::MatrixXd encode(const Encoder& encoder, const Eigen::MatrixXd& raw) { return forward(encoder, raw).output; }

EncoderGradients encode_backward(const Encoder& encoder, const Eigen::MatrixXd& raw,
                                 const Eigen::MatrixXd& grad_embeddings) {
  const Forward f = forward(encoder, raw);
  require(grad_embeddings.rows() == f.output.rows() && grad_embeddings.cols() == f.output.cols(),
          "encode_backward: gradient shape mismatch");

  // Through y = u / ||u||: du = (I - y y^T) dy / ||u||.
  Eigen::MatrixXd g(grad_embeddings.rows(), grad_embeddings.cols());
  for (Eigen::Index v = 0; v < g.rows(); ++v) {
    const auto y = f.output.row(v);
    const auto dy = grad_embeddings.row(v);
    g.row(v) = (dy - dy.dot(y) * y) / f.norms(v);
  }

  const auto& layers = encoder.layers();
  EncoderGradients out;
  out.layers.resize(layers.size());
  for (std::size_t l = layers.size(); l-- > 0;) {
    out.layers[l].weight = g.transpose() * f.inputs[l];
    out.layers[l].bias = g.colwise().sum().transpose();
    g = g * layers[l].weight;
    if (l > 0) g.array() *= 1.0 - f.inputs[l].array().square();  // tanh'
  }
  out.input = std::move(g);
  return out;
}

OptimizerState make_optimizer(std::span<const DenseLayer> params, double lr, double momentum, double weight_decay) {
  require(lr >= 0, "learning rate must be nonnegative");
  require(momentum >= 0 && momentum < 1, "momentum must lie in [0, 1)");
  require(weight_decay >= 0, "weight decay must be nonnegative");
  OptimizerState state;
  state.lr = lr;
  state.momentum = momentum;
  state.weight_decay = weight_decay;
  for (const DenseLayer& p : params)
    state.velocity.push_back({Eigen::MatrixXd::Zero(p.weight.rows(), p.weight.cols()),
                              Eigen::VectorXd::Zero(p.bias.size())});
  return state;
}

void sgd_step(std::span<DenseLayer> params, std::span<const DenseLayer> grads, OptimizerState& state) {
  require(params.size() == grads.size() && params.size() == state.velocity.size(),
          "sgd_step: parameter, gradient and velocity counts differ");
  for (std::size_t i = 0; i < params.size(); ++i) {
    DenseLayer& p = params[i];
    DenseLayer& v = state.velocity[i];
    require(grads[i].weight.rows() == p.weight.rows() && grads[i].weight.cols() == p.weight.cols() &&
                grads[i].bias.size() == p.bias.size() && v.weight.rows() == p.weight.rows() &&
                v.weight.cols() == p.weight.cols(),
            "sgd_step: shape mismatch");
    v.weight = state.momentum * v.weight + grads[i].weight + state.weight_decay * p.weight;
    v.bias = state.momentum * v.bias + grads[i].bias + state.weight_decay * p.bias;
    p.weight -= state.lr * v.weight;
    p.bias -= state.lr * v.bias;
  }
}

double scheduled_learning_rate(long step, long total_steps, long warmup_steps, double lr0) {
  if (step < warmup_steps) return lr0 * double(step + 1) / double(warmup_steps);
  const long decay_steps = total_steps - warmup_steps;
  if (decay_steps <= 0) return lr0;
  const double progress = std::min(1.0, double(step - warmup_steps) / double(decay_steps));
  return 0.5 * lr0 * (1.0 + std::cos(std::numbers::pi * progress));
}

}  // namespace protofg3d
