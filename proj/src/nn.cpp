#include "uinvase/nn.hpp"

#include <cmath>
#include <string>
#include <utility>

#include <fmt/format.h>

#include "uinvase/errors.hpp"

namespace uinvase::nn {

std::string_view to_string(Activation activation) {
  switch (activation) {
    case Activation::kRelu:
      return "relu";
    case Activation::kSigmoid:
      return "sigmoid";
    case Activation::kIdentity:
      return "identity";
  }
  return "identity";
}

Activation activation_from_string(std::string_view name) {
  if (name == "relu") return Activation::kRelu;
  if (name == "sigmoid") return Activation::kSigmoid;
  if (name == "identity") return Activation::kIdentity;
  throw ConfigError(fmt::format("unknown activation '{}'", name));
}

namespace {

void apply_activation(Activation activation, Matrix& z) {
  switch (activation) {
    case Activation::kRelu:
      z = z.cwiseMax(0.0);
      break;
    case Activation::kSigmoid:
      z = z.unaryExpr([](double v) {
        // Split by sign so exp never overflows.
        if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      });
      break;
    case Activation::kIdentity:
      break;
  }
}

// Multiplies `grad` in place by d act / d z, expressed through the output.
void apply_activation_derivative(Activation activation, const Matrix& output,
                                 Matrix& grad) {
  switch (activation) {
    case Activation::kRelu:
      grad = grad.cwiseProduct(
          output.unaryExpr([](double v) { return v > 0.0 ? 1.0 : 0.0; }));
      break;
    case Activation::kSigmoid:
      grad = grad.cwiseProduct(
          output.cwiseProduct((1.0 - output.array()).matrix()));
      break;
    case Activation::kIdentity:
      break;
  }
}

}  // namespace

DenseNetwork::DenseNetwork(std::vector<DenseLayer> layers)
    : layers_(std::move(layers)) {
  validate();
}

void DenseNetwork::validate() const {
  for (std::size_t k = 0; k < layers_.size(); ++k) {
    const auto& layer = layers_[k];
    if (layer.bias.size() != layer.weight.rows()) {
      throw ConfigError(fmt::format("layer {}: bias has {} entries, expected {}",
                                    k, layer.bias.size(), layer.weight.rows()));
    }
    if (k > 0 && layer.in_dim() != layers_[k - 1].out_dim()) {
      throw ConfigError(fmt::format(
          "layer {}: input width {} does not match previous output width {}", k,
          layer.in_dim(), layers_[k - 1].out_dim()));
    }
  }
}

DenseNetwork DenseNetwork::glorot(std::span<const LayerSpec> specs, Rng& rng) {
  std::vector<DenseLayer> layers;
  layers.reserve(specs.size());
  for (const auto& spec : specs) {
    const double limit =
        std::sqrt(6.0 / static_cast<double>(spec.in + spec.out));
    DenseLayer layer;
    layer.weight.resize(static_cast<Eigen::Index>(spec.out),
                        static_cast<Eigen::Index>(spec.in));
    // Fill row by row so the draw order is independent of Eigen's storage.
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) {
        layer.weight(r, c) = (2.0 * rng.uniform() - 1.0) * limit;
      }
    }
    layer.bias = Vector::Zero(static_cast<Eigen::Index>(spec.out));
    layer.activation = spec.activation;
    layers.push_back(std::move(layer));
  }
  return DenseNetwork(std::move(layers));
}

std::size_t DenseNetwork::input_dim() const {
  return layers_.empty() ? 0 : layers_.front().in_dim();
}

std::size_t DenseNetwork::output_dim() const {
  return layers_.empty() ? 0 : layers_.back().out_dim();
}

std::size_t DenseNetwork::num_parameters() const {
  std::size_t total = 0;
  for (const auto& layer : layers_) {
    total += static_cast<std::size_t>(layer.weight.size() + layer.bias.size());
  }
  return total;
}

DenseLayer& DenseNetwork::mutable_layer(std::size_t k) {
  ++generation_;
  return layers_.at(k);
}

Matrix DenseNetwork::forward(const Matrix& batch, Tape* tape) const {
  if (layers_.empty()) throw ConfigError("forward on an empty network");
  if (static_cast<std::size_t>(batch.cols()) != input_dim()) {
    throw ConfigError(fmt::format("batch width {} does not match input dim {}",
                                  batch.cols(), input_dim()));
  }
  if (!batch.allFinite()) throw DataError("non-finite value in forward input");

  if (tape != nullptr) {
    tape->owner = this;
    tape->generation = generation_;
    tape->inputs.clear();
    tape->outputs.clear();
    tape->inputs.reserve(layers_.size());
    tape->outputs.reserve(layers_.size());
  }

  Matrix current = batch;
  for (const auto& layer : layers_) {
    Matrix z = current * layer.weight.transpose();
    z.rowwise() += layer.bias.transpose();
    apply_activation(layer.activation, z);
    if (tape != nullptr) {
      tape->inputs.push_back(std::move(current));
      tape->outputs.push_back(z);
    }
    current = std::move(z);
  }
  return current;
}

Gradients DenseNetwork::backward(const Tape& tape,
                                 const Matrix& output_grad) const {
  if (tape.owner != this || tape.generation != generation_ ||
      tape.inputs.size() != layers_.size()) {
    throw UsageError("backward called with a stale or foreign tape");
  }
  const auto& last = tape.outputs.back();
  if (output_grad.rows() != last.rows() || output_grad.cols() != last.cols()) {
    throw UsageError(fmt::format("output_grad is {}x{}, expected {}x{}",
                                 output_grad.rows(), output_grad.cols(),
                                 last.rows(), last.cols()));
  }

  Gradients grads;
  grads.layers.resize(layers_.size());
  Matrix delta = output_grad;
  for (std::size_t k = layers_.size(); k-- > 0;) {
    const auto& layer = layers_[k];
    apply_activation_derivative(layer.activation, tape.outputs[k], delta);
    grads.layers[k].weight = delta.transpose() * tape.inputs[k];
    grads.layers[k].bias = delta.colwise().sum().transpose();
    delta = delta * layer.weight;
  }
  grads.input = std::move(delta);
  return grads;
}

bool DenseNetwork::all_finite() const {
  for (const auto& layer : layers_) {
    if (!layer.weight.allFinite() || !layer.bias.allFinite()) return false;
  }
  return true;
}

Gradients zeros_like(const DenseNetwork& net) {
  Gradients grads;
  for (const auto& layer : net.layers()) {
    grads.layers.push_back(
        {Matrix::Zero(layer.weight.rows(), layer.weight.cols()),
         Vector::Zero(layer.bias.size())});
  }
  return grads;
}

void add_l2_penalty(Gradients& grads, const DenseNetwork& net, double coeff) {
  if (coeff == 0.0) return;
  if (grads.layers.size() != net.num_layers()) {
    throw UsageError("add_l2_penalty: layer count mismatch");
  }
  for (std::size_t k = 0; k < net.num_layers(); ++k) {
    grads.layers[k].weight += 2.0 * coeff * net.layer(k).weight;
  }
}

double l2_penalty(const DenseNetwork& net, double coeff) {
  double total = 0.0;
  for (const auto& layer : net.layers()) total += layer.weight.squaredNorm();
  return coeff * total;
}

}  // namespace uinvase::nn
