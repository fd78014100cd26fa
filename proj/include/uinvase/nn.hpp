#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "uinvase/rng.hpp"

namespace uinvase::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class Activation { kRelu, kSigmoid, kIdentity };

std::string_view to_string(Activation activation);
Activation activation_from_string(std::string_view name);

// One fully connected layer: y = act(W x + b), W is out x in.
struct DenseLayer {
  Matrix weight;
  Vector bias;
  Activation activation = Activation::kIdentity;

  std::size_t in_dim() const { return static_cast<std::size_t>(weight.cols()); }
  std::size_t out_dim() const { return static_cast<std::size_t>(weight.rows()); }
};

struct LayerSpec {
  std::size_t in = 0;
  std::size_t out = 0;
  Activation activation = Activation::kIdentity;
};

// Gradient of a scalar loss w.r.t. one layer's parameters.
struct LayerGrad {
  Matrix weight;
  Vector bias;
};

struct Gradients {
  std::vector<LayerGrad> layers;
  // d loss / d input batch, n x in.
  Matrix input;
};

class DenseNetwork;

// Activations cached by forward() for a later backward() on the same network.
struct Tape {
  const DenseNetwork* owner = nullptr;
  std::uint64_t generation = 0;
  std::vector<Matrix> inputs;   // input of layer k, n x in_k
  std::vector<Matrix> outputs;  // post-activation output of layer k, n x out_k
};

// Sequential stack of dense layers. Batches are row-major in the sense that
// every row is one sample.
class DenseNetwork {
 public:
  DenseNetwork() = default;
  explicit DenseNetwork(std::vector<DenseLayer> layers);

  // Glorot-uniform weights, zero biases.
  static DenseNetwork glorot(std::span<const LayerSpec> specs, Rng& rng);

  std::size_t input_dim() const;
  std::size_t output_dim() const;
  std::size_t num_layers() const { return layers_.size(); }
  std::size_t num_parameters() const;
  bool empty() const { return layers_.empty(); }

  const std::vector<DenseLayer>& layers() const { return layers_; }
  const DenseLayer& layer(std::size_t k) const { return layers_.at(k); }

  // Mutable access invalidates every outstanding tape.
  DenseLayer& mutable_layer(std::size_t k);

  std::uint64_t generation() const { return generation_; }

  // Throws ConfigError on width mismatch, DataError on non-finite input.
  Matrix forward(const Matrix& batch, Tape* tape = nullptr) const;

  // Exact reverse-mode pass. Throws UsageError if the tape was produced by a
  // different network or before the parameters last changed.
  Gradients backward(const Tape& tape, const Matrix& output_grad) const;

  bool all_finite() const;

 private:
  void validate() const;

  std::vector<DenseLayer> layers_;
  std::uint64_t generation_ = 0;
};

// Zero-valued gradients shaped like `net`.
Gradients zeros_like(const DenseNetwork& net);

// Adds the gradient of coeff * sum(W^2) over every weight matrix (biases are
// not penalized).
void add_l2_penalty(Gradients& grads, const DenseNetwork& net, double coeff);
double l2_penalty(const DenseNetwork& net, double coeff);

}  // namespace uinvase::nn
