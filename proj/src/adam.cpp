#include "uinvase/adam.hpp"

#include <cmath>

#include <fmt/format.h>

#include "uinvase/errors.hpp"

namespace uinvase::nn {

AdamState AdamState::for_network(const DenseNetwork& net, AdamOptions options) {
  AdamState state;
  state.options = options;
  state.first_moment = zeros_like(net).layers;
  state.second_moment = zeros_like(net).layers;
  return state;
}

void adam_step(AdamState& state, DenseNetwork& net, const Gradients& grads) {
  const auto& opt = state.options;
  if (!(opt.learning_rate > 0.0 && opt.beta1 > 0.0 && opt.beta2 > 0.0 &&
        opt.epsilon > 0.0)) {
    throw ConfigError("Adam hyperparameters must be positive");
  }
  const std::size_t n = net.num_layers();
  if (grads.layers.size() != n || state.first_moment.size() != n ||
      state.second_moment.size() != n) {
    throw UsageError("Adam: layer count mismatch between network, state and gradients");
  }
  for (std::size_t k = 0; k < n; ++k) {
    const auto& layer = net.layer(k);
    const auto& g = grads.layers[k];
    if (g.weight.rows() != layer.weight.rows() ||
        g.weight.cols() != layer.weight.cols() ||
        g.bias.size() != layer.bias.size() ||
        state.first_moment[k].weight.rows() != layer.weight.rows() ||
        state.first_moment[k].weight.cols() != layer.weight.cols()) {
      throw UsageError(fmt::format("Adam: shape mismatch at layer {}", k));
    }
    if (!g.weight.allFinite() || !g.bias.allFinite()) {
      throw TrainingError(fmt::format("non-finite gradient in layer {}", k));
    }
  }

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(opt.beta1, t);
  const double correction2 = 1.0 - std::pow(opt.beta2, t);

  auto update = [&](auto& param, auto& m, auto& v, const auto& g) {
    m = opt.beta1 * m + (1.0 - opt.beta1) * g;
    v = opt.beta2 * v + (1.0 - opt.beta2) * g.cwiseProduct(g);
    param.array() -= opt.learning_rate * (m.array() / correction1) /
                     ((v.array() / correction2).sqrt() + opt.epsilon);
  };

  for (std::size_t k = 0; k < n; ++k) {
    auto& layer = net.mutable_layer(k);
    auto& m = state.first_moment[k];
    auto& v = state.second_moment[k];
    update(layer.weight, m.weight, v.weight, grads.layers[k].weight);
    update(layer.bias, m.bias, v.bias, grads.layers[k].bias);
  }
}

}  // namespace uinvase::nn
