#pragma once

#include <cstdint>
#include <vector>

#include "uinvase/nn.hpp"

namespace uinvase::nn {

struct AdamOptions {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Moment accumulators for one network. Shapes mirror the network exactly.
struct AdamState {
  AdamOptions options;
  std::vector<LayerGrad> first_moment;
  std::vector<LayerGrad> second_moment;
  std::uint64_t step = 0;

  static AdamState for_network(const DenseNetwork& net, AdamOptions options = {});
};

// Bias-corrected Adam update of `net` in place. Throws UsageError on shape
// disagreement, ConfigError on non-positive hyperparameters, and TrainingError
// naming the layer when a gradient is not finite.
void adam_step(AdamState& state, DenseNetwork& net, const Gradients& grads);

}  // namespace uinvase::nn
