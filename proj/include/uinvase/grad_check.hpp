#pragma once

#include <functional>
#include <span>

#include "uinvase/nn.hpp"

namespace uinvase::nn {

// Scalar loss of a network's output batch. When `grad` is non-null it must be
// filled with d loss / d output (same shape as `output`).
using OutputLoss = std::function<double(const Matrix& output, Matrix* grad)>;

// Max over all parameters of |analytic - numeric| / max(|analytic|, |numeric|, 1e-8),
// where `numeric` is the central difference of `loss` with step `eps`.
// `nets` are perturbed in place and restored; `analytic[i]` belongs to `nets[i]`.
double max_relative_error(std::span<DenseNetwork* const> nets,
                          std::span<const Gradients> analytic,
                          const std::function<double()>& loss, double eps);

// Checks backward() of a single network against finite differences of
// `loss(forward(batch))`. eps must lie in (0, 1e-3].
double grad_check(const DenseNetwork& net, const OutputLoss& loss,
                  const Matrix& batch, double eps);

}  // namespace uinvase::nn
