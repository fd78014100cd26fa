#include "uinvase/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "uinvase/errors.hpp"

namespace uinvase::nn {

namespace {

double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / denom;
}

}  // namespace

double max_relative_error(std::span<DenseNetwork* const> nets,
                          std::span<const Gradients> analytic,
                          const std::function<double()>& loss, double eps) {
  if (!(eps > 0.0 && eps <= 1e-3)) {
    throw UsageError("grad_check: eps must lie in (0, 1e-3]");
  }
  if (nets.size() != analytic.size()) {
    throw UsageError("grad_check: one gradient set per network required");
  }
  double worst = 0.0;
  for (std::size_t i = 0; i < nets.size(); ++i) {
    DenseNetwork& net = *nets[i];
    for (std::size_t k = 0; k < net.num_layers(); ++k) {
      auto probe = [&](auto get_param, double analytic_value) {
        double& p = get_param();
        const double saved = p;
        p = saved + eps;
        const double plus = loss();
        p = saved - eps;
        const double minus = loss();
        p = saved;
        worst = std::max(worst,
                         relative_error(analytic_value, (plus - minus) / (2.0 * eps)));
      };
      const auto& grad = analytic[i].layers.at(k);
      const auto rows = net.layer(k).weight.rows();
      const auto cols = net.layer(k).weight.cols();
      for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < cols; ++c) {
          probe([&]() -> double& { return net.mutable_layer(k).weight(r, c); },
                grad.weight(r, c));
        }
        probe([&]() -> double& { return net.mutable_layer(k).bias(r); },
              grad.bias(r));
      }
    }
  }
  return worst;
}

double grad_check(const DenseNetwork& net, const OutputLoss& loss,
                  const Matrix& batch, double eps) {
  DenseNetwork work = net;
  Tape tape;
  const Matrix out = work.forward(batch, &tape);
  Matrix out_grad(out.rows(), out.cols());
  loss(out, &out_grad);
  const Gradients grads = work.backward(tape, out_grad);

  DenseNetwork* nets[] = {&work};
  const Gradients analytic[] = {grads};
  return max_relative_error(nets, analytic,
                            [&] { return loss(work.forward(batch), nullptr); }, eps);
}

}  // namespace uinvase::nn
