#include "strokeforge/optim.hpp"

#include <cmath>

#include "strokeforge/errors.hpp"

namespace strokeforge {

void rmsprop_step(std::span<double> params, std::span<const double> grads, std::span<double> buffers, double lr,
                  double rho, double eps) {
  if (params.size() != grads.size() || params.size() != buffers.size()) {
    throw ShapeError("rmsprop_step: parameter, gradient and buffer sizes differ");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    buffers[i] = rho * buffers[i] + (1.0 - rho) * g * g;
    const double denom = std::sqrt(buffers[i]) + eps;
    if (g != 0.0) params[i] -= lr * g / denom;
  }
}

void rmsprop_step(const std::vector<Tensor>& params, std::vector<std::vector<double>>& buffers, double lr, double rho,
                  double eps) {
  buffers.resize(params.size());
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor p = params[k];
    if (!p.has_grad()) continue;
    auto& s = buffers[k];
    if (s.empty()) s.assign(p.numel(), 0.0);
    const auto& g = p.node().grad;
    rmsprop_step(p.mutable_data(), g, s, lr, rho, eps);
  }
}

}  // namespace strokeforge
