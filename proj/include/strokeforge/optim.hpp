#pragma once

#include <span>
#include <vector>

#include "strokeforge/tensor.hpp"

namespace strokeforge {

/// s <- rho*s + (1-rho)*g^2;  p <- p - lr*g/(sqrt(s)+eps)
void rmsprop_step(std::span<double> params, std::span<const double> grads, std::span<double> buffers, double lr,
                  double rho, double eps);

/// Tensor form: one buffer per parameter, grown on first use. Parameters
/// without a gradient are skipped.
void rmsprop_step(const std::vector<Tensor>& params, std::vector<std::vector<double>>& buffers, double lr, double rho,
                  double eps);

}  // namespace strokeforge
