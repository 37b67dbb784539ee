#pragma once

#include <cstddef>
#include <string>

#include "strokeforge/tensor.hpp"

namespace strokeforge {

/// How a network forward pass treats normalization statistics and weights.
struct ForwardMode {
  bool training = true;
  /// Update running batch statistics (training mode only).
  bool update_stats = true;
  /// Use detached copies of all parameters: gradients reach the input but
  /// never the weights.
  bool freeze_params = false;

  static ForwardMode inference() { return {false, false, false}; }
};

struct SeParams {
  Tensor fc1_weight;  // [C/r, C, 1, 1]
  Tensor fc1_bias;    // [C/r]
  Tensor fc2_weight;  // [C, C/r, 1, 1]
  Tensor fc2_bias;    // [C]
};

SeParams make_se_params(std::size_t channels, std::size_t reduction);

/// Squeeze-and-excitation: x * sigmoid(fc2(relu(fc1(avgpool(x))))).
/// Throws ConfigError when channels < reduction or not divisible by it.
Tensor se_block(const Tensor& x, const SeParams& params, std::size_t reduction,
                const ForwardMode& mode = {});

enum class NormKind { switchable, batch, none };

struct NormParams {
  NormKind kind = NormKind::switchable;
  Tensor gamma;        // [C]
  Tensor beta;         // [C]
  Tensor mean_logits;  // [3]: instance, layer, batch (switchable only)
  Tensor var_logits;   // [3]
  Tensor running_mean;  // [C], buffer
  Tensor running_var;   // [C], buffer
  double momentum = 0.1;
};

NormParams make_norm_params(NormKind kind, std::size_t channels);

/// Switchable normalization over instance, layer and batch statistics mixed
/// by two independent softmaxes. Training mode uses minibatch statistics for
/// the batch term; inference mode substitutes the running averages.
/// NormKind::batch uses the batch term alone; NormKind::none is the identity.
Tensor switch_norm(const Tensor& x, NormParams& params, double eps = 1e-5, const ForwardMode& mode = {});

/// Mixing weights actually applied (softmax of the logits).
std::vector<double> norm_mean_weights(const NormParams& params);
std::vector<double> norm_var_weights(const NormParams& params);

}  // namespace strokeforge
