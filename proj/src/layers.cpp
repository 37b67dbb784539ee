#include "strokeforge/layers.hpp"

#include <cmath>

#include "strokeforge/errors.hpp"
#include "strokeforge/ops.hpp"

namespace strokeforge {

namespace {

Tensor use(const Tensor& p, const ForwardMode& mode) { return mode.freeze_params ? p.detach() : p; }

std::vector<double> softmax3(const Tensor& logits) {
  std::vector<double> w(logits.data().begin(), logits.data().end());
  double mx = w[0];
  for (double v : w) mx = std::max(mx, v);
  double z = 0.0;
  for (auto& v : w) z += (v = std::exp(v - mx));
  for (auto& v : w) v /= z;
  return w;
}

}  // namespace

SeParams make_se_params(std::size_t channels, std::size_t reduction) {
  if (reduction == 0 || channels < reduction || channels % reduction != 0) {
    throw ConfigError("SE block needs channels (" + std::to_string(channels) +
                      ") divisible by and not smaller than reduction (" + std::to_string(reduction) + ")");
  }
  const std::size_t hidden = channels / reduction;
  return {Tensor::zeros({hidden, channels, 1, 1}, true), Tensor::zeros({hidden}, true),
          Tensor::zeros({channels, hidden, 1, 1}, true), Tensor::zeros({channels}, true)};
}

Tensor se_block(const Tensor& x, const SeParams& params, std::size_t reduction, const ForwardMode& mode) {
  if (x.rank() != 4) throw ShapeError("se_block expects [N,C,H,W], got " + shape_str(x.shape()));
  const std::size_t c = x.dim(1);
  if (reduction == 0 || c < reduction || c % reduction != 0) {
    throw ConfigError("SE block needs channels (" + std::to_string(c) + ") divisible by reduction (" +
                      std::to_string(reduction) + ")");
  }
  if (params.fc1_weight.dim(1) != c || params.fc2_weight.dim(0) != c) {
    throw ShapeError("SE parameters do not match " + std::to_string(c) + " channels");
  }
  auto squeezed = avgpool_global(x);
  auto hidden = relu(conv2d(squeezed, use(params.fc1_weight, mode), use(params.fc1_bias, mode)));
  auto gate = sigmoid(conv2d(hidden, use(params.fc2_weight, mode), use(params.fc2_bias, mode)));
  return mul(x, gate);
}

NormParams make_norm_params(NormKind kind, std::size_t channels) {
  NormParams p;
  p.kind = kind;
  if (kind == NormKind::none) return p;
  p.gamma = Tensor::full({channels}, 1.0, true);
  p.beta = Tensor::zeros({channels}, true);
  if (kind == NormKind::switchable) {
    p.mean_logits = Tensor::zeros({3}, true);
    p.var_logits = Tensor::zeros({3}, true);
  }
  p.running_mean = Tensor::zeros({channels});
  p.running_var = Tensor::full({channels}, 1.0);
  return p;
}

std::vector<double> norm_mean_weights(const NormParams& params) {
  if (params.kind == NormKind::batch) return {0.0, 0.0, 1.0};
  return softmax3(params.mean_logits);
}

std::vector<double> norm_var_weights(const NormParams& params) {
  if (params.kind == NormKind::batch) return {0.0, 0.0, 1.0};
  return softmax3(params.var_logits);
}

Tensor switch_norm(const Tensor& x, NormParams& params, double eps, const ForwardMode& mode) {
  if (params.kind == NormKind::none) return x;
  if (x.rank() != 4) throw ShapeError("switch_norm expects [N,C,H,W], got " + shape_str(x.shape()));
  const std::size_t c = x.dim(1);
  if (params.gamma.dim(0) != c) {
    throw ShapeError("norm parameters sized for " + std::to_string(params.gamma.dim(0)) + " channels, input " +
                     shape_str(x.shape()));
  }

  Tensor mu_bn, var_bn;
  if (mode.training) {
    mu_bn = mean(x, {0, 2, 3}, true);
    var_bn = mean(square(sub(x, mu_bn)), {0, 2, 3}, true);
    if (mode.update_stats) {
      auto rm = params.running_mean.mutable_data();
      auto rv = params.running_var.mutable_data();
      for (std::size_t k = 0; k < c; ++k) {
        rm[k] = (1.0 - params.momentum) * rm[k] + params.momentum * mu_bn[k];
        rv[k] = (1.0 - params.momentum) * rv[k] + params.momentum * var_bn[k];
      }
    }
  } else {
    mu_bn = reshape(params.running_mean, {1, c, 1, 1});
    var_bn = reshape(params.running_var, {1, c, 1, 1});
  }

  Tensor mu, var;
  if (params.kind == NormKind::batch) {
    mu = mu_bn;
    var = var_bn;
  } else {
    auto mu_in = mean(x, {2, 3}, true);
    auto var_in = mean(square(sub(x, mu_in)), {2, 3}, true);
    auto mu_ln = mean(x, {1, 2, 3}, true);
    auto var_ln = mean(square(sub(x, mu_ln)), {1, 2, 3}, true);
    auto wm = softmax(use(params.mean_logits, mode), 0);
    auto wv = softmax(use(params.var_logits, mode), 0);
    mu = add(add(mul(narrow(wm, 0, 0, 1), mu_in), mul(narrow(wm, 0, 1, 1), mu_ln)),
             mul(narrow(wm, 0, 2, 1), mu_bn));
    var = add(add(mul(narrow(wv, 0, 0, 1), var_in), mul(narrow(wv, 0, 1, 1), var_ln)),
              mul(narrow(wv, 0, 2, 1), var_bn));
  }
  auto normalized = div(sub(x, mu), sqrt(add_scalar(var, eps)));
  auto g = reshape(use(params.gamma, mode), {1, c, 1, 1});
  auto b = reshape(use(params.beta, mode), {1, c, 1, 1});
  return add(mul(normalized, g), b);
}

}  // namespace strokeforge
