#pragma once

// Training losses. All reductions are means so the scale factors keep their
// meaning across image sizes.
//
//   extractor:  alpha * mean |p - y|
//   generator:  beta * mean(W * (g - o)^2) + gamma * mean((F(g) - F(o))^2)
//   segmentor:  delta * (weighted_ce - log(generalized_dice))

#include <functional>
#include <vector>

#include "strokeforge/tensor.hpp"

namespace strokeforge {

struct LossWeights {
  double alpha = 1.0;
  double beta = 0.002;
  double gamma = 1.2;
  double delta = 1.0;

  /// Throws ConfigError if any weight is negative.
  void validate() const;
  bool operator==(const LossWeights&) const = default;
};

constexpr double kDiceEps = 1e-5;
constexpr double kProbFloor = 1e-12;

enum class ImageNorm { squared, root };

/// Maps an image batch to the feature maps compared by the generator loss.
using FeatureFn = std::function<std::vector<Tensor>(const Tensor&)>;

Tensor extractor_loss(const Tensor& p, const Tensor& y, double alpha);

/// The `dwi_o` feature branch is evaluated without recording a graph; only
/// `dwi_g` receives gradient. An empty `features` or gamma == 0 drops the
/// feature term.
Tensor generator_loss(const Tensor& dwi_g, const Tensor& dwi_o, const Tensor& weights, const FeatureFn& features,
                      double beta, double gamma, ImageNorm norm = ImageNorm::squared);

/// p, y: [N,L,H,W]; class weights 1/(sum y_l + eps)^2 are constants.
Tensor generalized_dice(const Tensor& p, const Tensor& y, double eps = kDiceEps);

/// Mean over pixels of W_i * (-sum_l y_li log p_li); p clamped to [1e-12, 1].
/// `weights` is [N,1,H,W].
Tensor weighted_ce(const Tensor& p, const Tensor& y, const Tensor& weights);

Tensor pr_loss(const Tensor& p, const Tensor& y, const Tensor& weights, double delta, double eps = kDiceEps);

/// [N,1,H,W] binary mask -> [N,2,H,W] (background, foreground).
Tensor one_hot2(const Tensor& mask);

}  // namespace strokeforge
