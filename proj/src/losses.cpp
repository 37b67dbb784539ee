#include "strokeforge/losses.hpp"

#include <cmath>

#include "strokeforge/errors.hpp"
#include "strokeforge/ops.hpp"

namespace strokeforge {

namespace {

void require_same(const Tensor& a, const Tensor& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(what) + ": shape " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
}

void require_pixel_weights(const Tensor& p, const Tensor& w, const char* what) {
  if (w.rank() != 4 || w.dim(0) != p.dim(0) || w.dim(1) != 1 || w.dim(2) != p.dim(2) || w.dim(3) != p.dim(3)) {
    throw ShapeError(std::string(what) + ": weights " + shape_str(w.shape()) + " do not fit " +
                     shape_str(p.shape()));
  }
}

}  // namespace

void LossWeights::validate() const {
  if (alpha < 0 || beta < 0 || gamma < 0 || delta < 0) throw ConfigError("loss weights must be non-negative");
}

Tensor extractor_loss(const Tensor& p, const Tensor& y, double alpha) {
  require_same(p, y, "extractor_loss");
  return scale(mean(abs(sub(p, y))), alpha);
}

Tensor generator_loss(const Tensor& dwi_g, const Tensor& dwi_o, const Tensor& weights, const FeatureFn& features,
                      double beta, double gamma, ImageNorm norm) {
  require_same(dwi_g, dwi_o, "generator_loss");
  require_pixel_weights(dwi_g, weights, "generator_loss");
  auto image = mean(mul(weights, square(sub(dwi_g, dwi_o))));
  if (norm == ImageNorm::root) image = sqrt(add_scalar(image, 1e-12));
  auto loss = scale(image, beta);
  if (gamma == 0.0 || !features) return loss;

  std::vector<Tensor> target;
  {
    NoGradGuard no_grad;
    target = features(dwi_o);
  }
  const auto generated = features(dwi_g);
  if (generated.size() != target.size()) throw ShapeError("feature extractor returned inconsistent stage counts");
  Tensor total;
  std::size_t count = 0;
  for (std::size_t k = 0; k < generated.size(); ++k) {
    require_same(generated[k], target[k], "generator_loss features");
    auto s = sum(square(sub(generated[k], target[k])));
    total = total.defined() ? add(total, s) : s;
    count += generated[k].numel();
  }
  return add(loss, scale(total, gamma / static_cast<double>(count)));
}

Tensor generalized_dice(const Tensor& p, const Tensor& y, double eps) {
  require_same(p, y, "generalized_dice");
  if (p.rank() != 4) throw ShapeError("generalized_dice expects [N,L,H,W], got " + shape_str(p.shape()));
  const std::size_t classes = p.dim(1);
  std::vector<double> class_weight(classes);
  {
    NoGradGuard no_grad;
    auto volume = sum(y, {0, 2, 3}, false);
    for (std::size_t l = 0; l < classes; ++l) {
      const double v = volume[l] + eps;
      class_weight[l] = 1.0 / (v * v);
    }
  }
  auto w = Tensor::from_data({classes}, std::move(class_weight));
  auto intersection = sum(mul(p, y), {0, 2, 3}, false);
  auto total = add(sum(p, {0, 2, 3}, false), sum(y, {0, 2, 3}, false));
  auto numerator = scale(sum(mul(w, intersection)), 2.0);
  auto denominator = add_scalar(sum(mul(w, total)), eps);
  return div(numerator, denominator);
}

Tensor weighted_ce(const Tensor& p, const Tensor& y, const Tensor& weights) {
  require_same(p, y, "weighted_ce");
  require_pixel_weights(p, weights, "weighted_ce");
  auto ce = neg(sum(mul(y, log(clamp(p, kProbFloor, 1.0))), {1}, true));
  return mean(mul(weights, ce));
}

Tensor pr_loss(const Tensor& p, const Tensor& y, const Tensor& weights, double delta, double eps) {
  auto gd = generalized_dice(p, y, eps);
  if (!(gd.item() > 0.0)) throw DomainError("generalized dice is not positive");
  return scale(sub(weighted_ce(p, y, weights), log(gd)), delta);
}

Tensor one_hot2(const Tensor& mask) {
  if (mask.rank() != 4 || mask.dim(1) != 1) throw ShapeError("one_hot2 expects [N,1,H,W], got " + shape_str(mask.shape()));
  const std::size_t n = mask.dim(0), plane = mask.dim(2) * mask.dim(3);
  std::vector<double> out(n * 2 * plane);
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t i = 0; i < plane; ++i) {
      const double fg = mask[s * plane + i] > 0.5 ? 1.0 : 0.0;
      out[(s * 2) * plane + i] = 1.0 - fg;
      out[(s * 2 + 1) * plane + i] = fg;
    }
  }
  return Tensor::from_data({n, 2, mask.dim(2), mask.dim(3)}, std::move(out));
}

}  // namespace strokeforge
