#include "strokeforge/gradsuite.hpp"

#include <algorithm>
#include <functional>
#include <random>

#include "strokeforge/gradcheck.hpp"
#include "strokeforge/layers.hpp"
#include "strokeforge/losses.hpp"
#include "strokeforge/ops.hpp"
#include "strokeforge/pipeline.hpp"

namespace strokeforge {

namespace {

class Random {
 public:
  explicit Random(std::uint64_t seed) : rng_(seed) {}

  Tensor uniform(Shape shape, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    std::vector<double> v(n);
    for (auto& x : v) x = u(rng_);
    return Tensor::from_data(std::move(shape), std::move(v));
  }

  void fill(Tensor& t, double lo, double hi) {
    std::uniform_real_distribution<double> u(lo, hi);
    for (auto& x : t.mutable_data()) x = u(rng_);
  }

  Tensor mask(Shape shape) {
    std::bernoulli_distribution b(0.3);
    auto t = Tensor::zeros(shape);
    auto v = t.mutable_data();
    for (auto& x : v) x = b(rng_) ? 1.0 : 0.0;
    v[0] = 1.0;
    v[1] = 0.0;
    return t;
  }

 private:
  std::mt19937_64 rng_;
};

}  // namespace

std::vector<GradcheckResult> run_gradient_suite(std::uint64_t seed) {
  Random r(seed);
  std::vector<GradcheckResult> out;
  auto record = [&](const std::string& name, double err) { out.push_back({name, err, err < kGradcheckTolerance}); };

  {
    auto x = r.uniform({2, 2, 8, 8}), k = r.uniform({3, 2, 3, 3}), b = r.uniform({3});
    auto x7 = r.uniform({2, 2, 7, 7});
    auto w = r.uniform({2, 3, 8, 8}), w2 = r.uniform({2, 3, 4, 4});
    record("conv2d", gradcheck([&] { return sum(mul(conv2d(x, k, b, 1, 1), w)); }, {x, k, b}));
    record("conv2d_stride2", gradcheck([&] { return sum(mul(conv2d(x7, k, {}, 2, 1), w2)); }, {x7, k}));
  }
  {
    auto x = r.uniform({2, 2, 8, 8});
    auto wp = r.uniform({2, 2, 4, 4}), wg = r.uniform({2, 2, 1, 1}), wu = r.uniform({2, 2, 16, 16});
    record("maxpool2", gradcheck([&] { return sum(mul(maxpool2(x), wp)); }, {x}));
    record("avgpool_global", gradcheck([&] { return sum(mul(avgpool_global(x), wg)); }, {x}));
    record("upsample_nearest2", gradcheck([&] { return sum(mul(upsample_nearest2(x), wu)); }, {x}));
  }
  {
    auto x = r.uniform({2, 2, 8, 8}, -2.0, 2.0);
    auto w = r.uniform({2, 2, 8, 8});
    record("relu", gradcheck([&] { return sum(mul(relu(x), w)); }, {x}));
    record("sigmoid", gradcheck([&] { return sum(mul(sigmoid(x), w)); }, {x}));
    record("softmax", gradcheck([&] { return sum(mul(softmax(x, 1), w)); }, {x}));
  }
  {
    auto x = r.uniform({2, 4, 8, 8});
    auto p = make_se_params(4, 2);
    for (auto* t : {&p.fc1_weight, &p.fc1_bias, &p.fc2_weight, &p.fc2_bias}) r.fill(*t, -1.0, 1.0);
    auto w = r.uniform({2, 4, 8, 8});
    record("se_block",
           gradcheck([&] { return sum(mul(se_block(x, p, 2), w)); }, {x, p.fc1_weight, p.fc1_bias, p.fc2_weight, p.fc2_bias}));
  }
  {
    auto x = r.uniform({2, 2, 8, 8});
    auto p = make_norm_params(NormKind::switchable, 2);
    r.fill(p.gamma, 0.5, 1.5);
    r.fill(p.beta, -0.5, 0.5);
    r.fill(p.mean_logits, -1.0, 1.0);
    r.fill(p.var_logits, -1.0, 1.0);
    auto w = r.uniform({2, 2, 8, 8});
    const ForwardMode no_stats{true, false, false};
    record("switch_norm", gradcheck([&] { return sum(mul(switch_norm(x, p, 1e-5, no_stats), w)); },
                                    {x, p.gamma, p.beta, p.mean_logits, p.var_logits}));
  }
  {
    auto logits = r.uniform({2, 2, 8, 8}, -2.0, 2.0);
    auto y = one_hot2(r.mask({2, 1, 8, 8}));
    auto wts = r.uniform({2, 1, 8, 8}, 0.5, 2.0);
    auto probs = [&] { return softmax(logits, 1); };
    record("generalized_dice", gradcheck([&] { return generalized_dice(probs(), y); }, {logits}));
    record("weighted_ce", gradcheck([&] { return weighted_ce(probs(), y, wts); }, {logits}));
    record("pr_loss", gradcheck([&] { return pr_loss(probs(), y, wts, 1.0); }, {logits}));
    auto p = r.uniform({2, 1, 8, 8}, 0.05, 0.95);
    auto m = r.mask({2, 1, 8, 8});
    record("extractor_loss", gradcheck([&] { return extractor_loss(p, m, 1.0); }, {p}));
    auto g = r.uniform({2, 1, 8, 8}, 0.05, 0.95), o = r.uniform({2, 1, 8, 8}, 0.0, 1.0);
    auto kf = r.uniform({2, 1, 3, 3});
    FeatureFn features = [&](const Tensor& z) { return std::vector<Tensor>{relu(conv2d(z, kf, {}, 1, 1))}; };
    record("generator_loss", gradcheck([&] { return generator_loss(g, o, wts, features, 0.002, 1.2); }, {g}));
  }
  {
    auto cfg = TrainConfig::desk();
    cfg.image_size = 8;
    cfg.segmentor_base_channels = 4;
    cfg.generator_base_channels = 4;
    cfg.extractor_base_channels = 2;
    cfg.segmentor_depth = cfg.generator_depth = cfg.extractor_depth = 1;
    cfg.feature_stages = 1;
    cfg.se_reduction = 2;
    PipelineState state(cfg, seed);
    for (auto& [name, t] : state.parameters()) {
      Tensor p = t;
      if (name.find("gamma") != std::string::npos) {
        r.fill(p, 0.5, 1.5);
      } else if (name.find("logits") != std::string::npos || name.find("beta") != std::string::npos ||
                 name.find("bias") != std::string::npos) {
        r.fill(p, -0.5, 0.5);
      }
    }
    // The feature network is frozen by construction; a snapshot keeps finite
    // differences of segmentor weights from seeing it.
    UNet frozen(state.segmentor.spec());
    for (std::size_t i = 0; i < frozen.parameters().size(); ++i) {
      Tensor dst = frozen.parameters()[i].second;
      const auto src = state.segmentor.parameters()[i].second.data();
      std::copy(src.begin(), src.end(), dst.mutable_data().begin());
    }
    for (std::size_t i = 0; i < frozen.buffers().size(); ++i) {
      Tensor dst = frozen.buffers()[i].second;
      const auto src = state.segmentor.buffers()[i].second.data();
      std::copy(src.begin(), src.end(), dst.mutable_data().begin());
    }
    Batch b;
    b.frames = r.uniform({2, 6, 8, 8});
    b.maps = r.uniform({2, 4, 8, 8});
    b.ctp_mean = r.uniform({2, 1, 8, 8});
    b.dwi = r.uniform({2, 1, 8, 8}, 0.0, 1.0);
    b.target = r.mask({2, 1, 8, 8});
    b.one_hot = one_hot2(b.target);
    b.weights = r.uniform({2, 1, 8, 8}, 0.5, 2.0);
    const ForwardMode no_stats{true, false, false};
    std::vector<Tensor> wrt{b.frames, b.maps, b.ctp_mean};
    for (const auto& [name, t] : state.parameters()) wrt.push_back(t);
    record("pipeline_full",
           gradcheck([&] { return total_loss(forward_pipeline(b, state, no_stats), b, state, &frozen).total; }, wrt,
                     {1e-4, 1e-5, 1e-6}, kGradcheckTolerance));
  }
  return out;
}

}  // namespace strokeforge
