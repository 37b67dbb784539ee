#include "strokeforge/unet.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "strokeforge/errors.hpp"
#include "strokeforge/ops.hpp"

namespace strokeforge {

namespace {

Tensor use(const Tensor& p, const ForwardMode& mode) { return mode.freeze_params ? p.detach() : p; }

ConvBlock make_block(std::size_t in, std::size_t out, const UNetSpec& spec) {
  ConvBlock b;
  // A conv bias in front of a mean-subtracting norm is cancelled exactly.
  const bool bias = spec.norm_kind == NormKind::none;
  b.conv1_weight = Tensor::zeros({out, in, 3, 3}, true);
  if (bias) b.conv1_bias = Tensor::zeros({out}, true);
  b.norm1 = make_norm_params(spec.norm_kind, out);
  b.conv2_weight = Tensor::zeros({out, out, 3, 3}, true);
  if (bias) b.conv2_bias = Tensor::zeros({out}, true);
  b.norm2 = make_norm_params(spec.norm_kind, out);
  b.use_se = spec.use_se;
  b.se_reduction = spec.se_reduction;
  if (spec.use_se) b.se = make_se_params(out, spec.se_reduction);
  return b;
}

}  // namespace

Tensor ConvBlock::forward(const Tensor& x, const ForwardMode& mode) {
  const Tensor b1 = conv1_bias.defined() ? use(conv1_bias, mode) : Tensor{};
  const Tensor b2 = conv2_bias.defined() ? use(conv2_bias, mode) : Tensor{};
  auto h = relu(switch_norm(conv2d(x, use(conv1_weight, mode), b1, 1, 1), norm1, 1e-5, mode));
  h = relu(switch_norm(conv2d(h, use(conv2_weight, mode), b2, 1, 1), norm2, 1e-5, mode));
  if (use_se) h = se_block(h, se, se_reduction, mode);
  return h;
}

UNet::UNet(const UNetSpec& spec) : spec_(spec) {
  if (spec.depth < 1) throw ConfigError("UNet depth must be at least 1");
  if (spec.in_channels == 0 || spec.out_channels == 0 || spec.base_channels == 0) {
    throw ConfigError("UNet channel counts must be positive");
  }
  if (spec.image_size != 0 && spec.image_size % (std::size_t{1} << spec.depth) != 0) {
    throw GeometryError("image size " + std::to_string(spec.image_size) + " is not divisible by 2^" +
                        std::to_string(spec.depth));
  }
  std::size_t in = spec.in_channels;
  for (std::size_t s = 0; s < spec.depth; ++s) {
    const std::size_t out = spec.base_channels << s;
    encoders_.push_back(make_block(in, out, spec));
    in = out;
  }
  bottleneck_ = make_block(in, spec.base_channels << spec.depth, spec);
  decoders_.resize(spec.depth);
  for (std::size_t s = spec.depth; s-- > 0;) {
    const std::size_t out = spec.base_channels << s;
    decoders_[s] = make_block((out * 2) + out, out, spec);
  }
  head_weight_ = Tensor::zeros({spec.out_channels, spec.base_channels, 1, 1}, true);
  head_bias_ = Tensor::zeros({spec.out_channels}, true);

  for (std::size_t s = 0; s < spec.depth; ++s) register_block("enc" + std::to_string(s), encoders_[s]);
  register_block("bottleneck", bottleneck_);
  for (std::size_t s = spec.depth; s-- > 0;) register_block("dec" + std::to_string(s), decoders_[s]);
  params_.emplace_back("head.weight", head_weight_);
  params_.emplace_back("head.bias", head_bias_);
}

void UNet::register_block(const std::string& prefix, ConvBlock& block) {
  auto add_norm = [&](const std::string& name, NormParams& n) {
    if (n.kind == NormKind::none) return;
    params_.emplace_back(name + ".gamma", n.gamma);
    params_.emplace_back(name + ".beta", n.beta);
    if (n.kind == NormKind::switchable) {
      params_.emplace_back(name + ".mean_logits", n.mean_logits);
      params_.emplace_back(name + ".var_logits", n.var_logits);
    }
    buffers_.emplace_back(name + ".running_mean", n.running_mean);
    buffers_.emplace_back(name + ".running_var", n.running_var);
  };
  params_.emplace_back(prefix + ".conv1.weight", block.conv1_weight);
  if (block.conv1_bias.defined()) params_.emplace_back(prefix + ".conv1.bias", block.conv1_bias);
  add_norm(prefix + ".norm1", block.norm1);
  params_.emplace_back(prefix + ".conv2.weight", block.conv2_weight);
  if (block.conv2_bias.defined()) params_.emplace_back(prefix + ".conv2.bias", block.conv2_bias);
  add_norm(prefix + ".norm2", block.norm2);
  if (block.use_se) {
    params_.emplace_back(prefix + ".se.fc1.weight", block.se.fc1_weight);
    params_.emplace_back(prefix + ".se.fc1.bias", block.se.fc1_bias);
    params_.emplace_back(prefix + ".se.fc2.weight", block.se.fc2_weight);
    params_.emplace_back(prefix + ".se.fc2.bias", block.se.fc2_bias);
  }
}

void UNet::check_input(const Tensor& x) const {
  if (x.rank() != 4 || x.dim(1) != spec_.in_channels) {
    throw ShapeError("UNet expects [N," + std::to_string(spec_.in_channels) + ",H,W], got " +
                     shape_str(x.shape()));
  }
  const std::size_t m = std::size_t{1} << spec_.depth;
  if (x.dim(2) % m != 0 || x.dim(3) % m != 0) {
    throw GeometryError("UNet of depth " + std::to_string(spec_.depth) + " cannot take spatial extent " +
                        shape_str(x.shape()));
  }
}

Tensor UNet::forward(const Tensor& x, const ForwardMode& mode) {
  check_input(x);
  std::vector<Tensor> skips;
  Tensor h = x;
  for (auto& enc : encoders_) {
    h = enc.forward(h, mode);
    skips.push_back(h);
    h = maxpool2(h);
  }
  h = bottleneck_.forward(h, mode);
  for (std::size_t s = spec_.depth; s-- > 0;) {
    h = concat_channels(upsample_nearest2(h), skips[s]);
    h = decoders_[s].forward(h, mode);
  }
  h = conv2d(h, use(head_weight_, mode), use(head_bias_, mode));
  if (spec_.final_activation == FinalActivation::sigmoid) h = sigmoid(h);
  return h;
}

std::vector<Tensor> UNet::encoder_features(const Tensor& x, std::size_t stages, const ForwardMode& mode) {
  check_input(x);
  if (stages > spec_.depth) throw ConfigError("requested more encoder stages than the UNet depth");
  std::vector<Tensor> out;
  Tensor h = x;
  for (std::size_t s = 0; s < stages; ++s) {
    if (s > 0) h = maxpool2(h);
    h = encoders_[s].forward(h, mode);
    out.push_back(h);
  }
  return out;
}

std::size_t UNet::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : params_) n += t.numel();
  return n;
}

void UNet::zero_grad() {
  for (auto& [name, t] : params_) {
    Tensor h = t;
    h.zero_grad();
  }
}

UNet build_unet(const UNetSpec& spec) { return UNet(spec); }

double xavier_bound(std::size_t fan_in, std::size_t fan_out) {
  return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

void xavier_init(UNet& net, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto ends_with = [](const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
  };
  for (const auto& [name, t] : net.parameters()) {
    Tensor p = t;
    auto v = p.mutable_data();
    if (ends_with(name, ".weight")) {
      const auto& s = p.shape();
      const std::size_t receptive = s[2] * s[3];
      const double a = xavier_bound(s[1] * receptive, s[0] * receptive);
      std::uniform_real_distribution<double> u(-a, a);
      for (auto& x : v) x = u(rng);
    } else if (ends_with(name, ".gamma")) {
      std::fill(v.begin(), v.end(), 1.0);
    } else {
      std::fill(v.begin(), v.end(), 0.0);
    }
  }
  for (const auto& [name, t] : net.buffers()) {
    Tensor b = t;
    auto v = b.mutable_data();
    std::fill(v.begin(), v.end(), ends_with(name, ".running_var") ? 1.0 : 0.0);
  }
}

}  // namespace strokeforge
