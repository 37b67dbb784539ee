#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "strokeforge/layers.hpp"

namespace strokeforge {

enum class FinalActivation { sigmoid, none };

struct UNetSpec {
  std::size_t in_channels = 1;
  std::size_t out_channels = 1;
  std::size_t base_channels = 8;
  std::size_t depth = 3;
  bool use_se = false;
  NormKind norm_kind = NormKind::batch;
  FinalActivation final_activation = FinalActivation::none;
  std::size_t se_reduction = 4;
  /// When nonzero, checked against 2^depth at construction.
  std::size_t image_size = 0;
};

using NamedTensor = std::pair<std::string, Tensor>;

/// Two 3x3 conv -> norm -> relu layers, optionally followed by SE.
struct ConvBlock {
  Tensor conv1_weight, conv1_bias;
  NormParams norm1;
  Tensor conv2_weight, conv2_bias;
  NormParams norm2;
  bool use_se = false;
  std::size_t se_reduction = 4;
  SeParams se;

  Tensor forward(const Tensor& x, const ForwardMode& mode);
};

/// Encoder-decoder with skip connections. Encoder stage s has
/// base_channels * 2^s channels; each stage is a ConvBlock followed by
/// maxpool2. The decoder upsamples (nearest), concatenates the matching
/// encoder output and applies a ConvBlock; a 1x1 conv maps to out_channels.
class UNet {
 public:
  explicit UNet(const UNetSpec& spec);
  UNet(UNet&&) = default;
  UNet& operator=(UNet&&) = default;
  UNet(const UNet&) = delete;
  UNet& operator=(const UNet&) = delete;

  Tensor forward(const Tensor& x, const ForwardMode& mode = {});
  Tensor operator()(const Tensor& x, const ForwardMode& mode = {}) { return forward(x, mode); }

  /// Outputs of the first `stages` encoder blocks (before pooling).
  std::vector<Tensor> encoder_features(const Tensor& x, std::size_t stages, const ForwardMode& mode = {});

  const UNetSpec& spec() const { return spec_; }
  /// Trainable tensors, each registered once, in a stable order.
  const std::vector<NamedTensor>& parameters() const { return params_; }
  /// Running normalization statistics.
  const std::vector<NamedTensor>& buffers() const { return buffers_; }
  std::size_t parameter_count() const;

  ConvBlock& encoder_block(std::size_t s) { return encoders_.at(s); }
  ConvBlock& decoder_block(std::size_t s) { return decoders_.at(s); }
  ConvBlock& bottleneck() { return bottleneck_; }
  Tensor& head_weight() { return head_weight_; }
  Tensor& head_bias() { return head_bias_; }

  void zero_grad();

 private:
  void check_input(const Tensor& x) const;
  void register_block(const std::string& prefix, ConvBlock& block);

  UNetSpec spec_;
  std::vector<ConvBlock> encoders_;
  ConvBlock bottleneck_;
  std::vector<ConvBlock> decoders_;
  Tensor head_weight_, head_bias_;
  std::vector<NamedTensor> params_;
  std::vector<NamedTensor> buffers_;
};

UNet build_unet(const UNetSpec& spec);

/// Xavier-uniform weights in +-sqrt(6/(fan_in+fan_out)), zero biases, unit
/// norm scales, zero norm shifts and mixing logits. Deterministic in `seed`.
void xavier_init(UNet& net, std::uint64_t seed);

/// Bound of the Xavier-uniform law for the given fans.
double xavier_bound(std::size_t fan_in, std::size_t fan_out);

}  // namespace strokeforge
