#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "strokeforge/config.hpp"
#include "strokeforge/geometry.hpp"
#include "strokeforge/losses.hpp"

namespace strokeforge {

/// Which networks take part. segonly: segmentor on the four perfusion maps.
/// gen: generator on [ctp_mean, CBF, CBV, MTT, Tmax], segmentor on its
/// output. full: extractor + generator on all seven channels + segmentor.
enum class Variant { segonly, gen, full };

std::string to_string(Variant v);
Variant parse_variant(const std::string& s);

struct TrainConfig {
  std::string preset = "paper";
  Variant variant = Variant::full;

  LossWeights loss_weights;
  std::size_t batch_size = 5;
  double base_lr = 0.002;
  double lr_decay_factor = 0.2;
  std::vector<std::size_t> lr_decay_epochs{180, 300};
  std::size_t warmup_epochs = 5;
  std::size_t total_epochs = 400;
  std::uint64_t seed = 2018;
  double rmsprop_rho = 0.9;
  double rmsprop_eps = 1e-8;
  std::size_t folds = 4;
  std::size_t image_size = 256;

  // Architecture.
  std::size_t segmentor_base_channels = 32;
  std::size_t generator_base_channels = 32;
  std::size_t extractor_base_channels = 16;
  std::size_t segmentor_depth = 4;
  std::size_t generator_depth = 4;
  std::size_t extractor_depth = 3;
  std::size_t se_reduction = 16;
  /// Encoder stages of the segmentor used as the generator's feature network.
  std::size_t feature_stages = 2;

  // Loss details.
  double heatmap_w0 = 4.0;
  double heatmap_sigma = 10.0;
  HeatmapMode heatmap_mode = HeatmapMode::boundary;
  ImageNorm generator_norm = ImageNorm::squared;
  /// Train each stage on its own loss only (no gradient between stages).
  bool detach_stages = false;
  /// Seventh generator channel: ctp_mean (temporal mean frame) or ctp_max.
  std::string seventh_channel = "ctp_mean";

  static TrainConfig paper();
  /// 64x64 images, 40 epochs, milestones rescaled to [18, 30], narrower nets.
  static TrainConfig desk();
  static TrainConfig named(const std::string& preset);

  /// `preset` (if present) picks the starting point; every other key
  /// overrides the field of the same name. Unknown keys are errors.
  static TrainConfig from_config(const KeyValueConfig& cfg);
  /// key = value text that from_config reads back to an equal config.
  std::string to_text() const;

  HeatmapParams heatmap() const { return {heatmap_w0, heatmap_sigma, heatmap_mode}; }
  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

/// Linear warm-up from 0.1 * base_lr to base_lr over warmup_epochs, then
/// base_lr * decay^(number of milestones <= epoch).
double lr_schedule(std::size_t epoch, const TrainConfig& cfg);

}  // namespace strokeforge
