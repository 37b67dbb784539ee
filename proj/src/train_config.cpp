#include "strokeforge/train_config.hpp"

#include <cmath>
#include <sstream>

#include "strokeforge/errors.hpp"

namespace strokeforge {

std::string to_string(Variant v) {
  switch (v) {
    case Variant::segonly: return "segonly";
    case Variant::gen: return "gen";
    case Variant::full: return "full";
  }
  return "full";
}

Variant parse_variant(const std::string& s) {
  if (s == "segonly") return Variant::segonly;
  if (s == "gen") return Variant::gen;
  if (s == "full") return Variant::full;
  throw ConfigError("unknown variant '" + s + "' (expected segonly, gen or full)");
}

TrainConfig TrainConfig::paper() { return TrainConfig{}; }

TrainConfig TrainConfig::desk() {
  TrainConfig c;
  c.preset = "desk";
  c.image_size = 64;
  c.total_epochs = 40;
  c.lr_decay_epochs = {18, 30};
  c.segmentor_base_channels = 8;
  c.generator_base_channels = 8;
  c.extractor_base_channels = 4;
  c.segmentor_depth = 3;
  c.generator_depth = 3;
  c.extractor_depth = 3;
  c.se_reduction = 4;
  c.heatmap_sigma = 3.0;
  return c;
}

TrainConfig TrainConfig::named(const std::string& preset) {
  if (preset == "paper") return paper();
  if (preset == "desk") return desk();
  throw ConfigError("unknown preset '" + preset + "' (expected paper or desk)");
}

namespace {

std::string join(const std::vector<std::size_t>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + std::to_string(v[i]);
  return out;
}

std::string num(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

TrainConfig TrainConfig::from_config(const KeyValueConfig& kv) {
  TrainConfig c = named(kv.get_string("preset", "paper"));
  c.variant = parse_variant(kv.get_string("variant", to_string(c.variant)));
  c.loss_weights.alpha = kv.get_double("alpha", c.loss_weights.alpha);
  c.loss_weights.beta = kv.get_double("beta", c.loss_weights.beta);
  c.loss_weights.gamma = kv.get_double("gamma", c.loss_weights.gamma);
  c.loss_weights.delta = kv.get_double("delta", c.loss_weights.delta);
  c.batch_size = kv.get_uint("batch_size", c.batch_size);
  c.base_lr = kv.get_double("base_lr", c.base_lr);
  c.lr_decay_factor = kv.get_double("lr_decay_factor", c.lr_decay_factor);
  std::vector<std::uint64_t> ms(c.lr_decay_epochs.begin(), c.lr_decay_epochs.end());
  ms = kv.get_uints("lr_decay_epochs", ms);
  c.lr_decay_epochs.assign(ms.begin(), ms.end());
  c.warmup_epochs = kv.get_uint("warmup_epochs", c.warmup_epochs);
  c.total_epochs = kv.get_uint("total_epochs", c.total_epochs);
  c.seed = kv.get_uint("seed", c.seed);
  c.rmsprop_rho = kv.get_double("rmsprop_rho", c.rmsprop_rho);
  c.rmsprop_eps = kv.get_double("rmsprop_eps", c.rmsprop_eps);
  c.folds = kv.get_uint("folds", c.folds);
  c.image_size = kv.get_uint("image_size", c.image_size);
  c.segmentor_base_channels = kv.get_uint("segmentor_base_channels", c.segmentor_base_channels);
  c.generator_base_channels = kv.get_uint("generator_base_channels", c.generator_base_channels);
  c.extractor_base_channels = kv.get_uint("extractor_base_channels", c.extractor_base_channels);
  c.segmentor_depth = kv.get_uint("segmentor_depth", c.segmentor_depth);
  c.generator_depth = kv.get_uint("generator_depth", c.generator_depth);
  c.extractor_depth = kv.get_uint("extractor_depth", c.extractor_depth);
  c.se_reduction = kv.get_uint("se_reduction", c.se_reduction);
  c.feature_stages = kv.get_uint("feature_stages", c.feature_stages);
  c.heatmap_w0 = kv.get_double("heatmap_w0", c.heatmap_w0);
  c.heatmap_sigma = kv.get_double("heatmap_sigma", c.heatmap_sigma);
  const auto mode = kv.get_string("heatmap_mode", c.heatmap_mode == HeatmapMode::inside ? "inside" : "boundary");
  if (mode != "inside" && mode != "boundary") throw ConfigError("heatmap_mode must be boundary or inside, got '" + mode + "'");
  c.heatmap_mode = mode == "inside" ? HeatmapMode::inside : HeatmapMode::boundary;
  const auto norm = kv.get_string("generator_norm", c.generator_norm == ImageNorm::root ? "root" : "squared");
  if (norm != "root" && norm != "squared") throw ConfigError("generator_norm must be squared or root, got '" + norm + "'");
  c.generator_norm = norm == "root" ? ImageNorm::root : ImageNorm::squared;
  c.detach_stages = kv.get_bool("detach_stages", c.detach_stages);
  c.seventh_channel = kv.get_string("seventh_channel", c.seventh_channel);
  kv.reject_unused();
  c.validate();
  return c;
}

std::string TrainConfig::to_text() const {
  std::ostringstream os;
  os << "preset = " << preset << '\n'
     << "variant = " << to_string(variant) << '\n'
     << "alpha = " << num(loss_weights.alpha) << '\n'
     << "beta = " << num(loss_weights.beta) << '\n'
     << "gamma = " << num(loss_weights.gamma) << '\n'
     << "delta = " << num(loss_weights.delta) << '\n'
     << "batch_size = " << batch_size << '\n'
     << "base_lr = " << num(base_lr) << '\n'
     << "lr_decay_factor = " << num(lr_decay_factor) << '\n'
     << "lr_decay_epochs = " << join(lr_decay_epochs) << '\n'
     << "warmup_epochs = " << warmup_epochs << '\n'
     << "total_epochs = " << total_epochs << '\n'
     << "seed = " << seed << '\n'
     << "rmsprop_rho = " << num(rmsprop_rho) << '\n'
     << "rmsprop_eps = " << num(rmsprop_eps) << '\n'
     << "folds = " << folds << '\n'
     << "image_size = " << image_size << '\n'
     << "segmentor_base_channels = " << segmentor_base_channels << '\n'
     << "generator_base_channels = " << generator_base_channels << '\n'
     << "extractor_base_channels = " << extractor_base_channels << '\n'
     << "segmentor_depth = " << segmentor_depth << '\n'
     << "generator_depth = " << generator_depth << '\n'
     << "extractor_depth = " << extractor_depth << '\n'
     << "se_reduction = " << se_reduction << '\n'
     << "feature_stages = " << feature_stages << '\n'
     << "heatmap_w0 = " << num(heatmap_w0) << '\n'
     << "heatmap_sigma = " << num(heatmap_sigma) << '\n'
     << "heatmap_mode = " << (heatmap_mode == HeatmapMode::inside ? "inside" : "boundary") << '\n'
     << "generator_norm = " << (generator_norm == ImageNorm::root ? "root" : "squared") << '\n'
     << "detach_stages = " << (detach_stages ? "true" : "false") << '\n'
     << "seventh_channel = " << seventh_channel << '\n';
  return os.str();
}

void TrainConfig::validate() const {
  loss_weights.validate();
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (!(base_lr > 0.0)) throw ConfigError("base_lr must be positive");
  if (!(lr_decay_factor > 0.0 && lr_decay_factor <= 1.0)) throw ConfigError("lr_decay_factor must be in (0, 1]");
  for (std::size_t i = 1; i < lr_decay_epochs.size(); ++i) {
    if (lr_decay_epochs[i] <= lr_decay_epochs[i - 1]) throw ConfigError("lr_decay_epochs must be increasing");
  }
  if (!(rmsprop_rho >= 0.0 && rmsprop_rho < 1.0)) throw ConfigError("rmsprop_rho must be in [0, 1)");
  if (!(rmsprop_eps >= 0.0)) throw ConfigError("rmsprop_eps must be non-negative");
  if (folds < 2) throw ConfigError("folds must be at least 2");
  if (total_epochs == 0) throw ConfigError("total_epochs must be positive");
  const std::size_t deepest = std::max({segmentor_depth, generator_depth, extractor_depth});
  if (image_size == 0 || image_size % (std::size_t{1} << deepest) != 0) {
    throw GeometryError("image_size " + std::to_string(image_size) + " is not divisible by 2^" + std::to_string(deepest));
  }
  if (feature_stages == 0 || feature_stages > segmentor_depth) {
    throw ConfigError("feature_stages must be in [1, segmentor_depth]");
  }
  if (!(heatmap_w0 > 0.0) || !(heatmap_sigma > 0.0)) throw ConfigError("heatmap_w0 and heatmap_sigma must be positive");
  if (seventh_channel != "ctp_mean" && seventh_channel != "ctp_max") {
    throw ConfigError("seventh_channel must be ctp_mean or ctp_max, got '" + seventh_channel + "'");
  }
}

double lr_schedule(std::size_t epoch, const TrainConfig& cfg) {
  if (epoch < cfg.warmup_epochs) {
    const double t = static_cast<double>(epoch) / static_cast<double>(cfg.warmup_epochs);
    return cfg.base_lr * (0.1 + 0.9 * t);
  }
  int passed = 0;
  for (auto m : cfg.lr_decay_epochs) passed += epoch >= m ? 1 : 0;
  return cfg.base_lr * std::pow(cfg.lr_decay_factor, passed);
}

}  // namespace strokeforge
