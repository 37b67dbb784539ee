#pragma once

// Extractor -> generator -> segmentor assembly, joint training, k-fold
// cross-validation and inference.
//
// Generator input channels, in order:
//   0 map_pre   extractor output before the sigmoid
//   1 map_prob  sigmoid(map_pre)
//   2 CBF   3 CBV   4 MTT   5 Tmax
//   6 ctp_mean  temporal mean CTP frame (ctp_max with seventh_channel = ctp_max)
// Every channel is z-scored per case. The gen variant drops channels 0-1;
// the segonly variant feeds channels 2-5 straight to the segmentor.

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "strokeforge/case_record.hpp"
#include "strokeforge/train_config.hpp"
#include "strokeforge/unet.hpp"

namespace strokeforge {

constexpr std::size_t kGeneratorChannels = 7;
constexpr std::size_t kMapChannels = 4;

/// Differentiable per-sample, per-channel z-score of [N,C,H,W].
Tensor zscore_channels(const Tensor& x, double eps = 1e-8);

/// [7,H,W] generator input for one case, channel order as above.
Tensor assemble_generator_input(const Tensor& map_pre, const Tensor& map_prob, const PerfusionMaps& maps,
                                const Tensor& ctp_mean);

/// Case tensors computed once before training; every tensor has a leading
/// batch axis of 1.
struct PreparedCase {
  std::string case_id;
  Tensor frames;    // [1,6,H,W], z-scored sampled CTP frames
  Tensor maps;      // [1,4,H,W], z-scored CBF, CBV, MTT, Tmax
  Tensor ctp_mean;  // [1,1,H,W], z-scored
  TimePoints points;
  bool fallback = false;
  // Labelled cases only.
  std::optional<LesionMask> mask;
  Tensor dwi;      // [1,1,H,W], min-max scaled to [0,1]
  Tensor target;   // [1,1,H,W] binary
  Tensor one_hot;  // [1,2,H,W]
  Tensor weights;  // [1,1,H,W] heatmap
};

PreparedCase prepare_case(const CaseRecord& c, const TrainConfig& cfg);

/// Concatenation of prepared cases along the batch axis.
struct Batch {
  std::vector<std::string> case_ids;
  Tensor frames, maps, ctp_mean;
  Tensor dwi, target, one_hot, weights;  // undefined for unlabelled batches
};

Batch make_batch(const std::vector<const PreparedCase*>& cases);

struct PipelineState {
  TrainConfig cfg;
  std::optional<UNet> extractor;
  std::optional<UNet> generator;
  UNet segmentor;
  /// RMSprop second-moment buffers keyed by qualified parameter name.
  std::map<std::string, std::vector<double>> optimizer;
  std::size_t epoch = 0;

  /// Networks for cfg.variant, Xavier-initialised from `init_seed`.
  PipelineState(const TrainConfig& cfg, std::uint64_t init_seed);

  /// "extractor.", "generator." and "segmentor." prefixed parameters.
  std::vector<NamedTensor> parameters() const;
  std::vector<NamedTensor> buffers() const;
};

struct PipelineOutputs {
  Tensor map_pre;   // [N,1,H,W]   full variant only
  Tensor map_prob;  // [N,1,H,W]   full variant only
  Tensor dwi_g;     // [N,1,H,W]   gen and full variants
  Tensor seg_prob;  // [N,2,H,W]   background, foreground
};

PipelineOutputs forward_pipeline(const Batch& batch, PipelineState& state, const ForwardMode& mode = {});

struct LossParts {
  Tensor total;
  double extractor = 0, generator = 0, segmentor = 0;
};

/// Unweighted sum of the active stage losses, each carrying its own scale.
/// The perceptual features come from `feature_net` (default: the segmentor
/// encoder), always in inference mode with frozen weights.
LossParts total_loss(const PipelineOutputs& out, const Batch& batch, PipelineState& state,
                     UNet* feature_net = nullptr);

struct EpochRecord {
  std::size_t epoch;
  double lr, total, extractor, generator, segmentor;
};

/// Training on a fixed case list. Shuffling is seeded from (seed, fold,
/// epoch), so a checkpoint needs no generator state to continue exactly.
class Trainer {
 public:
  Trainer(const TrainConfig& cfg, std::vector<PreparedCase> cases, std::size_t fold = 0);

  EpochRecord run_epoch();
  void run(std::size_t epochs, const std::function<void(const EpochRecord&)>& on_epoch = {});

  void save(const std::filesystem::path& path) const;
  /// Restores networks, optimizer buffers, epoch counter and loss history.
  void load(const std::filesystem::path& path);

  PipelineState& state() { return state_; }
  const std::vector<EpochRecord>& history() const { return history_; }
  std::size_t fold() const { return fold_; }

 private:
  PipelineState state_;
  std::vector<PreparedCase> cases_;
  std::size_t fold_;
  std::vector<EpochRecord> history_;
};

void save_state(const std::filesystem::path& path, const PipelineState& state,
                const std::vector<EpochRecord>& history = {}, std::size_t fold = 0);
PipelineState load_state(const std::filesystem::path& path, std::vector<EpochRecord>* history = nullptr,
                         std::size_t* fold = nullptr);

struct Prediction {
  LesionMask mask;
  Tensor seg_prob;  // [2,H,W]
  Tensor dwi_g;     // [H,W]; undefined for segonly
};

/// Foreground probability > 0.5, inference mode.
Prediction infer(const CaseRecord& c, PipelineState& state);
Prediction infer(const PreparedCase& c, PipelineState& state);

/// 2|A and B| / (|A| + |B|); two empty masks score 1.
double dice_score(const LesionMask& pred, const LesionMask& truth);

/// Fold index per case: case_ids are sorted, shuffled under `seed` and dealt
/// round-robin, so fold sizes differ by at most one.
std::vector<std::size_t> assign_folds(const std::vector<std::string>& case_ids, std::size_t folds, std::uint64_t seed);

struct FoldReport {
  std::size_t fold;
  std::vector<std::string> validation_ids;
  std::vector<double> case_dice;
  double mean_dice;
  std::vector<EpochRecord> history;
};

struct CvReport {
  std::vector<FoldReport> folds;
  double mean_dice;
};

struct CvOptions {
  std::function<void(std::size_t fold, const EpochRecord&)> on_epoch;
  /// Called with each trained fold's state, e.g. to write checkpoints.
  std::function<void(std::size_t fold, PipelineState&)> on_fold_done;
};

CvReport cross_validate(const std::vector<CaseRecord>& dataset, const TrainConfig& cfg, const CvOptions& options = {});

}  // namespace strokeforge
