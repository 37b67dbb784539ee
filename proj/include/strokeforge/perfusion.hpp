#pragma once

// CTP front end: summed time-density curve, window-5 smoothing, detection
// of onset / peak / end of enhancement, and uniform frame sampling between
// onset and end. The sampled stack is what the extractor network consumes.

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "strokeforge/tensor.hpp"
#include "strokeforge/unet.hpp"

namespace strokeforge {

constexpr std::size_t kMinFrames = 8;
constexpr std::size_t kSampledFrames = 6;
constexpr std::size_t kSmoothWindow = 5;

struct CtpVolume {
  Tensor frames;  // [T,H,W]
  double frame_interval = 1.0;

  std::size_t n_frames() const { return frames.dim(0); }
  std::size_t height() const { return frames.dim(1); }
  std::size_t width() const { return frames.dim(2); }
  /// Throws InputError unless rank 3, T >= 8 and every value is finite.
  void validate() const;
};

struct TimePoints {
  std::size_t onset = 0;
  std::size_t peak = 0;
  std::size_t end = 0;
  bool operator==(const TimePoints&) const = default;
};

struct DetectionParams {
  double threshold_fraction = 0.1;
  /// Baseline averages the first max(min_baseline_frames, T/10) frames.
  std::size_t min_baseline_frames = 3;
};

/// No enhancement above baseline; callers fall back to the full range.
class DetectionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TimeDensityCurve {
  std::vector<double> values;
  std::vector<double> smoothed;
  TimePoints points;
  bool fallback = false;
};

std::vector<double> time_density_curve(const CtpVolume& v);

/// Moving average of width 5 with replicate padding. Throws InputError for
/// curves shorter than the window.
std::vector<double> smooth_curve(std::span<const double> curve);

TimePoints detect_time_points(std::span<const double> smoothed, const DetectionParams& params = {});

/// Curve, smoothing and detection in one pass; on DetectionError the points
/// become [0, T-1] with `fallback` set.
TimeDensityCurve analyze_curve(const CtpVolume& v, const DetectionParams& params = {});

/// round(linspace(onset, end, n)).
std::vector<std::size_t> sample_indices(std::size_t onset, std::size_t end, std::size_t n = kSampledFrames);

/// Stack of the frames at sample_indices, [n,H,W].
Tensor sample_frames(const CtpVolume& v, std::size_t onset, std::size_t end, std::size_t n = kSampledFrames);

/// Per-case z-score over all elements (zero mean, unit variance). Constant
/// input maps to zeros.
Tensor zscore(const Tensor& x);

struct FeatureMaps {
  Tensor map_pre;   // [H,W], extractor output before the sigmoid
  Tensor map_prob;  // [H,W], sigmoid(map_pre)
};

/// Runs preprocessing and the extractor on one case.
FeatureMaps extract_features(const CtpVolume& v, UNet& extractor, const ForwardMode& mode = ForwardMode::inference(),
                             const DetectionParams& params = {});

}  // namespace strokeforge
