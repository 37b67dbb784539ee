#include "strokeforge/perfusion.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "strokeforge/errors.hpp"
#include "strokeforge/ops.hpp"

namespace strokeforge {

void CtpVolume::validate() const {
  if (!frames.defined() || frames.rank() != 3) {
    throw InputError("CTP volume must be [T,H,W]");
  }
  if (frames.dim(0) < kMinFrames) {
    throw InputError("CTP volume needs at least " + std::to_string(kMinFrames) + " frames, got " +
                     std::to_string(frames.dim(0)));
  }
  for (double v : frames.data()) {
    if (!std::isfinite(v)) throw InputError("CTP volume contains a non-finite intensity");
  }
}

std::vector<double> time_density_curve(const CtpVolume& v) {
  v.validate();
  const std::size_t t = v.n_frames();
  const std::size_t plane = v.height() * v.width();
  const auto d = v.frames.data();
  std::vector<double> curve(t, 0.0);
  for (std::size_t f = 0; f < t; ++f) {
    double s = 0.0;
    for (std::size_t i = 0; i < plane; ++i) s += d[f * plane + i];
    curve[f] = s;
  }
  return curve;
}

std::vector<double> smooth_curve(std::span<const double> curve) {
  const std::size_t n = curve.size();
  if (n < kSmoothWindow) {
    throw InputError("smoothing needs at least " + std::to_string(kSmoothWindow) + " samples, got " +
                     std::to_string(n));
  }
  const long half = static_cast<long>(kSmoothWindow / 2);
  std::vector<double> out(n);
  for (long i = 0; i < static_cast<long>(n); ++i) {
    double s = 0.0;
    for (long k = -half; k <= half; ++k) {
      const long j = std::clamp(i + k, 0L, static_cast<long>(n) - 1);
      s += curve[static_cast<std::size_t>(j)];
    }
    out[static_cast<std::size_t>(i)] = s / static_cast<double>(kSmoothWindow);
  }
  return out;
}

TimePoints detect_time_points(std::span<const double> smoothed, const DetectionParams& params) {
  const std::size_t n = smoothed.size();
  if (n == 0) throw InputError("empty curve");
  const std::size_t nb = std::min(n, std::max(params.min_baseline_frames, n / 10));
  double baseline = 0.0;
  for (std::size_t i = 0; i < nb; ++i) baseline += smoothed[i];
  baseline /= static_cast<double>(nb);

  TimePoints tp;
  tp.peak = static_cast<std::size_t>(std::max_element(smoothed.begin(), smoothed.end()) - smoothed.begin());
  const double peak_value = smoothed[tp.peak];
  if (!(peak_value > baseline)) {
    throw DetectionError("no contrast enhancement: peak " + std::to_string(peak_value) + " <= baseline " +
                         std::to_string(baseline));
  }
  const double threshold = baseline + params.threshold_fraction * (peak_value - baseline);
  tp.onset = tp.peak;
  for (std::size_t i = 0; i <= tp.peak; ++i) {
    if (smoothed[i] > threshold) {
      tp.onset = i;
      break;
    }
  }
  tp.end = n - 1;
  for (std::size_t i = tp.peak + 1; i < n; ++i) {
    if (smoothed[i] < threshold) {
      tp.end = i;
      break;
    }
  }
  return tp;
}

TimeDensityCurve analyze_curve(const CtpVolume& v, const DetectionParams& params) {
  TimeDensityCurve c;
  c.values = time_density_curve(v);
  c.smoothed = smooth_curve(c.values);
  try {
    c.points = detect_time_points(c.smoothed, params);
  } catch (const DetectionError&) {
    c.fallback = true;
    c.points = {0, static_cast<std::size_t>(std::max_element(c.smoothed.begin(), c.smoothed.end()) -
                                            c.smoothed.begin()),
                c.values.size() - 1};
  }
  return c;
}

std::vector<std::size_t> sample_indices(std::size_t onset, std::size_t end, std::size_t n) {
  if (onset > end) throw InputError("sample interval has onset after end");
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = n == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(n - 1);
    idx[i] = static_cast<std::size_t>(std::lround(static_cast<double>(onset) + t * static_cast<double>(end - onset)));
  }
  return idx;
}

Tensor sample_frames(const CtpVolume& v, std::size_t onset, std::size_t end, std::size_t n) {
  v.validate();
  if (end >= v.n_frames()) throw InputError("sample interval extends past the last frame");
  const auto idx = sample_indices(onset, end, n);
  const std::size_t plane = v.height() * v.width();
  const auto d = v.frames.data();
  std::vector<double> out(n * plane);
  for (std::size_t i = 0; i < n; ++i) {
    std::copy_n(d.begin() + idx[i] * plane, plane, out.begin() + i * plane);
  }
  return Tensor::from_data({n, v.height(), v.width()}, std::move(out));
}

Tensor zscore(const Tensor& x) {
  const auto d = x.data();
  double m = 0.0;
  for (double v : d) m += v;
  m /= static_cast<double>(d.size());
  double var = 0.0;
  for (double v : d) var += (v - m) * (v - m);
  var /= static_cast<double>(d.size());
  const double inv = var > 0.0 ? 1.0 / std::sqrt(var) : 0.0;
  std::vector<double> out(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) out[i] = (d[i] - m) * inv;
  return Tensor::from_data(x.shape(), std::move(out));
}

FeatureMaps extract_features(const CtpVolume& v, UNet& extractor, const ForwardMode& mode,
                             const DetectionParams& params) {
  const auto curve = analyze_curve(v, params);
  auto stack = zscore(sample_frames(v, curve.points.onset, curve.points.end));
  const std::size_t h = v.height(), w = v.width();
  auto input = reshape(stack, {1, kSampledFrames, h, w});
  auto out = extractor.forward(input, mode);
  if (out.dim(1) != 1 || out.dim(2) != h || out.dim(3) != w) {
    throw GeometryError("extractor output " + shape_str(out.shape()) + " does not match the input plane");
  }
  FeatureMaps maps;
  maps.map_pre = reshape(out, {h, w});
  maps.map_prob = sigmoid(maps.map_pre);
  return maps;
}

}  // namespace strokeforge
