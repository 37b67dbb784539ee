#pragma once

// Signed Euclidean distance of binary lesion masks and the heat-map weight
// derived from it. Pixel centres sit on the integer grid; foreground pixels
// get -(distance to nearest background pixel), background pixels
// +(distance to nearest foreground pixel), so |sdf| >= 1 everywhere.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "strokeforge/tensor.hpp"

namespace strokeforge {

/// Row-major real-valued plane.
struct Field2D {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> values;

  double at(std::size_t r, std::size_t c) const { return values[r * width + c]; }
  Tensor to_tensor() const;
};

struct LesionMask {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint8_t> values;  // 1 = infarct core

  LesionMask() = default;
  LesionMask(std::size_t h, std::size_t w, std::vector<std::uint8_t> v);

  /// Throws InputError on anything other than exact 0/1 values.
  static LesionMask from_tensor(const Tensor& t);
  /// Foreground where value > threshold.
  static LesionMask threshold(std::span<const double> values, std::size_t h, std::size_t w, double threshold);
  Tensor to_tensor() const;
  std::size_t count() const;
  bool operator==(const LesionMask&) const = default;
};

/// Exact signed distance via two separable lower-envelope passes.
/// An all-background mask yields +inf everywhere, all-foreground -inf.
Field2D signed_distance(const LesionMask& mask);

/// Squared Euclidean distance from each pixel to the nearest site
/// (site[i] != 0); +inf everywhere when there is no site.
std::vector<double> squared_distance_to_sites(const std::vector<std::uint8_t>& sites, std::size_t h,
                                              std::size_t w);

enum class HeatmapMode { boundary, inside };

struct HeatmapParams {
  double w0 = 4.0;
  double sigma = 10.0;
  HeatmapMode mode = HeatmapMode::boundary;
};

/// boundary: W = 1 + w0 * exp(-sdf^2 / (2 sigma^2)).
/// inside:   W = 1 + w0 on the lesion, the boundary law outside.
/// Any infinite sdf (degenerate mask) gives W = 1 everywhere.
Field2D heatmap_from_sdf(const Field2D& sdf, const HeatmapParams& params = {});

Field2D heatmap_from_mask(const LesionMask& mask, const HeatmapParams& params = {});

}  // namespace strokeforge
