#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "strokeforge/geometry.hpp"
#include "strokeforge/tensor.hpp"

namespace strokeforge {

/// 8-bit RGB raster, row-major, 3 bytes per pixel.
struct RgbImage {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint8_t> rgb;

  std::array<std::uint8_t, 3> at(std::size_t y, std::size_t x) const {
    const std::size_t i = 3 * (y * width + x);
    return {rgb[i], rgb[i + 1], rgb[i + 2]};
  }
};

/// Contour pixels: foreground pixels with a 4-neighbour outside the mask or
/// on the image border.
std::vector<std::uint8_t> mask_contour(const LesionMask& mask);

/// Grayscale base (min-max scaled `image`) with the truth contour drawn in
/// green and the predicted contour in red; pixels on both are yellow.
RgbImage render_overlay(const Tensor& image, const LesionMask& truth, const LesionMask& pred);

void write_png(const std::filesystem::path& path, const RgbImage& img);
RgbImage read_png(const std::filesystem::path& path);

void emit_overlay(const std::filesystem::path& path, const Tensor& image, const LesionMask& truth,
                  const LesionMask& pred);

}  // namespace strokeforge
