#include "strokeforge/overlay.hpp"

#include <png.h>

#include <algorithm>
#include <csetjmp>
#include <cstdio>
#include <memory>

#include "strokeforge/errors.hpp"

namespace strokeforge {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) throw InputError("cannot open " + path.string());
  return f;
}


}  // namespace

std::vector<std::uint8_t> mask_contour(const LesionMask& mask) {
  const std::size_t h = mask.height, w = mask.width;
  std::vector<std::uint8_t> out(h * w, 0);
  auto fg = [&](long y, long x) {
    return y >= 0 && x >= 0 && y < static_cast<long>(h) && x < static_cast<long>(w) && mask.values[y * w + x] != 0;
  };
  for (long y = 0; y < static_cast<long>(h); ++y) {
    for (long x = 0; x < static_cast<long>(w); ++x) {
      if (!fg(y, x)) continue;
      out[y * w + x] = !fg(y - 1, x) || !fg(y + 1, x) || !fg(y, x - 1) || !fg(y, x + 1);
    }
  }
  return out;
}

RgbImage render_overlay(const Tensor& image, const LesionMask& truth, const LesionMask& pred) {
  if (image.rank() != 2) throw ShapeError("overlay base must be [H,W], got " + shape_str(image.shape()));
  const std::size_t h = image.dim(0), w = image.dim(1);
  for (const auto* m : {&truth, &pred}) {
    if (m->height != h || m->width != w) {
      throw ShapeError("overlay mask " + std::to_string(m->height) + "x" + std::to_string(m->width) +
                       " does not match image " + shape_str(image.shape()));
    }
  }
  const auto v = image.data();
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  const double range = *hi - *lo;
  const auto tc = mask_contour(truth);
  const auto pc = mask_contour(pred);

  RgbImage img{h, w, std::vector<std::uint8_t>(3 * h * w)};
  for (std::size_t i = 0; i < h * w; ++i) {
    const double t = range > 0 ? (v[i] - *lo) / range : 0.0;
    const auto g = static_cast<std::uint8_t>(std::clamp(t * 255.0 + 0.5, 0.0, 255.0));
    std::uint8_t* px = img.rgb.data() + 3 * i;
    px[0] = px[1] = px[2] = g;
    if (tc[i] || pc[i]) {
      px[0] = pc[i] ? 255 : 0;
      px[1] = tc[i] ? 255 : 0;
      px[2] = 0;
    }
  }
  return img;
}

void write_png(const std::filesystem::path& path, const RgbImage& img) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto f = open_file(path, "wb");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw InputError("PNG encoding failed for " + path.string());
  }
  png_init_io(png, f.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.width), static_cast<png_uint_32>(img.height), 8,
               PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (std::size_t y = 0; y < img.height; ++y) {
    png_write_row(png, const_cast<png_bytep>(img.rgb.data() + 3 * y * img.width));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

RgbImage read_png(const std::filesystem::path& path) {
  auto f = open_file(path, "rb");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  RgbImage img;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw InputError("cannot decode PNG " + path.string());
  }
  png_init_io(png, f.get());
  png_read_info(png, info);
  png_set_expand(png);
  png_set_strip_16(png);
  png_set_strip_alpha(png);
  png_set_gray_to_rgb(png);
  png_read_update_info(png, info);
  img.width = png_get_image_width(png, info);
  img.height = png_get_image_height(png, info);
  img.rgb.resize(3 * img.width * img.height);
  for (std::size_t y = 0; y < img.height; ++y) png_read_row(png, img.rgb.data() + 3 * y * img.width, nullptr);
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

void emit_overlay(const std::filesystem::path& path, const Tensor& image, const LesionMask& truth,
                  const LesionMask& pred) {
  write_png(path, render_overlay(image, truth, pred));
}

}  // namespace strokeforge
