#include "strokeforge/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "strokeforge/errors.hpp"

namespace strokeforge {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Lower envelope of parabolas (q - v)^2 + f(v) over finite sites.
void distance_1d(const double* f, std::size_t n, std::size_t stride, double* out,
                 std::vector<std::size_t>& v, std::vector<double>& z) {
  long k = -1;
  for (std::size_t q = 0; q < n; ++q) {
    const double fq = f[q * stride];
    if (std::isinf(fq)) continue;
    if (k < 0) {
      k = 0;
      v[0] = q;
      z[0] = -kInf;
      z[1] = kInf;
      continue;
    }
    const double qd = static_cast<double>(q);
    double s;
    for (;;) {
      const double vk = static_cast<double>(v[static_cast<std::size_t>(k)]);
      s = ((fq + qd * qd) - (f[v[static_cast<std::size_t>(k)] * stride] + vk * vk)) / (2.0 * qd - 2.0 * vk);
      if (s <= z[static_cast<std::size_t>(k)]) {
        --k;
      } else {
        break;
      }
    }
    ++k;
    v[static_cast<std::size_t>(k)] = q;
    z[static_cast<std::size_t>(k)] = s;
    z[static_cast<std::size_t>(k) + 1] = kInf;
  }
  if (k < 0) {
    for (std::size_t q = 0; q < n; ++q) out[q * stride] = kInf;
    return;
  }
  std::size_t j = 0;
  for (std::size_t q = 0; q < n; ++q) {
    while (z[j + 1] < static_cast<double>(q)) ++j;
    const double d = static_cast<double>(q) - static_cast<double>(v[j]);
    out[q * stride] = d * d + f[v[j] * stride];
  }
}

}  // namespace

Tensor Field2D::to_tensor() const { return Tensor::from_data({height, width}, values); }

LesionMask::LesionMask(std::size_t h, std::size_t w, std::vector<std::uint8_t> v)
    : height(h), width(w), values(std::move(v)) {
  if (values.size() != h * w) throw ShapeError("mask values do not match its extent");
  for (auto x : values) {
    if (x > 1) throw InputError("mask values must be 0 or 1");
  }
}

LesionMask LesionMask::from_tensor(const Tensor& t) {
  if (t.rank() != 2) throw ShapeError("mask tensor must be [H,W], got " + shape_str(t.shape()));
  std::vector<std::uint8_t> v(t.numel());
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double x = t[i];
    if (x != 0.0 && x != 1.0) throw InputError("mask value " + std::to_string(x) + " is not binary");
    v[i] = x == 1.0 ? 1 : 0;
  }
  return LesionMask(t.dim(0), t.dim(1), std::move(v));
}

LesionMask LesionMask::threshold(std::span<const double> values, std::size_t h, std::size_t w, double threshold) {
  std::vector<std::uint8_t> v(values.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = values[i] > threshold ? 1 : 0;
  return LesionMask(h, w, std::move(v));
}

Tensor LesionMask::to_tensor() const {
  return Tensor::from_data({height, width}, std::vector<double>(values.begin(), values.end()));
}

std::size_t LesionMask::count() const {
  return static_cast<std::size_t>(std::count(values.begin(), values.end(), std::uint8_t{1}));
}

std::vector<double> squared_distance_to_sites(const std::vector<std::uint8_t>& sites, std::size_t h,
                                              std::size_t w) {
  std::vector<double> f(h * w), tmp(h * w);
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = sites[i] ? 0.0 : kInf;
  const std::size_t n = std::max(h, w);
  std::vector<std::size_t> v(n);
  std::vector<double> z(n + 1);
  for (std::size_t c = 0; c < w; ++c) distance_1d(f.data() + c, h, w, tmp.data() + c, v, z);
  for (std::size_t r = 0; r < h; ++r) distance_1d(tmp.data() + r * w, w, 1, f.data() + r * w, v, z);
  return f;
}

Field2D signed_distance(const LesionMask& mask) {
  std::vector<std::uint8_t> background(mask.values.size());
  for (std::size_t i = 0; i < background.size(); ++i) background[i] = mask.values[i] ? 0 : 1;
  const auto to_fg = squared_distance_to_sites(mask.values, mask.height, mask.width);
  const auto to_bg = squared_distance_to_sites(background, mask.height, mask.width);
  Field2D out{mask.height, mask.width, std::vector<double>(mask.values.size())};
  for (std::size_t i = 0; i < out.values.size(); ++i) {
    out.values[i] = mask.values[i] ? -std::sqrt(to_bg[i]) : std::sqrt(to_fg[i]);
  }
  return out;
}

Field2D heatmap_from_sdf(const Field2D& sdf, const HeatmapParams& params) {
  if (!(params.w0 > 0.0) || !(params.sigma > 0.0)) {
    throw ConfigError("heatmap needs w0 > 0 and sigma > 0");
  }
  Field2D out{sdf.height, sdf.width, std::vector<double>(sdf.values.size(), 1.0)};
  const bool degenerate = std::any_of(sdf.values.begin(), sdf.values.end(), [](double d) { return std::isinf(d); });
  if (degenerate) return out;
  const double denom = 2.0 * params.sigma * params.sigma;
  for (std::size_t i = 0; i < out.values.size(); ++i) {
    const double d = sdf.values[i];
    if (params.mode == HeatmapMode::inside && d < 0.0) {
      out.values[i] = 1.0 + params.w0;
    } else {
      out.values[i] = 1.0 + params.w0 * std::exp(-d * d / denom);
    }
  }
  return out;
}

Field2D heatmap_from_mask(const LesionMask& mask, const HeatmapParams& params) {
  return heatmap_from_sdf(signed_distance(mask), params);
}

}  // namespace strokeforge
