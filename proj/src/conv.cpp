#include <Eigen/Core>
#include <algorithm>
#include <array>
#include <utility>
#include <string>

#include "strokeforge/errors.hpp"
#include "strokeforge/ops.hpp"

namespace strokeforge {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

struct ConvGeometry {
  std::size_t c, h, w, k, kh, kw, stride, pad, ho, wo;
  std::size_t patch() const { return c * kh * kw; }
  std::size_t pixels() const { return ho * wo; }
};

// Valid output columns [lo, hi) for kernel column offset b, i.e. those whose
// input column j*stride + b - pad lands inside [0, w).
std::pair<std::size_t, std::size_t> valid_cols(const ConvGeometry& g, std::size_t b) {
  std::size_t lo = 0;
  while (lo < g.wo && lo * g.stride + b < g.pad) ++lo;
  std::size_t hi = g.wo;
  while (hi > lo && (hi - 1) * g.stride + b >= g.pad + g.w) --hi;
  return {lo, hi};
}

// col is [c*kh*kw, ho*wo], row-major.
void im2col(const double* img, const ConvGeometry& g, double* col) {
  for (std::size_t ci = 0; ci < g.c; ++ci) {
    for (std::size_t a = 0; a < g.kh; ++a) {
      for (std::size_t b = 0; b < g.kw; ++b) {
        double* row = col + ((ci * g.kh + a) * g.kw + b) * g.pixels();
        const auto [lo, hi] = valid_cols(g, b);
        for (std::size_t i = 0; i < g.ho; ++i) {
          const long y = static_cast<long>(i * g.stride + a) - static_cast<long>(g.pad);
          double* dst = row + i * g.wo;
          if (y < 0 || y >= static_cast<long>(g.h)) {
            std::fill_n(dst, g.wo, 0.0);
            continue;
          }
          const double* src = img + (ci * g.h + static_cast<std::size_t>(y)) * g.w;
          std::fill_n(dst, lo, 0.0);
          if (g.stride == 1) {
            std::copy_n(src + lo + b - g.pad, hi - lo, dst + lo);
          } else {
            for (std::size_t j = lo; j < hi; ++j) dst[j] = src[j * g.stride + b - g.pad];
          }
          std::fill(dst + hi, dst + g.wo, 0.0);
        }
      }
    }
  }
}

void col2im_add(const double* col, const ConvGeometry& g, double* img) {
  for (std::size_t ci = 0; ci < g.c; ++ci) {
    for (std::size_t a = 0; a < g.kh; ++a) {
      for (std::size_t b = 0; b < g.kw; ++b) {
        const double* row = col + ((ci * g.kh + a) * g.kw + b) * g.pixels();
        const auto [lo, hi] = valid_cols(g, b);
        for (std::size_t i = 0; i < g.ho; ++i) {
          const long y = static_cast<long>(i * g.stride + a) - static_cast<long>(g.pad);
          if (y < 0 || y >= static_cast<long>(g.h)) continue;
          double* dst = img + (ci * g.h + static_cast<std::size_t>(y)) * g.w;
          const double* src = row + i * g.wo;
          for (std::size_t j = lo; j < hi; ++j) dst[j * g.stride + b - g.pad] += src[j];
        }
      }
    }
  }
}

std::size_t out_extent(std::size_t in, std::size_t kernel, std::size_t stride, std::size_t pad,
                       const Shape& xs, const Shape& ks) {
  const long span = static_cast<long>(in + 2 * pad) - static_cast<long>(kernel);
  if (span < 0 || span % static_cast<long>(stride) != 0) {
    throw GeometryError("conv2d geometry does not tile: input " + shape_str(xs) + ", kernel " +
                        shape_str(ks) + ", stride " + std::to_string(stride) + ", padding " +
                        std::to_string(pad));
  }
  return static_cast<std::size_t>(span) / stride + 1;
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& kernel, const Tensor& bias, std::size_t stride,
              std::size_t padding) {
  if (x.rank() != 4 || kernel.rank() != 4) {
    throw ShapeError("conv2d expects x [N,C,H,W] and kernel [K,C,kh,kw], got " + shape_str(x.shape()) +
                     " and " + shape_str(kernel.shape()));
  }
  if (x.dim(1) != kernel.dim(1)) {
    throw ShapeError("conv2d channel mismatch: input " + shape_str(x.shape()) + ", kernel " +
                     shape_str(kernel.shape()));
  }
  if (kernel.dim(2) % 2 == 0 || kernel.dim(3) % 2 == 0) {
    throw GeometryError("conv2d kernel extents must be odd, got " + shape_str(kernel.shape()));
  }
  if (stride == 0) throw GeometryError("conv2d stride must be positive");
  if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != kernel.dim(0))) {
    throw ShapeError("conv2d bias " + shape_str(bias.shape()) + " does not match kernel " +
                     shape_str(kernel.shape()));
  }

  ConvGeometry g{x.dim(1), x.dim(2), x.dim(3), kernel.dim(0), kernel.dim(2), kernel.dim(3), stride, padding,
                 0,        0};
  g.ho = out_extent(g.h, g.kh, stride, padding, x.shape(), kernel.shape());
  g.wo = out_extent(g.w, g.kw, stride, padding, x.shape(), kernel.shape());
  const std::size_t n = x.dim(0);

  std::vector<double> out(n * g.k * g.pixels());
  std::vector<double> col(g.patch() * g.pixels());
  ConstMap kmat(kernel.data().data(), g.k, g.patch());
  const double* xd = x.data().data();
  for (std::size_t s = 0; s < n; ++s) {
    im2col(xd + s * g.c * g.h * g.w, g, col.data());
    MutMap o(out.data() + s * g.k * g.pixels(), g.k, g.pixels());
    o.noalias() = kmat * ConstMap(col.data(), g.patch(), g.pixels());
    if (bias.defined()) {
      for (std::size_t k = 0; k < g.k; ++k) o.row(k).array() += bias[k];
    }
  }

  return make_result(
      {n, g.k, g.ho, g.wo}, std::move(out), {x, kernel, bias},
      [g, n](Node& self) {
        Node* nx = self.inputs[0].get();
        Node* nk = self.inputs[1].get();
        Node* nb = self.inputs[2].get();
        const bool want_x = nx->requires_grad;
        const bool want_k = nk->requires_grad;
        const bool want_b = nb && nb->requires_grad;
        std::vector<double> col(g.patch() * g.pixels());
        std::vector<double> dcol(want_x ? col.size() : 0);
        ConstMap kmat(nk->data.data(), g.k, g.patch());
        for (std::size_t s = 0; s < n; ++s) {
          ConstMap dout(self.grad.data() + s * g.k * g.pixels(), g.k, g.pixels());
          if (want_k) {
            im2col(nx->data.data() + s * g.c * g.h * g.w, g, col.data());
            MutMap dk(nk->ensure_grad().data(), g.k, g.patch());
            dk.noalias() += dout * ConstMap(col.data(), g.patch(), g.pixels()).transpose();
          }
          if (want_b) {
            auto& gb = nb->ensure_grad();
            for (std::size_t k = 0; k < g.k; ++k) gb[k] += dout.row(k).sum();
          }
          if (want_x) {
            MutMap dc(dcol.data(), g.patch(), g.pixels());
            dc.noalias() = kmat.transpose() * dout;
            col2im_add(dcol.data(), g, nx->ensure_grad().data() + s * g.c * g.h * g.w);
          }
        }
      },
      "conv2d");
}

}  // namespace strokeforge
