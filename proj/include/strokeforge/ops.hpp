#pragma once

// Differentiable tensor operations. All take and return Tensor by value
// (handles are cheap); gradient rules are registered on the result.
//
// Binary elementwise ops broadcast numpy-style: shapes are right-aligned and
// each axis must match or be 1 on one side.

#include <cstddef>
#include <vector>

#include "strokeforge/tensor.hpp"

namespace strokeforge {

enum class Elementwise { add, sub, mul, div, exp, log, abs, square };
enum class Activation { relu, sigmoid, softmax };
enum class PoolResize { maxpool2, avgpool_global, upsample_nearest2, concat_channels };
enum class Reduction { sum, mean };

Shape broadcast_shape(const Shape& a, const Shape& b);

/// Unary kinds ignore `b`; binary kinds require it.
Tensor elementwise(Elementwise op, const Tensor& a, const Tensor& b = {});

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor exp(const Tensor& x);
Tensor log(const Tensor& x);
Tensor abs(const Tensor& x);
Tensor square(const Tensor& x);
Tensor sqrt(const Tensor& x);
Tensor neg(const Tensor& x);
Tensor scale(const Tensor& x, double factor);
Tensor add_scalar(const Tensor& x, double value);
/// Values outside [lo, hi] are clipped and receive zero gradient.
Tensor clamp(const Tensor& x, double lo, double hi);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator/(const Tensor& a, const Tensor& b) { return div(a, b); }
inline Tensor operator*(const Tensor& a, double s) { return scale(a, s); }
inline Tensor operator*(double s, const Tensor& a) { return scale(a, s); }

/// `axis` is used only by softmax; negative values count from the back.
Tensor activation(Activation kind, const Tensor& x, int axis = 1);
Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor softmax(const Tensor& x, int axis);

/// x [N,C,H,W], kernel [K,C,kh,kw], bias [K] or undefined.
/// Output extent (H + 2*padding - kh)/stride + 1 must be exact.
Tensor conv2d(const Tensor& x, const Tensor& kernel, const Tensor& bias, std::size_t stride = 1,
              std::size_t padding = 0);

Tensor pool_and_resize(PoolResize kind, const Tensor& x, const Tensor& y = {});
Tensor maxpool2(const Tensor& x);
Tensor avgpool_global(const Tensor& x);
Tensor upsample_nearest2(const Tensor& x);
Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);
Tensor concat_channels(const Tensor& a, const Tensor& b);

/// Empty `axes` reduces everything to shape [1].
Tensor reduce(Reduction kind, const Tensor& x, const std::vector<std::size_t>& axes = {},
              bool keepdim = false);
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
Tensor sum(const Tensor& x, const std::vector<std::size_t>& axes, bool keepdim);
Tensor mean(const Tensor& x, const std::vector<std::size_t>& axes, bool keepdim);

Tensor reshape(const Tensor& x, Shape shape);
/// Slice [start, start+length) along `axis`.
Tensor narrow(const Tensor& x, std::size_t axis, std::size_t start, std::size_t length);

}  // namespace strokeforge
