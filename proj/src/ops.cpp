#include "strokeforge/ops.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>

#include "strokeforge/errors.hpp"

namespace strokeforge {

namespace {

Node* grad_target(Node& self, std::size_t i) {
  Node* in = self.inputs[i].get();
  return (in && in->requires_grad) ? in : nullptr;
}

// Maps each linear index of `out` to the linear index of the broadcast
// operand `in` (right-aligned, singleton axes repeat). Adjacent axes with the
// same broadcast status are merged first so the inner loop is a plain stride.
std::vector<std::size_t> broadcast_index(const Shape& out, const Shape& in) {
  const std::size_t rank = out.size();
  const std::size_t offset = rank - in.size();
  std::vector<std::size_t> extent, step;
  std::size_t stride = 1;
  for (std::size_t d = rank; d-- > 0;) {
    const bool bcast = d < offset || (in[d - offset] == 1 && out[d] != 1);
    if (out[d] == 1) continue;
    const std::size_t st = bcast ? 0 : stride;
    if (!extent.empty() && ((step.back() == 0) == bcast) &&
        (bcast || step.back() * extent.back() == st)) {
      extent.back() *= out[d];
    } else {
      extent.push_back(out[d]);
      step.push_back(st);
    }
    if (!bcast) stride *= out[d];
  }
  // extent/step are innermost-first.
  const std::size_t n = numel_of(out);
  std::vector<std::size_t> map(n);
  if (extent.empty()) return map;
  const std::size_t inner = extent[0], inner_step = step[0];
  std::vector<std::size_t> idx(extent.size(), 0);
  std::size_t cur = 0;
  for (std::size_t i = 0; i < n; i += inner) {
    for (std::size_t k = 0; k < inner; ++k) map[i + k] = cur + k * inner_step;
    for (std::size_t d = 1; d < extent.size(); ++d) {
      ++idx[d];
      cur += step[d];
      if (idx[d] < extent[d]) break;
      cur -= step[d] * extent[d];
      idx[d] = 0;
    }
  }
  return map;
}

template <typename Fwd, typename Bwd>
Tensor binary_op(const Tensor& a, const Tensor& b, const char* name, Fwd fwd, Bwd bwd) {
  const Shape out_shape = broadcast_shape(a.shape(), b.shape());
  const std::size_t n = numel_of(out_shape);
  const bool same_a = a.shape() == out_shape;
  const bool same_b = b.shape() == out_shape;
  auto ia = same_a ? std::vector<std::size_t>{} : broadcast_index(out_shape, a.shape());
  auto ib = same_b ? std::vector<std::size_t>{} : broadcast_index(out_shape, b.shape());
  const auto ad = a.data();
  const auto bd = b.data();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = fwd(ad[same_a ? i : ia[i]], bd[same_b ? i : ib[i]]);
  }
  return make_result(
      out_shape, std::move(out), {a, b},
      [ia = std::move(ia), ib = std::move(ib), same_a, same_b, bwd](Node& self) {
        Node* na = self.inputs[0].get();
        Node* nb = self.inputs[1].get();
        Node* ga = grad_target(self, 0);
        Node* gb = grad_target(self, 1);
        double* pga = ga ? ga->ensure_grad().data() : nullptr;
        double* pgb = gb ? gb->ensure_grad().data() : nullptr;
        const double* av = na->data.data();
        const double* bv = nb->data.data();
        for (std::size_t i = 0; i < self.data.size(); ++i) {
          const std::size_t ja = same_a ? i : ia[i];
          const std::size_t jb = same_b ? i : ib[i];
          double da = 0.0, db = 0.0;
          bwd(av[ja], bv[jb], self.data[i], self.grad[i], da, db);
          if (pga) pga[ja] += da;
          if (pgb) pgb[jb] += db;
        }
      },
      name);
}

template <typename Fwd, typename Bwd>
Tensor unary_op(const Tensor& x, const char* name, Fwd fwd, Bwd bwd) {
  const auto xd = x.data();
  std::vector<double> out(xd.size());
  for (std::size_t i = 0; i < xd.size(); ++i) out[i] = fwd(xd[i]);
  return make_result(
      x.shape(), std::move(out), {x},
      [bwd](Node& self) {
        Node* gx = grad_target(self, 0);
        if (!gx) return;
        auto& g = gx->ensure_grad();
        const auto& xv = gx->data;
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * bwd(xv[i], self.data[i]);
      },
      name);
}

std::size_t normalize_axis(int axis, std::size_t rank) {
  const int r = static_cast<int>(rank);
  const int a = axis < 0 ? axis + r : axis;
  if (a < 0 || a >= r) {
    throw ShapeError("axis " + std::to_string(axis) + " out of range for rank " + std::to_string(rank));
  }
  return static_cast<std::size_t>(a);
}

void require_rank4(const Tensor& x, const char* op) {
  if (x.rank() != 4) {
    throw ShapeError(std::string(op) + " expects [N,C,H,W], got " + shape_str(x.shape()));
  }
}

}  // namespace

Shape broadcast_shape(const Shape& a, const Shape& b) {
  const std::size_t rank = std::max(a.size(), b.size());
  Shape out(rank);
  for (std::size_t i = 0; i < rank; ++i) {
    const std::size_t da = i < rank - a.size() ? 1 : a[i - (rank - a.size())];
    const std::size_t db = i < rank - b.size() ? 1 : b[i - (rank - b.size())];
    if (da != db && da != 1 && db != 1) {
      throw ShapeError("cannot broadcast shapes " + shape_str(a) + " and " + shape_str(b));
    }
    out[i] = std::max(da, db);
  }
  return out;
}

Tensor elementwise(Elementwise op, const Tensor& a, const Tensor& b) {
  const bool binary = op == Elementwise::add || op == Elementwise::sub || op == Elementwise::mul ||
                      op == Elementwise::div;
  if (binary && !b.defined()) throw ShapeError("binary elementwise op requires a second operand");
  switch (op) {
    case Elementwise::add:
      return binary_op(
          a, b, "add", [](double x, double y) { return x + y; },
          [](double, double, double, double g, double& da, double& db) {
            da = g;
            db = g;
          });
    case Elementwise::sub:
      return binary_op(
          a, b, "sub", [](double x, double y) { return x - y; },
          [](double, double, double, double g, double& da, double& db) {
            da = g;
            db = -g;
          });
    case Elementwise::mul:
      return binary_op(
          a, b, "mul", [](double x, double y) { return x * y; },
          [](double x, double y, double, double g, double& da, double& db) {
            da = g * y;
            db = g * x;
          });
    case Elementwise::div: {
      for (double v : b.data()) {
        if (v == 0.0) throw DomainError("division by zero in div");
      }
      return binary_op(
          a, b, "div", [](double x, double y) { return x / y; },
          [](double, double y, double out, double g, double& da, double& db) {
            da = g / y;
            db = -g * out / y;
          });
    }
    case Elementwise::exp:
      return unary_op(
          a, "exp", [](double x) { return std::exp(x); }, [](double, double y) { return y; });
    case Elementwise::log: {
      for (double v : a.data()) {
        if (!(v > 0.0)) throw DomainError("log of non-positive value " + std::to_string(v));
      }
      return unary_op(
          a, "log", [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
    }
    case Elementwise::abs:
      return unary_op(
          a, "abs", [](double x) { return std::abs(x); },
          [](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
    case Elementwise::square:
      return unary_op(
          a, "square", [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
  }
  throw ShapeError("unknown elementwise op");
}

Tensor add(const Tensor& a, const Tensor& b) { return elementwise(Elementwise::add, a, b); }
Tensor sub(const Tensor& a, const Tensor& b) { return elementwise(Elementwise::sub, a, b); }
Tensor mul(const Tensor& a, const Tensor& b) { return elementwise(Elementwise::mul, a, b); }
Tensor div(const Tensor& a, const Tensor& b) { return elementwise(Elementwise::div, a, b); }
Tensor exp(const Tensor& x) { return elementwise(Elementwise::exp, x); }
Tensor log(const Tensor& x) { return elementwise(Elementwise::log, x); }
Tensor abs(const Tensor& x) { return elementwise(Elementwise::abs, x); }
Tensor square(const Tensor& x) { return elementwise(Elementwise::square, x); }

Tensor sqrt(const Tensor& x) {
  for (double v : x.data()) {
    if (v < 0.0) throw DomainError("sqrt of negative value " + std::to_string(v));
  }
  return unary_op(
      x, "sqrt", [](double v) { return std::sqrt(v); }, [](double, double y) { return 0.5 / y; });
}

Tensor neg(const Tensor& x) { return scale(x, -1.0); }

Tensor scale(const Tensor& x, double factor) {
  return unary_op(
      x, "scale", [factor](double v) { return v * factor; }, [factor](double, double) { return factor; });
}

Tensor add_scalar(const Tensor& x, double value) {
  return unary_op(
      x, "add_scalar", [value](double v) { return v + value; }, [](double, double) { return 1.0; });
}

Tensor clamp(const Tensor& x, double lo, double hi) {
  return unary_op(
      x, "clamp", [lo, hi](double v) { return std::clamp(v, lo, hi); },
      [lo, hi](double v, double) { return (v >= lo && v <= hi) ? 1.0 : 0.0; });
}

Tensor activation(Activation kind, const Tensor& x, int axis) {
  switch (kind) {
    case Activation::relu:
      return unary_op(
          x, "relu", [](double v) { return v > 0.0 ? v : 0.0; },
          [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
    case Activation::sigmoid:
      return unary_op(
          x, "sigmoid",
          [](double v) {
            if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
            const double e = std::exp(v);
            return e / (1.0 + e);
          },
          [](double, double y) { return y * (1.0 - y); });
    case Activation::softmax: {
      const std::size_t ax = normalize_axis(axis, x.rank());
      const Shape& s = x.shape();
      std::size_t outer = 1, inner = 1;
      for (std::size_t d = 0; d < ax; ++d) outer *= s[d];
      for (std::size_t d = ax + 1; d < s.size(); ++d) inner *= s[d];
      const std::size_t len = s[ax];
      const auto xd = x.data();
      std::vector<double> out(xd.size());
      for (std::size_t o = 0; o < outer; ++o) {
        for (std::size_t in = 0; in < inner; ++in) {
          const std::size_t base = o * len * inner + in;
          double mx = -std::numeric_limits<double>::infinity();
          for (std::size_t k = 0; k < len; ++k) mx = std::max(mx, xd[base + k * inner]);
          double z = 0.0;
          for (std::size_t k = 0; k < len; ++k) {
            out[base + k * inner] = std::exp(xd[base + k * inner] - mx);
            z += out[base + k * inner];
          }
          for (std::size_t k = 0; k < len; ++k) out[base + k * inner] /= z;
        }
      }
      return make_result(
          s, std::move(out), {x},
          [outer, inner, len](Node& self) {
            Node* gx = grad_target(self, 0);
            if (!gx) return;
            auto& g = gx->ensure_grad();
            for (std::size_t o = 0; o < outer; ++o) {
              for (std::size_t in = 0; in < inner; ++in) {
                const std::size_t base = o * len * inner + in;
                double dot = 0.0;
                for (std::size_t k = 0; k < len; ++k) {
                  dot += self.grad[base + k * inner] * self.data[base + k * inner];
                }
                for (std::size_t k = 0; k < len; ++k) {
                  const std::size_t j = base + k * inner;
                  g[j] += self.data[j] * (self.grad[j] - dot);
                }
              }
            }
          },
          "softmax");
    }
  }
  throw ShapeError("unknown activation");
}

Tensor relu(const Tensor& x) { return activation(Activation::relu, x); }
Tensor sigmoid(const Tensor& x) { return activation(Activation::sigmoid, x); }
Tensor softmax(const Tensor& x, int axis) { return activation(Activation::softmax, x, axis); }

Tensor pool_and_resize(PoolResize kind, const Tensor& x, const Tensor& y) {
  switch (kind) {
    case PoolResize::maxpool2: return maxpool2(x);
    case PoolResize::avgpool_global: return avgpool_global(x);
    case PoolResize::upsample_nearest2: return upsample_nearest2(x);
    case PoolResize::concat_channels:
      if (!y.defined()) throw ShapeError("concat_channels requires a second operand");
      return concat_channels(x, y);
  }
  throw ShapeError("unknown pool/resize kind");
}

Tensor maxpool2(const Tensor& x) {
  require_rank4(x, "maxpool2");
  const auto [n, c, h, w] = std::array{x.dim(0), x.dim(1), x.dim(2), x.dim(3)};
  if (h % 2 || w % 2) {
    throw GeometryError("maxpool2 needs even spatial extents, got " + shape_str(x.shape()));
  }
  const std::size_t ho = h / 2, wo = w / 2;
  const auto xd = x.data();
  std::vector<double> out(n * c * ho * wo);
  std::vector<std::size_t> arg(out.size());
  for (std::size_t p = 0; p < n * c; ++p) {
    const std::size_t in_base = p * h * w;
    for (std::size_t i = 0; i < ho; ++i) {
      for (std::size_t j = 0; j < wo; ++j) {
        std::size_t best = in_base + 2 * i * w + 2 * j;
        for (std::size_t a = 0; a < 2; ++a) {
          for (std::size_t b = 0; b < 2; ++b) {
            const std::size_t k = in_base + (2 * i + a) * w + 2 * j + b;
            if (xd[k] > xd[best]) best = k;
          }
        }
        const std::size_t o = p * ho * wo + i * wo + j;
        out[o] = xd[best];
        arg[o] = best;
      }
    }
  }
  return make_result(
      {n, c, ho, wo}, std::move(out), {x},
      [arg = std::move(arg)](Node& self) {
        Node* gx = grad_target(self, 0);
        if (!gx) return;
        auto& g = gx->ensure_grad();
        for (std::size_t o = 0; o < arg.size(); ++o) g[arg[o]] += self.grad[o];
      },
      "maxpool2");
}

Tensor avgpool_global(const Tensor& x) {
  require_rank4(x, "avgpool_global");
  return mean(x, {2, 3}, true);
}

Tensor upsample_nearest2(const Tensor& x) {
  require_rank4(x, "upsample_nearest2");
  const auto [n, c, h, w] = std::array{x.dim(0), x.dim(1), x.dim(2), x.dim(3)};
  const std::size_t ho = 2 * h, wo = 2 * w;
  const auto xd = x.data();
  std::vector<double> out(n * c * ho * wo);
  for (std::size_t p = 0; p < n * c; ++p) {
    for (std::size_t i = 0; i < ho; ++i) {
      for (std::size_t j = 0; j < wo; ++j) {
        out[p * ho * wo + i * wo + j] = xd[p * h * w + (i / 2) * w + j / 2];
      }
    }
  }
  return make_result(
      {n, c, ho, wo}, std::move(out), {x},
      [n, c, h, w](Node& self) {
        Node* gx = grad_target(self, 0);
        if (!gx) return;
        auto& g = gx->ensure_grad();
        const std::size_t ho = 2 * h, wo = 2 * w;
        for (std::size_t p = 0; p < n * c; ++p) {
          for (std::size_t i = 0; i < ho; ++i) {
            for (std::size_t j = 0; j < wo; ++j) {
              g[p * h * w + (i / 2) * w + j / 2] += self.grad[p * ho * wo + i * wo + j];
            }
          }
        }
      },
      "upsample_nearest2");
}

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat of zero tensors");
  const Shape& first = parts.front().shape();
  if (axis >= first.size()) throw ShapeError("concat axis out of range for " + shape_str(first));
  Shape out_shape = first;
  out_shape[axis] = 0;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    bool ok = s.size() == first.size();
    for (std::size_t d = 0; ok && d < s.size(); ++d) ok = d == axis || s[d] == first[d];
    if (!ok) {
      throw ShapeError("concat shape mismatch: " + shape_str(first) + " vs " + shape_str(s) +
                       " along axis " + std::to_string(axis));
    }
    out_shape[axis] += s[axis];
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t d = 0; d < axis; ++d) outer *= first[d];
  for (std::size_t d = axis + 1; d < first.size(); ++d) inner *= first[d];
  const std::size_t out_len = out_shape[axis];
  std::vector<double> out(numel_of(out_shape));
  std::vector<std::size_t> offsets;
  std::size_t off = 0;
  for (const auto& p : parts) {
    offsets.push_back(off);
    const std::size_t len = p.shape()[axis];
    const auto pd = p.data();
    for (std::size_t o = 0; o < outer; ++o) {
      std::copy_n(pd.begin() + o * len * inner, len * inner, out.begin() + (o * out_len + off) * inner);
    }
    off += len;
  }
  return make_result(
      out_shape, std::move(out), parts,
      [offsets, outer, inner, out_len](Node& self) {
        for (std::size_t k = 0; k < self.inputs.size(); ++k) {
          Node* gp = grad_target(self, k);
          if (!gp) continue;
          auto& g = gp->ensure_grad();
          const std::size_t len = g.size() / (outer * inner);
          for (std::size_t o = 0; o < outer; ++o) {
            const double* src = self.grad.data() + (o * out_len + offsets[k]) * inner;
            double* dst = g.data() + o * len * inner;
            for (std::size_t i = 0; i < len * inner; ++i) dst[i] += src[i];
          }
        }
      },
      "concat");
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
  require_rank4(a, "concat_channels");
  require_rank4(b, "concat_channels");
  return concat({a, b}, 1);
}

Tensor reduce(Reduction kind, const Tensor& x, const std::vector<std::size_t>& axes, bool keepdim) {
  const Shape& s = x.shape();
  Shape kept = s;
  if (axes.empty()) {
    std::fill(kept.begin(), kept.end(), 1);
  } else {
    for (auto a : axes) {
      if (a >= s.size()) throw ShapeError("reduction axis out of range for " + shape_str(s));
      kept[a] = 1;
    }
  }
  const std::size_t out_n = numel_of(kept);
  const double factor = kind == Reduction::mean ? static_cast<double>(out_n) / x.numel() : 1.0;
  auto map = broadcast_index(s, kept);
  std::vector<double> out(out_n, 0.0);
  const auto xd = x.data();
  for (std::size_t i = 0; i < xd.size(); ++i) out[map[i]] += xd[i];
  if (factor != 1.0) {
    for (auto& v : out) v *= factor;
  }
  Shape out_shape;
  if (axes.empty() && !keepdim) {
    out_shape = {1};
  } else if (keepdim) {
    out_shape = kept;
  } else {
    for (std::size_t d = 0; d < s.size(); ++d) {
      if (std::find(axes.begin(), axes.end(), d) == axes.end()) out_shape.push_back(s[d]);
    }
    if (out_shape.empty()) out_shape = {1};
  }
  return make_result(
      out_shape, std::move(out), {x},
      [map = std::move(map), factor](Node& self) {
        Node* gx = grad_target(self, 0);
        if (!gx) return;
        auto& g = gx->ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += factor * self.grad[map[i]];
      },
      kind == Reduction::sum ? "sum" : "mean");
}

Tensor sum(const Tensor& x) { return reduce(Reduction::sum, x); }
Tensor mean(const Tensor& x) { return reduce(Reduction::mean, x); }
Tensor sum(const Tensor& x, const std::vector<std::size_t>& axes, bool keepdim) {
  return reduce(Reduction::sum, x, axes, keepdim);
}
Tensor mean(const Tensor& x, const std::vector<std::size_t>& axes, bool keepdim) {
  return reduce(Reduction::mean, x, axes, keepdim);
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (numel_of(shape) != x.numel()) {
    throw ShapeError("cannot reshape " + shape_str(x.shape()) + " to " + shape_str(shape));
  }
  std::vector<double> out(x.data().begin(), x.data().end());
  return make_result(
      std::move(shape), std::move(out), {x},
      [](Node& self) {
        Node* gx = grad_target(self, 0);
        if (!gx) return;
        auto& g = gx->ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
      },
      "reshape");
}

Tensor narrow(const Tensor& x, std::size_t axis, std::size_t start, std::size_t length) {
  const Shape& s = x.shape();
  if (axis >= s.size() || length == 0 || start + length > s[axis]) {
    throw ShapeError("narrow(" + std::to_string(axis) + ", " + std::to_string(start) + ", " +
                     std::to_string(length) + ") out of range for " + shape_str(s));
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t d = 0; d < axis; ++d) outer *= s[d];
  for (std::size_t d = axis + 1; d < s.size(); ++d) inner *= s[d];
  const std::size_t len = s[axis];
  Shape out_shape = s;
  out_shape[axis] = length;
  std::vector<double> out(outer * length * inner);
  const auto xd = x.data();
  for (std::size_t o = 0; o < outer; ++o) {
    std::copy_n(xd.begin() + (o * len + start) * inner, length * inner, out.begin() + o * length * inner);
  }
  return make_result(
      out_shape, std::move(out), {x},
      [outer, inner, len, start, length](Node& self) {
        Node* gx = grad_target(self, 0);
        if (!gx) return;
        auto& g = gx->ensure_grad();
        for (std::size_t o = 0; o < outer; ++o) {
          for (std::size_t i = 0; i < length * inner; ++i) {
            g[(o * len + start) * inner + i] += self.grad[o * length * inner + i];
          }
        }
      },
      "narrow");
}

}  // namespace strokeforge
