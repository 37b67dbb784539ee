#pragma once

// Direct-summation reference implementations, written without the tensor
// library so they can check it.

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

namespace oracle {

struct Batch {
  std::size_t n, l, h, w;
  std::vector<double> v;  // [n,l,h,w] row-major
  double at(std::size_t s, std::size_t c, std::size_t y, std::size_t x) const {
    return v[((s * l + c) * h + y) * w + x];
  }
};

inline double extractor(const std::vector<double>& p, const std::vector<double>& y, double alpha) {
  double s = 0;
  for (std::size_t i = 0; i < p.size(); ++i) s += std::abs(p[i] - y[i]);
  return alpha * s / static_cast<double>(p.size());
}

/// Image term of the generator loss; `root` takes the square root of the mean.
inline double generator_image(const std::vector<double>& g, const std::vector<double>& o,
                              const std::vector<double>& w, bool root = false) {
  double s = 0;
  for (std::size_t i = 0; i < g.size(); ++i) s += w[i] * (g[i] - o[i]) * (g[i] - o[i]);
  s /= static_cast<double>(g.size());
  return root ? std::sqrt(s + 1e-12) : s;
}

/// Mean squared difference across the concatenation of all feature maps.
inline double feature_distance(const std::vector<std::vector<double>>& fg,
                               const std::vector<std::vector<double>>& fo) {
  double s = 0;
  std::size_t count = 0;
  for (std::size_t k = 0; k < fg.size(); ++k) {
    for (std::size_t i = 0; i < fg[k].size(); ++i) s += (fg[k][i] - fo[k][i]) * (fg[k][i] - fo[k][i]);
    count += fg[k].size();
  }
  return s / static_cast<double>(count);
}

inline double generalized_dice(const Batch& p, const Batch& y, double eps) {
  double num = 0, den = 0;
  for (std::size_t c = 0; c < p.l; ++c) {
    double vol = 0, inter = 0, tot = 0;
    for (std::size_t s = 0; s < p.n; ++s)
      for (std::size_t r = 0; r < p.h; ++r)
        for (std::size_t x = 0; x < p.w; ++x) {
          vol += y.at(s, c, r, x);
          inter += p.at(s, c, r, x) * y.at(s, c, r, x);
          tot += p.at(s, c, r, x) + y.at(s, c, r, x);
        }
    const double wl = 1.0 / ((vol + eps) * (vol + eps));
    num += wl * inter;
    den += wl * tot;
  }
  return 2.0 * num / (den + eps);
}

/// weights: [n,1,h,w].
inline double weighted_ce(const Batch& p, const Batch& y, const std::vector<double>& weights) {
  double s = 0;
  for (std::size_t b = 0; b < p.n; ++b)
    for (std::size_t r = 0; r < p.h; ++r)
      for (std::size_t x = 0; x < p.w; ++x) {
        double ce = 0;
        for (std::size_t c = 0; c < p.l; ++c) ce -= y.at(b, c, r, x) * std::log(std::clamp(p.at(b, c, r, x), 1e-12, 1.0));
        s += weights[(b * p.h + r) * p.w + x] * ce;
      }
  return s / static_cast<double>(p.n * p.h * p.w);
}

inline double pr_loss(const Batch& p, const Batch& y, const std::vector<double>& weights, double delta, double eps) {
  return delta * (weighted_ce(p, y, weights) - std::log(generalized_dice(p, y, eps)));
}

/// Random two-class instance: softmax-consistent p, one-hot y, weights in [1, 5].
struct Instance {
  Batch p, y;
  std::vector<double> weights;
};

inline Instance random_instance(std::mt19937_64& rng, std::size_t n, std::size_t h, std::size_t w) {
  std::uniform_real_distribution<double> u(0.02, 0.98);
  std::bernoulli_distribution fg(0.3);
  std::uniform_real_distribution<double> wt(1.0, 5.0);
  Instance out{{n, 2, h, w, std::vector<double>(n * 2 * h * w)},
               {n, 2, h, w, std::vector<double>(n * 2 * h * w)},
               std::vector<double>(n * h * w)};
  const std::size_t plane = h * w;
  for (std::size_t s = 0; s < n; ++s)
    for (std::size_t i = 0; i < plane; ++i) {
      const double q = u(rng);
      const bool f = fg(rng);
      out.p.v[(s * 2) * plane + i] = 1.0 - q;
      out.p.v[(s * 2 + 1) * plane + i] = q;
      out.y.v[(s * 2) * plane + i] = f ? 0.0 : 1.0;
      out.y.v[(s * 2 + 1) * plane + i] = f ? 1.0 : 0.0;
      out.weights[s * plane + i] = wt(rng);
    }
  return out;
}

/// Euclidean signed distance by exhaustive search; +-inf when one class is absent.
inline std::vector<double> signed_distance(const std::vector<std::uint8_t>& m, long h, long w) {
  std::vector<double> out(m.size());
  for (long y = 0; y < h; ++y)
    for (long x = 0; x < w; ++x) {
      const auto own = m[y * w + x];
      long best = -1;
      for (long v = 0; v < h; ++v)
        for (long u = 0; u < w; ++u)
          if (m[v * w + u] != own) {
            const long d = (y - v) * (y - v) + (x - u) * (x - u);
            if (best < 0 || d < best) best = d;
          }
      const double d = best < 0 ? INFINITY : std::sqrt(static_cast<double>(best));
      out[y * w + x] = own ? -d : d;
    }
  return out;
}

}  // namespace oracle
