#include "strokeforge/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace strokeforge {

double gradcheck(const std::function<Tensor()>& loss, std::vector<Tensor> wrt, const std::vector<double>& steps,
                 double tolerance) {
  if (steps.empty()) throw std::invalid_argument("gradcheck needs at least one step");
  for (double eps : steps) {
    if (!(eps >= 1e-6 && eps <= 1e-3)) throw std::invalid_argument("gradcheck eps must lie in [1e-6, 1e-3]");
  }
  for (auto& t : wrt) {
    t.set_requires_grad(true);
    t.zero_grad();
  }
  loss().backward();
  std::vector<std::vector<double>> analytic;
  analytic.reserve(wrt.size());
  for (auto& t : wrt) analytic.push_back(t.grad());

  double worst = 0.0;
  NoGradGuard no_grad;
  for (std::size_t k = 0; k < wrt.size(); ++k) {
    auto values = wrt[k].mutable_data();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      const double a = analytic[k][i];
      double best = std::numeric_limits<double>::infinity();
      for (double eps : steps) {
        values[i] = saved + eps;
        const double up = loss().item();
        values[i] = saved - eps;
        const double down = loss().item();
        values[i] = saved;
        const double numeric = (up - down) / (2.0 * eps);
        if (std::isnan(numeric) || std::isnan(a)) {
          throw GradcheckError("NaN gradient at input " + std::to_string(k) + " element " + std::to_string(i));
        }
        const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
        best = std::min(best, std::abs(a - numeric) / denom);
        if (best < tolerance) break;
      }
      worst = std::max(worst, best);
    }
  }
  return worst;
}

double gradcheck(const std::function<Tensor()>& loss, std::vector<Tensor> wrt, double eps) {
  return gradcheck(loss, std::move(wrt), std::vector<double>{eps}, 0.0);
}

double gradcheck(const std::function<Tensor(const Tensor&)>& f, const Tensor& x, double eps) {
  return gradcheck([&] { return f(x); }, {x}, eps);
}

}  // namespace strokeforge
