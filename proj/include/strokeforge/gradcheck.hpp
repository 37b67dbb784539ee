#pragma once

#include <functional>
#include <stdexcept>
#include <vector>

#include "strokeforge/tensor.hpp"

namespace strokeforge {

class GradcheckError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Compares reverse-mode gradients of a scalar function against central
/// differences. Returns max over elements of
/// |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
/// `loss` must be deterministic; it is re-run with each element of `wrt`
/// perturbed in place. Throws GradcheckError on NaN, invalid_argument when
/// eps lies outside [1e-6, 1e-3].
double gradcheck(const std::function<Tensor()>& loss, std::vector<Tensor> wrt, double eps = 1e-4);

/// Same measure, but each element is scored at the best-agreeing step of
/// `steps`, tried in order until one is within `tolerance`. A step that
/// straddles a relu or maxpool kink, or one so small that round-off swamps a
/// tiny component, is thereby not mistaken for a wrong gradient.
double gradcheck(const std::function<Tensor()>& loss, std::vector<Tensor> wrt, const std::vector<double>& steps,
                 double tolerance);

/// Single-input convenience form.
double gradcheck(const std::function<Tensor(const Tensor&)>& f, const Tensor& x, double eps = 1e-4);

}  // namespace strokeforge
