#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace strokeforge {

struct GradcheckResult {
  std::string name;
  double max_rel_error;
  bool passed;
};

constexpr double kGradcheckTolerance = 1e-4;

/// Central-difference checks of every differentiable building block and of
/// the full three-network loss, on random instances no larger than 2x2x8x8.
std::vector<GradcheckResult> run_gradient_suite(std::uint64_t seed = 1);

}  // namespace strokeforge
