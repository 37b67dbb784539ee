#include <gtest/gtest.h>

#include <set>

#include "strokeforge/gradsuite.hpp"

using namespace strokeforge;

TEST(GradientSuite, EveryOperationPasses) {
  const auto results = run_gradient_suite(3);
  std::set<std::string> names;
  for (const auto& r : results) {
    names.insert(r.name);
    EXPECT_TRUE(r.passed) << r.name << " max rel error " << r.max_rel_error;
  }
  for (const char* required : {"conv2d", "maxpool2", "avgpool_global", "relu", "sigmoid", "softmax", "se_block",
                                "switch_norm", "generalized_dice", "weighted_ce", "pr_loss", "extractor_loss",
                                "generator_loss", "pipeline_full"}) {
    EXPECT_TRUE(names.count(required)) << required;
  }
}
