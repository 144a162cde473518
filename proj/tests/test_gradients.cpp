#include <gtest/gtest.h>

#include "gradient_cases.hpp"

namespace {

void expect_all(const std::vector<gradcases::Case>& cases) {
  ASSERT_FALSE(cases.empty());
  for (const auto& c : cases) EXPECT_LT(c.error, c.tolerance) << c.name;
}

}  // namespace

TEST(GradientOps, EveryOpTenSeeds) { expect_all(gradcases::op_cases(10)); }

TEST(GradientLosses, ProbabilityInputs) { expect_all(gradcases::loss_input_cases(3)); }

TEST(GradientLosses, NetWeights) { expect_all(gradcases::loss_weight_cases(3)); }
