// Copyright (c) 2026, The CaseLink Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "caselink/caselink.hpp"

namespace caselink {
namespace {

class GradCheck : public ::testing::TestWithParam<std::string> {};

TEST_P(GradCheck, AnalyticMatchesCentralDifferences) {
  const auto r = check_gradients(GetParam(), 10, 7);
  EXPECT_EQ(r.trials, 10);
  EXPECT_GT(r.scalars_checked, 0u);
  EXPECT_LT(r.max_rel_error, 1e-4) << GetParam();
  EXPECT_TRUE(r.passed());
}

INSTANTIATE_TEST_SUITE_P(AllOps, GradCheck, ::testing::ValuesIn(gradcheck_ops()),
                         [](const auto& info) { return info.param; });

TEST(GradCheckHarness, ZeroProbeHasZeroGradient) {
  const auto r = check_gradients("zero_probe", 3, 1);
  EXPECT_EQ(r.max_abs_analytic, 0.0);
  EXPECT_TRUE(r.passed());
}

TEST(GradCheckHarness, DeterministicAndValidated) {
  EXPECT_EQ(check_gradients("deg_reg", 2, 5), check_gradients("deg_reg", 2, 5));
  EXPECT_THROW(check_gradients("softmax", 1, 1), LookupError);
  EXPECT_THROW(check_gradients("deg_reg", 0, 1), ConfigError);
}

}  // namespace
}  // namespace caselink
