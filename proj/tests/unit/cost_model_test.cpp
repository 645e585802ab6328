#include <gtest/gtest.h>

#include <cmath>

#include "scaletrain/cost_model.hpp"
#include "scaletrain/surgery.hpp"

using namespace scaletrain;

TEST(CostModel, FullResolutionFirstLayer) {
  EXPECT_DOUBLE_EQ(multiplications({3, 96, 11, 231, 1}), 1702011168.0);
}

TEST(CostModel, ScaledFirstLayer) {
  const LayerCostQuery q{3, 96, 11, 231, 11.0 / 7.0};
  EXPECT_NEAR(multiplications(q), 280560672.0, 1e-3);
  EXPECT_NEAR(1702011168.0 / multiplications(q), 6.07, 0.005);
  const auto b = reduction_bounds(q);
  EXPECT_LT(b.lower, multiplications(q));
  EXPECT_LE(multiplications(q), b.upper);
  EXPECT_NEAR(b.upper, 1702011168.0 / (121.0 / 49.0), 1e-3);
}

TEST(CostModel, RectangularInputs) {
  EXPECT_DOUBLE_EQ(multiplications({2, 3, 3, 5, 1, 7}), 2.0 * 9 * 3 * 5 * 3);
}

TEST(CostModel, DomainErrors) {
  EXPECT_THROW(multiplications({3, 96, 11, 10, 1}), DomainError);
  EXPECT_THROW(multiplications({0, 96, 3, 10, 1}), DomainError);
  EXPECT_THROW(multiplications({3, 96, 3, 10, 0.5}), DomainError);
  EXPECT_THROW(reduction_bounds({3, 96, 3, 10, 1}), DomainError);
}

TEST(CostModel, ConversionTable) {
  const std::pair<long long, std::size_t> table[] = {{1, 1}, {3, 2}, {5, 3}, {7, 5}, {11, 7}};
  for (auto [k, kp] : table) EXPECT_EQ(suggest_pretrain_kernel(k).k_pretrain, kp) << k;
  EXPECT_NEAR(suggest_pretrain_kernel(5).s(), 5.0 / 3.0, 1e-15);
}

TEST(CostModel, ConversionFallbackStaysWithinScaleLimit) {
  for (long long k = 9; k <= 31; k += 2) {
    if (k == 11) continue;
    const auto c = suggest_pretrain_kernel(k);
    EXPECT_LE(c.s(), kMaxKernelScale + 1e-12) << k;
    EXPECT_GT(static_cast<double>(k) / static_cast<double>(c.k_pretrain - 1), kMaxKernelScale) << k;
  }
  EXPECT_EQ(suggest_pretrain_kernel(9).k_pretrain, 6u);
}

TEST(CostModel, ConversionRejectsEvenAndNonPositive) {
  EXPECT_THROW(suggest_pretrain_kernel(4), DomainError);
  EXPECT_THROW(suggest_pretrain_kernel(0), DomainError);
  EXPECT_THROW(suggest_pretrain_kernel(-3), DomainError);
}

TEST(CostModel, BoundsHoldForTableConversions) {
  const std::pair<double, double> table[] = {{3, 2}, {5, 3}, {7, 5}, {11, 7}};
  for (auto [k, kp] : table) {
    for (double h = k; h <= 512; ++h) {
      const LayerCostQuery q{16, 32, k, h, k / kp};
      const double m = multiplications(q);
      const auto b = reduction_bounds(q);
      ASSERT_LT(b.lower, m) << k << " " << h;
      ASSERT_LE(m, b.upper * (1 + 1e-12)) << k << " " << h;
    }
  }
}

TEST(CostModel, NetworkSpeedupLiesBetweenLayerFactors) {
  const auto arch = parse_architecture("input 3 40 40\nconv 8 3 1 0\nrelu\nconv 16 5 1 0\nflatten\nfc 4\n");
  const auto plan = derive_pretrain_architecture(arch).plan;
  const auto cost = network_cost(arch, plan);
  ASSERT_EQ(cost.layers.size(), 2u);
  const double s2_min = std::min(cost.layers[0].s * cost.layers[0].s, cost.layers[1].s * cost.layers[1].s);
  const double s4_max = std::max(std::pow(cost.layers[0].s, 4), std::pow(cost.layers[1].s, 4));
  EXPECT_GT(cost.speedup(), s2_min);
  EXPECT_LT(cost.speedup(), s4_max);
  EXPECT_DOUBLE_EQ(cost.total_target, cost.layers[0].mults_target + cost.layers[1].mults_target);
  EXPECT_DOUBLE_EQ(cost.total_target, multiplications({3, 8, 3, 40, 1}) + multiplications({8, 16, 5, 38, 1}));
}

TEST(CostModel, PointwiseNetworkHasUnitSpeedup) {
  const auto arch = parse_architecture("input 3 8 8\nconv 4 1 1 0\nflatten\nfc 2\n");
  EXPECT_DOUBLE_EQ(network_cost(arch, derive_pretrain_architecture(arch).plan).speedup(), 1.0);
  EXPECT_DOUBLE_EQ(network_cost(arch).speedup(), 1.0);
}

TEST(CostModel, RealizedCountsUseIntegerGeometry) {
  const auto arch = parse_architecture(
      "input 3 32 32\nconv 32 5 1 0\nrelu\nmaxpool 2 2\nconv 64 3 1 0\nrelu\nmaxpool 2 2\nflatten\nfc 512\nrelu\n"
      "fc 10\nsoftmax\n");
  const auto cost = network_cost(arch, derive_pretrain_architecture(arch).plan);
  EXPECT_EQ(cost.layers[0].realized_target, 3ull * 25 * 28 * 28 * 32);
  EXPECT_EQ(cost.layers[1].realized_target, 32ull * 9 * 12 * 12 * 64);
  EXPECT_EQ(cost.layers[0].realized_pretrain, 3ull * 9 * 17 * 17 * 32);
  EXPECT_EQ(cost.layers[1].realized_pretrain, 32ull * 4 * 8 * 8 * 64);
}
