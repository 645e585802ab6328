#include <gtest/gtest.h>

#include <set>

#include "scaletrain/random.hpp"
#include "scaletrain/tensor.hpp"

using namespace scaletrain;

TEST(Tensor, ShapeAndIndexing) {
  Tensor<float> t({2, 3, 4, 5});
  EXPECT_EQ(t.size(), 120u);
  EXPECT_EQ(t.rank(), 4u);
  t.at(1, 2, 3, 4) = 7.f;
  EXPECT_EQ(t[119], 7.f);
  Tensor<float> m({3, 4});
  m.at(2, 1) = 5.f;
  EXPECT_EQ(m[9], 5.f);
}

TEST(Tensor, RejectsBadShapes) {
  EXPECT_THROW(Tensor<float>(Shape{}), ShapeError);
  EXPECT_THROW(Tensor<float>(Shape{2, 0}), ShapeError);
  EXPECT_THROW(Tensor<float>(Shape{1, 1, 1, 1, 1}), ShapeError);
  EXPECT_THROW(Tensor<float>(Shape{2, 2}, std::vector<float>(3)), ShapeError);
}

TEST(Tensor, ReshapeKeepsData) {
  Tensor<double> t({2, 6}, std::vector<double>{0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11});
  const auto r = t.reshaped({3, 4});
  EXPECT_EQ(r.values(), t.values());
  EXPECT_THROW(t.reshaped({5}), ShapeError);
}

TEST(Tensor, CastAndFinite) {
  Tensor<double> t({3}, std::vector<double>{1.5, -2.25, 0});
  EXPECT_TRUE(t.all_finite());
  EXPECT_EQ(t.cast<float>().to_vector(), (std::vector<float>{1.5f, -2.25f, 0.f}));
  t[1] = std::nan("");
  EXPECT_FALSE(t.all_finite());
}

TEST(Rng, StateRoundTripReplaysStream) {
  Rng a(42);
  for (int i = 0; i < 10; ++i) a.next();
  Rng b;
  b.restore(a.state());
  EXPECT_TRUE(a == b);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next(), b.next());
  EXPECT_THROW(b.restore("not a state"), CorruptCheckpointError);
}

TEST(Rng, UniformAndBelowStayInRange) {
  Rng r(7);
  for (int i = 0; i < 10000; ++i) {
    const double u = r.uniform01();
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
    EXPECT_LT(r.below(7), 7u);
  }
}

TEST(Rng, ShuffleIsPermutationAndDeterministic) {
  std::vector<int> a(50), b(50);
  for (int i = 0; i < 50; ++i) a[i] = b[i] = i;
  Rng r1(3), r2(3);
  shuffle(a.begin(), a.end(), r1);
  shuffle(b.begin(), b.end(), r2);
  EXPECT_EQ(a, b);
  EXPECT_EQ(std::set<int>(a.begin(), a.end()).size(), 50u);
}
