#include <gtest/gtest.h>

#include "scaletrain/conv.hpp"
#include "test_util.hpp"

using namespace scaletrain;
using scaletrain::testing::max_relative_error;
using scaletrain::testing::numeric_gradient;
using scaletrain::testing::random_tensor;
using scaletrain::testing::weighted_sum;

namespace {

ConvLayerParams<double> random_layer(Rng& rng, std::size_t co, std::size_t ci, std::size_t k, int stride,
                                     Padding pad) {
  return {random_tensor({co, ci, k, k}, rng), random_tensor({co}, rng), stride, pad};
}

}  // namespace

TEST(Conv, TwoByTwoAllOnesSumsInput) {
  Tensor<double> in({1, 1, 2, 2}, std::vector<double>{1, 2, 3, 4});
  ConvLayerParams<double> p{Tensor<double>({1, 1, 2, 2}, 1.0), Tensor<double>({1}), 1, {}};
  for (auto algo : {ConvAlgorithm::Naive, ConvAlgorithm::Im2col}) {
    const auto out = conv2d_forward(in, p, algo);
    ASSERT_EQ(out.shape(), (Shape{1, 1, 1, 1}));
    EXPECT_DOUBLE_EQ(out[0], 10.0);
  }
}

TEST(Conv, CrossCorrelationWithoutFlip) {
  ConvLayerParams<double> p{Tensor<double>({1, 1, 2, 2}, std::vector<double>{5, 6, 7, 8}), Tensor<double>({1}), 1, {}};
  Tensor<double> img({1, 1, 2, 2}, std::vector<double>{1, 0, 0, 0});
  EXPECT_DOUBLE_EQ(conv2d_forward(img, p)[0], 5.0);
}

TEST(Conv, OutputExtentFollowsStrideAndPad) {
  EXPECT_EQ(window_output_extent(231, 0, 0, 11, 4), 56);
  EXPECT_EQ(window_output_extent(5, 1, 1, 3, 1), 5);
  EXPECT_EQ(window_output_extent(9, 0, -1, 2, 1), 7);
  EXPECT_EQ(window_output_extent(2, 0, 0, 3, 1), 0);
}

TEST(Conv, NaiveAndIm2colAgree) {
  Rng rng(11);
  const Padding pads[] = {{0, 0, 0, 0}, {1, 1, 1, 1}, {0, 0, 1, 1}, {-1, 0, 0, -1}, {2, 0, 1, -1}};
  for (const auto& pad : pads) {
    for (int stride : {1, 2, 3}) {
      const auto p = random_layer(rng, 4, 3, 3, stride, pad);
      const auto in = random_tensor({2, 3, 9, 8}, rng);
      const auto a = conv2d_forward(in, p, ConvAlgorithm::Naive);
      const auto b = conv2d_forward(in, p, ConvAlgorithm::Im2col);
      ASSERT_EQ(a.shape(), b.shape());
      EXPECT_LT(max_relative_error(a, b), 1e-12);
    }
  }
}

TEST(Conv, MultiplicationCounterMatchesClosedForm) {
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t ci = 1 + rng.below(4), co = 1 + rng.below(4), k = 1 + rng.below(5);
    const std::size_t h = k + rng.below(8);
    const auto p = random_layer(rng, co, ci, k, 1, {});
    std::uint64_t count = 0;
    conv2d_forward(random_tensor({1, ci, h, h}, rng), p, ConvAlgorithm::Naive, &count);
    EXPECT_EQ(count, ci * k * k * (h - k + 1) * (h - k + 1) * co);
  }
}

TEST(Conv, Linearity) {
  Rng rng(9);
  auto p = random_layer(rng, 3, 2, 3, 1, Padding::uniform(1));
  p.bias.fill(0);
  const auto i1 = random_tensor({1, 2, 6, 6}, rng), i2 = random_tensor({1, 2, 6, 6}, rng);
  const double a = 1.7, b = -0.4;
  Tensor<double> mix(i1.shape());
  for (std::size_t i = 0; i < mix.size(); ++i) mix[i] = a * i1[i] + b * i2[i];
  const auto y1 = conv2d_forward(i1, p), y2 = conv2d_forward(i2, p), y = conv2d_forward(mix, p);
  Tensor<double> expect(y.shape());
  for (std::size_t i = 0; i < y.size(); ++i) expect[i] = a * y1[i] + b * y2[i];
  EXPECT_LT(max_relative_error(y, expect, 1.0), 1e-10);
}

TEST(Conv, GradientsMatchFiniteDifferences) {
  Rng rng(3);
  const Padding pads[] = {{0, 0, 0, 0}, {1, 1, 1, 1}, {0, 0, 1, 1}, {-1, 1, 0, -1}};
  for (const auto& pad : pads) {
    for (int stride : {1, 2}) {
      auto p = random_layer(rng, 2, 3, 3, stride, pad);
      auto in = random_tensor({2, 3, 7, 6}, rng);
      const auto w = random_tensor(conv2d_forward(in, p).shape(), rng);
      auto loss = [&] { return weighted_sum(conv2d_forward(in, p), w); };
      const auto g = conv2d_backward(in, p, w);
      EXPECT_LT(max_relative_error(g.input, numeric_gradient(in, loss)), 1e-6);
      EXPECT_LT(max_relative_error(g.kernels, numeric_gradient(p.kernels, loss)), 1e-6);
      EXPECT_LT(max_relative_error(g.bias, numeric_gradient(p.bias, loss)), 1e-6);
    }
  }
}

TEST(Conv, ShapeErrors) {
  Rng rng(1);
  const auto p = random_layer(rng, 2, 3, 3, 1, {});
  EXPECT_THROW(conv2d_forward(random_tensor({1, 2, 5, 5}, rng), p), ShapeError);
  EXPECT_THROW(conv2d_forward(random_tensor({1, 3, 2, 2}, rng), p), ShapeError);
  EXPECT_THROW(conv2d_forward(random_tensor({3, 5, 5}, rng), p), ShapeError);
  auto bad = p;
  bad.bias = Tensor<double>({3});
  EXPECT_THROW(conv2d_forward(random_tensor({1, 3, 5, 5}, rng), bad), ShapeError);
  EXPECT_THROW(conv2d_backward(random_tensor({1, 3, 5, 5}, rng), p, Tensor<double>({1, 2, 2, 2})), ShapeError);
}
