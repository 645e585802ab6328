#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "scaletrain/layers.hpp"
#include "test_util.hpp"

using namespace scaletrain;
using scaletrain::testing::max_relative_error;
using scaletrain::testing::numeric_gradient;
using scaletrain::testing::random_tensor;
using scaletrain::testing::weighted_sum;

namespace {

// Values at least 1e-3 away from zero so central differences never cross the kink.
Tensor<double> away_from_zero(const Shape& shape, Rng& rng) {
  auto t = random_tensor(shape, rng);
  for (auto& v : t.values()) v = (v < 0 ? -1e-3 : 1e-3) + v;
  return t;
}

// Distinct values spaced 1e-2 apart in random order, so each pooling
// window has a unique maximum by a wide margin.
Tensor<double> distinct_values(const Shape& shape, Rng& rng) {
  Tensor<double> t(shape);
  std::vector<std::size_t> order(t.size());
  std::iota(order.begin(), order.end(), 0);
  shuffle(order.begin(), order.end(), rng);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = 1e-2 * static_cast<double>(order[i]);
  return t;
}

}  // namespace

TEST(Relu, ForwardAndBackward) {
  Tensor<double> x({4}, std::vector<double>{-1, 0, 2, -3});
  EXPECT_EQ(relu_forward(x).to_vector(), (std::vector<double>{0, 0, 2, 0}));
  Tensor<double> g({4}, std::vector<double>{1, 1, 1, 1});
  EXPECT_EQ(relu_backward(x, g).to_vector(), (std::vector<double>{0, 0, 1, 0}));
  Rng rng(2);
  auto in = away_from_zero({2, 3, 4, 4}, rng);
  const auto w = random_tensor(in.shape(), rng);
  auto loss = [&] { return weighted_sum(relu_forward(in), w); };
  EXPECT_LT(max_relative_error(relu_backward(in, w), numeric_gradient(in, loss)), 1e-6);
}

TEST(MaxPool, PicksWindowMaximum) {
  Tensor<double> x({1, 1, 2, 4}, std::vector<double>{1, 5, 2, 0, 3, 4, 7, 6});
  const auto r = maxpool_forward(x, 2, 2);
  EXPECT_EQ(r.output.to_vector(), (std::vector<double>{5, 7}));
  const auto g = maxpool_backward(x.shape(), r.argmax, Tensor<double>({1, 1, 1, 2}, std::vector<double>{1, 2}));
  EXPECT_EQ(g.to_vector(), (std::vector<double>{0, 1, 0, 0, 0, 0, 2, 0}));
}

TEST(MaxPool, GradientsMatchFiniteDifferences) {
  Rng rng(4);
  for (auto [window, stride] : {std::pair<std::size_t, std::size_t>{2, 2}, {3, 2}, {2, 1}}) {
    auto in = distinct_values({2, 2, 7, 6}, rng);
    const auto w = random_tensor(maxpool_forward(in, window, stride).output.shape(), rng);
    auto loss = [&] { return weighted_sum(maxpool_forward(in, window, stride).output, w); };
    const auto r = maxpool_forward(in, window, stride);
    EXPECT_LT(max_relative_error(maxpool_backward(in.shape(), r.argmax, w), numeric_gradient(in, loss)), 1e-6);
  }
}

TEST(MaxPool, WindowLargerThanInputIsShapeError) {
  EXPECT_THROW(maxpool_forward(Tensor<double>({1, 1, 2, 2}), 3, 1), ShapeError);
}

TEST(Flatten, ChannelMajorWidthFastest) {
  Tensor<double> x({1, 2, 2, 2}, std::vector<double>{0, 1, 2, 3, 4, 5, 6, 7});
  const auto f = flatten_forward(x);
  EXPECT_EQ(f.shape(), (Shape{1, 8}));
  EXPECT_EQ(f.at(0, 5), x.at(0, 1, 0, 1));
  EXPECT_EQ(flatten_backward(x.shape(), f), x);
}

TEST(Fc, ForwardAndGradients) {
  Rng rng(6);
  FcLayerParams<double> p{random_tensor({5, 3}, rng), random_tensor({3}, rng)};
  auto in = random_tensor({4, 5}, rng);
  const auto y = fc_forward(in, p);
  ASSERT_EQ(y.shape(), (Shape{4, 3}));
  double expect = p.bias[1];
  for (std::size_t i = 0; i < 5; ++i) expect += in.at(2, i) * p.weights.at(i, 1);
  EXPECT_NEAR(y.at(2, 1), expect, 1e-12);
  const auto w = random_tensor(y.shape(), rng);
  auto loss = [&] { return weighted_sum(fc_forward(in, p), w); };
  const auto g = fc_backward(in, p, w);
  EXPECT_LT(max_relative_error(g.input, numeric_gradient(in, loss)), 1e-6);
  EXPECT_LT(max_relative_error(g.weights, numeric_gradient(p.weights, loss)), 1e-6);
  EXPECT_LT(max_relative_error(g.bias, numeric_gradient(p.bias, loss)), 1e-6);
  EXPECT_THROW(fc_forward(random_tensor({4, 6}, rng), p), ShapeError);
}

TEST(SoftmaxXent, UniformLogitsGiveLogTen) {
  Tensor<double> logits({3, 10}, 0.25);
  const std::vector<int> labels{0, 4, 9};
  const auto r = softmax_xent_forward(logits, labels);
  EXPECT_NEAR(r.loss, std::log(10.0), 1e-12);
  EXPECT_NEAR(r.loss, 2.302585, 1e-6);
  for (auto p : r.probabilities.values()) EXPECT_NEAR(p, 0.1, 1e-12);
}

TEST(SoftmaxXent, StableForLargeLogits) {
  Tensor<double> logits({1, 3}, std::vector<double>{1000, 0, -1000});
  const std::vector<int> labels{0};
  const auto r = softmax_xent_forward(logits, labels);
  EXPECT_TRUE(std::isfinite(r.loss));
  EXPECT_NEAR(r.loss, 0.0, 1e-12);
  EXPECT_EQ(r.correct, 1u);
}

TEST(SoftmaxXent, GradientMatchesFiniteDifferences) {
  Rng rng(8);
  auto logits = random_tensor({5, 10}, rng, -3, 3);
  const std::vector<int> labels{1, 0, 9, 3, 3};
  auto loss = [&] { return softmax_xent_forward(logits, labels).loss; };
  const auto r = softmax_xent_forward(logits, labels);
  EXPECT_LT(max_relative_error(softmax_xent_backward(r.probabilities, labels), numeric_gradient(logits, loss)), 1e-6);
}

TEST(SoftmaxXent, LabelErrors) {
  Tensor<double> logits({2, 3});
  const std::vector<int> short_labels{0};
  const std::vector<int> bad_labels{0, 3};
  EXPECT_THROW(softmax_xent_forward(logits, short_labels), ShapeError);
  EXPECT_ANY_THROW(softmax_xent_forward(logits, bad_labels));
}
