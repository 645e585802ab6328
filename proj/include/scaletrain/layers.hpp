#pragma once

#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "scaletrain/conv.hpp"
#include "scaletrain/tensor.hpp"

namespace scaletrain {

// ---------------------------------------------------------------- relu

template <typename T>
Tensor<T> relu_forward(const Tensor<T>& input) {
  Tensor<T> out = input;
  for (auto& v : out.values()) v = v > T{0} ? v : T{0};
  return out;
}

template <typename T>
Tensor<T> relu_backward(const Tensor<T>& input, const Tensor<T>& grad_out) {
  require_shape(grad_out.shape(), input.shape(), "relu grad_out");
  Tensor<T> grad(input.shape());
  for (std::size_t i = 0; i < input.size(); ++i) {
    grad[i] = input[i] > T{0} ? grad_out[i] : T{0};
  }
  return grad;
}

// ------------------------------------------------------------- maxpool

template <typename T>
struct MaxPoolResult {
  Tensor<T> output;
  std::vector<std::size_t> argmax;  // flat input index per output element
};

template <typename T>
MaxPoolResult<T> maxpool_forward(const Tensor<T>& input, std::size_t window, std::size_t stride) {
  require_rank(input.shape(), 4, "maxpool input");
  if (window == 0 || stride == 0) throw ShapeError("maxpool window and stride must be positive");
  const std::size_t n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
  if (window > h || window > w) {
    throw ShapeError("maxpool window " + std::to_string(window) + " exceeds input " +
                     std::to_string(h) + "x" + std::to_string(w));
  }
  const std::size_t oh = (h - window) / stride + 1;
  const std::size_t ow = (w - window) / stride + 1;
  MaxPoolResult<T> r{Tensor<T>({n, c, oh, ow}), std::vector<std::size_t>(n * c * oh * ow)};
  std::size_t o = 0;
  for (std::size_t plane = 0; plane < n * c; ++plane) {
    const std::size_t base = plane * h * w;
    for (std::size_t y = 0; y < oh; ++y) {
      for (std::size_t x = 0; x < ow; ++x, ++o) {
        std::size_t best = base + y * stride * w + x * stride;
        for (std::size_t i = 0; i < window; ++i) {
          for (std::size_t j = 0; j < window; ++j) {
            const std::size_t idx = base + (y * stride + i) * w + x * stride + j;
            if (input[idx] > input[best]) best = idx;
          }
        }
        r.output[o] = input[best];
        r.argmax[o] = best;
      }
    }
  }
  return r;
}

template <typename T>
Tensor<T> maxpool_backward(const Shape& input_shape, std::span<const std::size_t> argmax,
                           const Tensor<T>& grad_out) {
  if (argmax.size() != grad_out.size()) {
    throw ShapeError("maxpool grad_out has " + std::to_string(grad_out.size()) +
                     " elements but forward produced " + std::to_string(argmax.size()));
  }
  Tensor<T> grad(input_shape);
  for (std::size_t o = 0; o < argmax.size(); ++o) grad[argmax[o]] += grad_out[o];
  return grad;
}

// ------------------------------------------------------------- flatten

/// (N, C, H, W) -> (N, C*H*W), channel-major with width fastest.
template <typename T>
Tensor<T> flatten_forward(const Tensor<T>& input) {
  require_rank(input.shape(), 4, "flatten input");
  return input.reshaped({input.dim(0), input.dim(1) * input.dim(2) * input.dim(3)});
}

template <typename T>
Tensor<T> flatten_backward(const Shape& input_shape, const Tensor<T>& grad_out) {
  return grad_out.reshaped(input_shape);
}

// ----------------------------------------------------- fully connected

template <typename T>
struct FcLayerParams {
  Tensor<T> weights;  // (inputs, outputs)
  Tensor<T> bias;     // (outputs)

  std::size_t inputs() const { return weights.dim(0); }
  std::size_t outputs() const { return weights.dim(1); }

  void validate() const {
    require_rank(weights.shape(), 2, "fc weights");
    require_shape(bias.shape(), Shape{weights.dim(1)}, "fc bias");
  }
};

namespace detail {
template <typename T>
using ConstVectorMap = Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>>;
}

template <typename T>
Tensor<T> fc_forward(const Tensor<T>& input, const FcLayerParams<T>& params) {
  params.validate();
  require_rank(input.shape(), 2, "fc input");
  if (input.dim(1) != params.inputs()) {
    throw ShapeError("fc input has " + std::to_string(input.dim(1)) +
                     " features but weights expect " + std::to_string(params.inputs()));
  }
  const auto n = static_cast<Eigen::Index>(input.dim(0));
  const auto in = static_cast<Eigen::Index>(params.inputs());
  const auto out_n = static_cast<Eigen::Index>(params.outputs());
  Tensor<T> out({input.dim(0), params.outputs()});
  detail::ConstMatrixMap<T> x(input.raw(), n, in);
  detail::ConstMatrixMap<T> w(params.weights.raw(), in, out_n);
  detail::MatrixMap<T> y(out.raw(), n, out_n);
  y.noalias() = x * w;
  y.rowwise() += detail::ConstVectorMap<T>(params.bias.raw(), out_n);
  return out;
}

template <typename T>
struct FcGradients {
  Tensor<T> input;
  Tensor<T> weights;
  Tensor<T> bias;
};

template <typename T>
FcGradients<T> fc_backward(const Tensor<T>& input, const FcLayerParams<T>& params,
                           const Tensor<T>& grad_out) {
  params.validate();
  require_rank(input.shape(), 2, "fc input");
  require_shape(grad_out.shape(), Shape{input.dim(0), params.outputs()}, "fc grad_out");
  if (input.dim(1) != params.inputs()) throw ShapeError("fc input width does not match weights");
  const auto n = static_cast<Eigen::Index>(input.dim(0));
  const auto in = static_cast<Eigen::Index>(params.inputs());
  const auto out_n = static_cast<Eigen::Index>(params.outputs());
  FcGradients<T> g{Tensor<T>(input.shape()), Tensor<T>(params.weights.shape()),
                   Tensor<T>(params.bias.shape())};
  detail::ConstMatrixMap<T> x(input.raw(), n, in);
  detail::ConstMatrixMap<T> w(params.weights.raw(), in, out_n);
  detail::ConstMatrixMap<T> dy(grad_out.raw(), n, out_n);
  detail::MatrixMap<T>(g.input.raw(), n, in).noalias() = dy * w.transpose();
  detail::MatrixMap<T>(g.weights.raw(), in, out_n).noalias() = x.transpose() * dy;
  Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>>(g.bias.raw(), out_n) = dy.colwise().sum();
  return g;
}

// ------------------------------------------------ softmax cross-entropy

template <typename T>
struct SoftmaxXentResult {
  T loss;                // mean over the batch
  Tensor<T> probabilities;
  std::size_t correct;   // argmax hits
};

template <typename T>
SoftmaxXentResult<T> softmax_xent_forward(const Tensor<T>& logits, std::span<const int> labels) {
  require_rank(logits.shape(), 2, "softmax logits");
  const std::size_t n = logits.dim(0), k = logits.dim(1);
  if (labels.size() != n) {
    throw ShapeError("softmax got " + std::to_string(labels.size()) + " labels for batch of " +
                     std::to_string(n));
  }
  SoftmaxXentResult<T> r{T{0}, Tensor<T>(logits.shape()), 0};
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const T* z = logits.raw() + i * k;
    T* p = r.probabilities.raw() + i * k;
    const int label = labels[i];
    if (label < 0 || static_cast<std::size_t>(label) >= k) {
      throw ShapeError("label " + std::to_string(label) + " outside [0, " + std::to_string(k) + ")");
    }
    std::size_t best = 0;
    T zmax = z[0];
    for (std::size_t j = 1; j < k; ++j) {
      if (z[j] > zmax) {
        zmax = z[j];
        best = j;
      }
    }
    T sum{0};
    for (std::size_t j = 0; j < k; ++j) {
      p[j] = std::exp(z[j] - zmax);
      sum += p[j];
    }
    for (std::size_t j = 0; j < k; ++j) p[j] /= sum;
    total += static_cast<double>(std::log(sum) - (z[label] - zmax));
    if (best == static_cast<std::size_t>(label)) ++r.correct;
  }
  r.loss = static_cast<T>(total / static_cast<double>(n));
  return r;
}

/// Gradient of the mean loss with respect to the logits.
template <typename T>
Tensor<T> softmax_xent_backward(const Tensor<T>& probabilities, std::span<const int> labels) {
  require_rank(probabilities.shape(), 2, "softmax probabilities");
  const std::size_t n = probabilities.dim(0), k = probabilities.dim(1);
  if (labels.size() != n) throw ShapeError("softmax label count does not match batch");
  Tensor<T> grad = probabilities;
  const T scale = T{1} / static_cast<T>(n);
  for (std::size_t i = 0; i < n; ++i) {
    grad[i * k + static_cast<std::size_t>(labels[i])] -= T{1};
    for (std::size_t j = 0; j < k; ++j) grad[i * k + j] *= scale;
  }
  return grad;
}

}  // namespace scaletrain
