#pragma once

#include <cstdint>
#include <string>
#include <tuple>

#include <Eigen/Core>

#include "scaletrain/tensor.hpp"

namespace scaletrain {

/// Per-side padding. Negative values crop rows/columns from that border.
struct Padding {
  int top = 0;
  int left = 0;
  int bottom = 0;
  int right = 0;

  static Padding uniform(int p) { return {p, p, p, p}; }
  bool symmetric() const { return top == bottom && left == right && top == left; }
  bool non_negative() const { return top >= 0 && left >= 0 && bottom >= 0 && right >= 0; }
  friend bool operator==(const Padding&, const Padding&) = default;
};

/// Output extent of a sliding window, or a non-positive value when the
/// (padded) input is smaller than the window.
inline long long window_output_extent(long long in, long long before, long long after,
                                      long long window, long long stride) {
  const long long span = in + before + after - window;
  if (span < 0) return 0;
  return span / stride + 1;
}

template <typename T>
struct ConvLayerParams {
  Tensor<T> kernels;  // (C_out, C_in, k, k)
  Tensor<T> bias;     // (C_out)
  int stride = 1;
  Padding pad{};

  std::size_t out_channels() const { return kernels.dim(0); }
  std::size_t in_channels() const { return kernels.dim(1); }
  std::size_t kernel_size() const { return kernels.dim(2); }

  void validate() const {
    require_rank(kernels.shape(), 4, "conv kernels");
    if (kernels.dim(2) != kernels.dim(3)) {
      throw ShapeError("conv kernels must be square, got " + shape_string(kernels.shape()));
    }
    require_shape(bias.shape(), Shape{kernels.dim(0)}, "conv bias");
    if (stride < 1) throw ShapeError("conv stride must be positive");
  }
};

enum class ConvAlgorithm { Naive, Im2col };

namespace detail {

struct ConvGeometry {
  std::size_t batch, c_in, h, w, c_out, k, out_h, out_w;
  int stride;
  Padding pad;
};

template <typename T>
ConvGeometry conv_geometry(const Tensor<T>& input, const ConvLayerParams<T>& params) {
  params.validate();
  require_rank(input.shape(), 4, "conv input");
  if (input.dim(1) != params.in_channels()) {
    throw ShapeError("conv input has " + std::to_string(input.dim(1)) +
                     " channels but kernels expect C_in=" +
                     std::to_string(params.in_channels()));
  }
  const auto k = static_cast<long long>(params.kernel_size());
  const auto oh = window_output_extent(static_cast<long long>(input.dim(2)), params.pad.top,
                                       params.pad.bottom, k, params.stride);
  const auto ow = window_output_extent(static_cast<long long>(input.dim(3)), params.pad.left,
                                       params.pad.right, k, params.stride);
  if (oh < 1 || ow < 1) {
    throw ShapeError("conv padded input " + std::to_string(input.dim(2)) + "x" +
                     std::to_string(input.dim(3)) + " is smaller than kernel " +
                     std::to_string(k) + "x" + std::to_string(k));
  }
  return {input.dim(0),          input.dim(1),          input.dim(2),
          input.dim(3),          params.out_channels(), params.kernel_size(),
          static_cast<std::size_t>(oh), static_cast<std::size_t>(ow), params.stride,
          params.pad};
}

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatrixMap = Eigen::Map<RowMatrix<T>>;
template <typename T>
using ConstMatrixMap = Eigen::Map<const RowMatrix<T>>;

// Unfolds one image (C_in, h, w) into columns (C_in*k*k, out_h*out_w).
template <typename T>
void im2col(const T* image, const ConvGeometry& g, T* columns) {
  const long long h = static_cast<long long>(g.h);
  const long long w = static_cast<long long>(g.w);
  const std::size_t plane = g.out_h * g.out_w;
  for (std::size_t c = 0; c < g.c_in; ++c) {
    const T* src = image + c * g.h * g.w;
    for (std::size_t ki = 0; ki < g.k; ++ki) {
      for (std::size_t kj = 0; kj < g.k; ++kj) {
        T* dst = columns + ((c * g.k + ki) * g.k + kj) * plane;
        for (std::size_t oy = 0; oy < g.out_h; ++oy) {
          const long long y = static_cast<long long>(oy) * g.stride + static_cast<long long>(ki) - g.pad.top;
          T* row = dst + oy * g.out_w;
          if (y < 0 || y >= h) {
            std::fill(row, row + g.out_w, T{0});
            continue;
          }
          const T* src_row = src + y * w;
          for (std::size_t ox = 0; ox < g.out_w; ++ox) {
            const long long x = static_cast<long long>(ox) * g.stride + static_cast<long long>(kj) - g.pad.left;
            row[ox] = (x >= 0 && x < w) ? src_row[x] : T{0};
          }
        }
      }
    }
  }
}

// Adjoint of im2col: scatters column gradients back into an image gradient.
template <typename T>
void col2im(const T* columns, const ConvGeometry& g, T* image) {
  const long long h = static_cast<long long>(g.h);
  const long long w = static_cast<long long>(g.w);
  const std::size_t plane = g.out_h * g.out_w;
  for (std::size_t c = 0; c < g.c_in; ++c) {
    T* dst = image + c * g.h * g.w;
    for (std::size_t ki = 0; ki < g.k; ++ki) {
      for (std::size_t kj = 0; kj < g.k; ++kj) {
        const T* src = columns + ((c * g.k + ki) * g.k + kj) * plane;
        for (std::size_t oy = 0; oy < g.out_h; ++oy) {
          const long long y = static_cast<long long>(oy) * g.stride + static_cast<long long>(ki) - g.pad.top;
          if (y < 0 || y >= h) continue;
          const T* row = src + oy * g.out_w;
          T* dst_row = dst + y * w;
          for (std::size_t ox = 0; ox < g.out_w; ++ox) {
            const long long x = static_cast<long long>(ox) * g.stride + static_cast<long long>(kj) - g.pad.left;
            if (x >= 0 && x < w) dst_row[x] += row[ox];
          }
        }
      }
    }
  }
}

template <typename T>
Tensor<T> conv2d_forward_naive(const Tensor<T>& input, const ConvLayerParams<T>& params,
                               const ConvGeometry& g, std::uint64_t* multiplications) {
  Tensor<T> out({g.batch, g.c_out, g.out_h, g.out_w});
  std::uint64_t count = 0;
  const long long h = static_cast<long long>(g.h);
  const long long w = static_cast<long long>(g.w);
  for (std::size_t n = 0; n < g.batch; ++n) {
    for (std::size_t co = 0; co < g.c_out; ++co) {
      for (std::size_t oy = 0; oy < g.out_h; ++oy) {
        for (std::size_t ox = 0; ox < g.out_w; ++ox) {
          T acc = params.bias[co];
          for (std::size_t ci = 0; ci < g.c_in; ++ci) {
            for (std::size_t ki = 0; ki < g.k; ++ki) {
              const long long y = static_cast<long long>(oy) * g.stride + static_cast<long long>(ki) - g.pad.top;
              if (y < 0 || y >= h) continue;
              for (std::size_t kj = 0; kj < g.k; ++kj) {
                const long long x = static_cast<long long>(ox) * g.stride + static_cast<long long>(kj) - g.pad.left;
                if (x < 0 || x >= w) continue;
                acc += input.at(n, ci, static_cast<std::size_t>(y), static_cast<std::size_t>(x)) *
                       params.kernels.at(co, ci, ki, kj);
                ++count;
              }
            }
          }
          out.at(n, co, oy, ox) = acc;
        }
      }
    }
  }
  if (multiplications) *multiplications += count;
  return out;
}

template <typename T>
Tensor<T> conv2d_forward_im2col(const Tensor<T>& input, const ConvLayerParams<T>& params,
                                const ConvGeometry& g) {
  Tensor<T> out({g.batch, g.c_out, g.out_h, g.out_w});
  const std::size_t patch = g.c_in * g.k * g.k;
  const std::size_t plane = g.out_h * g.out_w;
  AlignedVector<T> columns(patch * plane);
  ConstMatrixMap<T> kernels(params.kernels.raw(), static_cast<Eigen::Index>(g.c_out),
                            static_cast<Eigen::Index>(patch));
  Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> bias(params.bias.raw(),
                                                            static_cast<Eigen::Index>(g.c_out));
  for (std::size_t n = 0; n < g.batch; ++n) {
    im2col(input.raw() + n * g.c_in * g.h * g.w, g, columns.data());
    ConstMatrixMap<T> cols(columns.data(), static_cast<Eigen::Index>(patch),
                           static_cast<Eigen::Index>(plane));
    MatrixMap<T> result(out.raw() + n * g.c_out * plane, static_cast<Eigen::Index>(g.c_out),
                        static_cast<Eigen::Index>(plane));
    result.noalias() = kernels * cols;
    result.colwise() += bias;
  }
  return out;
}

}  // namespace detail

/// Cross-correlation of a (N, C_in, H, W) batch with (C_out, C_in, k, k)
/// kernels plus per-channel bias. The naive path counts every
/// multiplication it performs into `multiplications` when non-null.
template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& input, const ConvLayerParams<T>& params,
                         ConvAlgorithm algorithm = ConvAlgorithm::Im2col,
                         std::uint64_t* multiplications = nullptr) {
  const auto g = detail::conv_geometry(input, params);
  if (algorithm == ConvAlgorithm::Naive || multiplications != nullptr) {
    return detail::conv2d_forward_naive(input, params, g, multiplications);
  }
  return detail::conv2d_forward_im2col(input, params, g);
}

template <typename T>
struct ConvGradients {
  Tensor<T> input;
  Tensor<T> kernels;
  Tensor<T> bias;
};

template <typename T>
ConvGradients<T> conv2d_backward(const Tensor<T>& input, const ConvLayerParams<T>& params,
                                 const Tensor<T>& grad_out) {
  using detail::ConstMatrixMap;
  using detail::MatrixMap;
  const auto g = detail::conv_geometry(input, params);
  require_shape(grad_out.shape(), Shape{g.batch, g.c_out, g.out_h, g.out_w}, "conv grad_out");

  const std::size_t patch = g.c_in * g.k * g.k;
  const std::size_t plane = g.out_h * g.out_w;
  const auto rows = static_cast<Eigen::Index>(g.c_out);
  const auto cols_n = static_cast<Eigen::Index>(patch);
  const auto plane_n = static_cast<Eigen::Index>(plane);

  ConvGradients<T> grads{Tensor<T>(input.shape()), Tensor<T>(params.kernels.shape()),
                         Tensor<T>(params.bias.shape())};
  AlignedVector<T> columns(patch * plane);
  AlignedVector<T> grad_columns(patch * plane);
  ConstMatrixMap<T> kernels(params.kernels.raw(), rows, cols_n);
  MatrixMap<T> grad_kernels(grads.kernels.raw(), rows, cols_n);
  Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>> grad_bias(grads.bias.raw(), rows);

  for (std::size_t n = 0; n < g.batch; ++n) {
    ConstMatrixMap<T> upstream(grad_out.raw() + n * g.c_out * plane, rows, plane_n);
    detail::im2col(input.raw() + n * g.c_in * g.h * g.w, g, columns.data());
    ConstMatrixMap<T> cols(columns.data(), cols_n, plane_n);
    grad_kernels.noalias() += upstream * cols.transpose();
    grad_bias += upstream.rowwise().sum();

    MatrixMap<T> grad_cols(grad_columns.data(), cols_n, plane_n);
    grad_cols.noalias() = kernels.transpose() * upstream;
    detail::col2im(grad_columns.data(), g, grads.input.raw() + n * g.c_in * g.h * g.w);
  }
  return grads;
}

}  // namespace scaletrain
