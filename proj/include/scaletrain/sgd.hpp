#pragma once

#include <vector>

#include "scaletrain/tensor.hpp"

namespace scaletrain {

template <typename T>
struct SgdState {
  std::vector<Tensor<T>> velocity;  // mirrors the parameter list
  double momentum = 0.9;
  double weight_decay = 0.0;
  double learning_rate = 0.01;

  /// Zero velocity matching `params`.
  static SgdState zeros_like(const std::vector<Tensor<T>*>& params) {
    SgdState s;
    for (const auto* p : params) s.velocity.emplace_back(p->shape());
    return s;
  }
};

/// Classic momentum with weight decay folded into the gradient:
///   v <- mu*v - lr*(g + wd*w);  w <- w + v
template <typename T>
void sgd_step(const std::vector<Tensor<T>*>& params, const std::vector<const Tensor<T>*>& grads,
              SgdState<T>& state) {
  if (params.size() != grads.size() || params.size() != state.velocity.size()) {
    throw ShapeError("sgd_step: " + std::to_string(params.size()) + " params, " +
                     std::to_string(grads.size()) + " grads, " +
                     std::to_string(state.velocity.size()) + " velocity slots");
  }
  const T mu = static_cast<T>(state.momentum);
  const T lr = static_cast<T>(state.learning_rate);
  const T wd = static_cast<T>(state.weight_decay);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor<T>& w = *params[i];
    const Tensor<T>& g = *grads[i];
    Tensor<T>& v = state.velocity[i];
    require_shape(g.shape(), w.shape(), "sgd gradient");
    require_shape(v.shape(), w.shape(), "sgd velocity");
    for (std::size_t j = 0; j < w.size(); ++j) {
      v[j] = mu * v[j] - lr * (g[j] + wd * w[j]);
      w[j] += v[j];
    }
  }
}

}  // namespace scaletrain
