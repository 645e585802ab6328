#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>

#include "scaletrain/random.hpp"
#include "scaletrain/tensor.hpp"

namespace scaletrain::testing {

inline Tensor<double> random_tensor(const Shape& shape, Rng& rng, double lo = -1, double hi = 1) {
  Tensor<double> t(shape);
  for (auto& v : t.values()) v = rng.uniform(lo, hi);
  return t;
}

/// Central difference of `loss` w.r.t. every element of `x`.
inline Tensor<double> numeric_gradient(Tensor<double>& x, const std::function<double()>& loss, double step = 1e-5) {
  Tensor<double> g(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + step;
    const double up = loss();
    x[i] = saved - step;
    const double down = loss();
    x[i] = saved;
    g[i] = (up - down) / (2 * step);
  }
  return g;
}

/// max |a - b| / max(floor, |a|, |b|) elementwise.
inline double max_relative_error(const Tensor<double>& a, const Tensor<double>& b, double floor = 1e-6) {
  double worst = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double scale = std::max({floor, std::abs(a[i]), std::abs(b[i])});
    worst = std::max(worst, std::abs(a[i] - b[i]) / scale);
  }
  return worst;
}

/// sum(w * y): a loss whose gradient w.r.t. y is w.
inline double weighted_sum(const Tensor<double>& y, const Tensor<double>& w) {
  double s = 0;
  for (std::size_t i = 0; i < y.size(); ++i) s += y[i] * w[i];
  return s;
}

}  // namespace scaletrain::testing
