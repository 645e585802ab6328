#pragma once

#include <cmath>
#include <cstdint>
#include <string>

#include "scaletrain/error.hpp"
#include "scaletrain/random.hpp"
#include "scaletrain/tensor.hpp"

namespace scaletrain {

enum class InitRule { WeightCount, FanIn };

inline InitRule parse_init_rule(const std::string& s) {
  if (s == "weight-count") return InitRule::WeightCount;
  if (s == "fan-in") return InitRule::FanIn;
  throw UsageError("unknown init rule '" + s + "' (expected weight-count or fan-in)");
}

inline const char* init_rule_name(InitRule r) { return r == InitRule::WeightCount ? "weight-count" : "fan-in"; }

/// I.i.d. uniform values on [-1/sqrt(n), 1/sqrt(n)], n = number of elements.
template <typename T>
Tensor<T> init_uniform(const Shape& shape, Rng& rng) {
  Tensor<T> t(shape);
  const double bound = 1.0 / std::sqrt(static_cast<double>(t.size()));
  for (auto& v : t.values()) v = static_cast<T>(rng.uniform(-bound, bound));
  return t;
}

template <typename T>
Tensor<T> init_uniform(const Shape& shape, std::uint64_t seed) {
  Rng rng(seed);
  return init_uniform<T>(shape, rng);
}

}  // namespace scaletrain
