#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "scaletrain/architecture.hpp"
#include "scaletrain/error.hpp"
#include "scaletrain/scale_plan.hpp"

namespace scaletrain {

/// One conv layer as seen by the multiplication-count formula. `w`
/// defaults to `h` (square feature maps) when zero.
struct LayerCostQuery {
  double c_in = 1;
  double c_out = 1;
  double k = 1;
  double h = 1;
  double s = 1;
  double w = 0;
};

namespace detail {
inline void check_query(const LayerCostQuery& q) {
  const double w = q.w > 0 ? q.w : q.h;
  if (!(q.c_in >= 1 && q.c_out >= 1)) throw DomainError("channel counts must be >= 1");
  if (!(q.k >= 1)) throw DomainError("kernel side must be >= 1");
  if (!(q.h >= q.k && w >= q.k)) {
    throw DomainError("input side must be >= kernel side (h=" + std::to_string(q.h) +
                      ", k=" + std::to_string(q.k) + ")");
  }
  if (!(q.s >= 1)) throw DomainError("scale factor must be >= 1, got " + std::to_string(q.s));
}
}  // namespace detail

/// C_in * (k/s)^2 * (h/s - k/s + 1)^2 * C_out, evaluated with real k/s.
inline double multiplications(const LayerCostQuery& q) {
  detail::check_query(q);
  const double w = q.w > 0 ? q.w : q.h;
  const double ks = q.k / q.s;
  const double oh = q.h / q.s - ks + 1.0;
  const double ow = w / q.s - ks + 1.0;
  if (oh <= 0 || ow <= 0) throw DomainError("scaled output side is not positive");
  return q.c_in * ks * ks * oh * ow * q.c_out;
}

struct ReductionBounds {
  double lower;  // M(l,1)/s^4, exclusive
  double upper;  // M(l,1)/s^2, inclusive
};

inline ReductionBounds reduction_bounds(const LayerCostQuery& q) {
  if (!(q.s > 1)) throw DomainError("reduction bounds need s > 1, got " + std::to_string(q.s));
  LayerCostQuery unit = q;
  unit.s = 1;
  const double m1 = multiplications(unit);
  const double s2 = q.s * q.s;
  return {m1 / (s2 * s2), m1 / s2};
}

struct KernelConversion {
  std::size_t k_pretrain;
  std::size_t numerator;    // s = numerator / denominator
  std::size_t denominator;
  double s() const { return static_cast<double>(numerator) / static_cast<double>(denominator); }
};

/// Largest scale factor the conversion table reaches.
inline constexpr double kMaxKernelScale = 1.7;

/// Pre-train kernel side for an odd target side: 1->1, 3->2, 5->3, 7->5,
/// 11->7, and for other odd sides the smallest side whose ratio stays
/// within kMaxKernelScale.
inline KernelConversion suggest_pretrain_kernel(long long k_target) {
  if (k_target <= 0) throw DomainError("kernel side must be positive, got " + std::to_string(k_target));
  if (k_target % 2 == 0) throw DomainError("kernel side must be odd, got " + std::to_string(k_target));
  static constexpr std::array<std::array<std::size_t, 2>, 5> table{
      {{1, 1}, {3, 2}, {5, 3}, {7, 5}, {11, 7}}};
  const auto kt = static_cast<std::size_t>(k_target);
  for (const auto& row : table) {
    if (row[0] == kt) return {row[1], kt, row[1]};
  }
  for (std::size_t kp = 1; kp <= kt; ++kp) {
    if (static_cast<double>(kt) / static_cast<double>(kp) <= kMaxKernelScale) return {kp, kt, kp};
  }
  return {kt, kt, kt};
}

// ------------------------------------------------------ network aggregation

struct LayerCost {
  std::size_t layer_index = 0;
  std::size_t c_in = 0, c_out = 0;
  std::size_t k_target = 0, k_pretrain = 0;
  std::size_t h = 0, w = 0;  // target input side
  double s = 1;
  double mults_target = 0;    // analytic, s = 1
  double mults_pretrain = 0;  // analytic, s = s_l
  ReductionBounds bounds{};   // degenerate (both = mults_target) when s = 1
  std::uint64_t realized_target = 0;    // integer sizes incl. stride/pad
  std::uint64_t realized_pretrain = 0;
};

struct NetworkCost {
  std::vector<LayerCost> layers;
  double total_target = 0;
  double total_pretrain = 0;
  std::uint64_t realized_total_target = 0;
  std::uint64_t realized_total_pretrain = 0;
  double s2_aggregate_bound = 1;  // sum M / sum(M/s^2)
  double s4_aggregate_bound = 1;  // sum M / sum(M/s^4)

  /// Predicted convolution-multiplication speedup (analytic).
  double speedup() const { return total_target / total_pretrain; }
  double realized_speedup() const {
    return static_cast<double>(realized_total_target) / static_cast<double>(realized_total_pretrain);
  }
};

/// Multiplications a direct convolution performs with integer geometry:
/// C_in * k^2 * out_h * out_w * C_out.
inline std::uint64_t realized_multiplications(std::size_t c_in, std::size_t c_out, std::size_t k,
                                              std::size_t out_h, std::size_t out_w) {
  return static_cast<std::uint64_t>(c_in) * k * k * out_h * out_w * c_out;
}

inline NetworkCost network_cost(const ArchitectureSpec& target, const ScalePlan& plan) {
  const auto pretrain = apply_plan(target, plan);
  const auto target_ext = infer_extents(target);
  const auto pre_ext = infer_extents(pretrain);
  NetworkCost cost;
  double sum_s2 = 0, sum_s4 = 0;
  for (const auto& entry : plan.convs) {
    const auto i = entry.layer_index;
    const auto& tc = std::get<ConvSpec>(target.layers[i]);
    const auto& in = target_ext[i];
    LayerCost lc;
    lc.layer_index = i;
    lc.c_in = in.channels;
    lc.c_out = tc.out_channels;
    lc.k_target = entry.k_target;
    lc.k_pretrain = entry.k_pretrain;
    lc.h = in.height;
    lc.w = in.width;
    lc.s = entry.s();
    const LayerCostQuery q{static_cast<double>(lc.c_in), static_cast<double>(lc.c_out),
                           static_cast<double>(lc.k_target), static_cast<double>(lc.h), lc.s,
                           static_cast<double>(lc.w)};
    LayerCostQuery q1 = q;
    q1.s = 1;
    lc.mults_target = multiplications(q1);
    lc.mults_pretrain = multiplications(q);
    lc.bounds = lc.s > 1 ? reduction_bounds(q) : ReductionBounds{lc.mults_target, lc.mults_target};
    const auto& out_t = target_ext[i + 1];
    const auto& out_p = pre_ext[i + 1];
    lc.realized_target = realized_multiplications(lc.c_in, lc.c_out, lc.k_target, out_t.height, out_t.width);
    lc.realized_pretrain = realized_multiplications(pre_ext[i].channels, lc.c_out, lc.k_pretrain,
                                                    out_p.height, out_p.width);
    cost.total_target += lc.mults_target;
    cost.total_pretrain += lc.mults_pretrain;
    cost.realized_total_target += lc.realized_target;
    cost.realized_total_pretrain += lc.realized_pretrain;
    const double s2 = lc.s * lc.s;
    sum_s2 += lc.mults_target / s2;
    sum_s4 += lc.mults_target / (s2 * s2);
    cost.layers.push_back(lc);
  }
  if (cost.layers.empty()) throw DomainError("architecture has no conv layers to cost");
  cost.s2_aggregate_bound = cost.total_target / sum_s2;
  cost.s4_aggregate_bound = cost.total_target / sum_s4;
  return cost;
}

inline NetworkCost network_cost(const ArchitectureSpec& target) {
  return network_cost(target, ScalePlan::unit(target));
}

}  // namespace scaletrain
