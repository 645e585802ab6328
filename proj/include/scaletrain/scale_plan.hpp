#pragma once

#include <string>
#include <variant>
#include <vector>

#include "scaletrain/architecture.hpp"

namespace scaletrain {

/// Scale entry for one conv layer of the target architecture.
struct ConvScale {
  std::size_t layer_index = 0;  // position in the architecture layer list
  std::size_t k_target = 1;
  std::size_t k_pretrain = 1;
  Padding target_pad{};
  Padding pretrain_pad{};  // signed; negative entries crop

  double s() const { return static_cast<double>(k_target) / static_cast<double>(k_pretrain); }
  friend bool operator==(const ConvScale&, const ConvScale&) = default;
};

/// How a target architecture maps onto its reduced-resolution counterpart.
struct ScalePlan {
  InputSpec target_input{};
  InputSpec pretrain_input{};
  std::vector<ConvScale> convs;

  /// Every conv kept as-is and the input unchanged.
  static ScalePlan unit(const ArchitectureSpec& arch) {
    ScalePlan plan{arch.input, arch.input, {}};
    for (auto i : conv_layer_indices(arch)) {
      const auto& c = std::get<ConvSpec>(arch.layers[i]);
      plan.convs.push_back({i, c.kernel, c.kernel, c.pad, c.pad});
    }
    return plan;
  }

  bool is_identity() const {
    if (!(target_input == pretrain_input)) return false;
    for (const auto& c : convs) {
      if (c.k_target != c.k_pretrain || !(c.target_pad == c.pretrain_pad)) return false;
    }
    return true;
  }

  friend bool operator==(const ScalePlan&, const ScalePlan&) = default;
};

/// The pre-train architecture a plan describes for `target`.
inline ArchitectureSpec apply_plan(const ArchitectureSpec& target, const ScalePlan& plan,
                                   const std::string& name_suffix = "-pretrain") {
  const auto convs = conv_layer_indices(target);
  if (convs.size() != plan.convs.size()) {
    throw ArchitectureMismatchError("plan covers " + std::to_string(plan.convs.size()) +
                                    " conv layers but architecture has " +
                                    std::to_string(convs.size()));
  }
  ArchitectureSpec out = target;
  if (!plan.is_identity()) out.name = target.name + name_suffix;
  out.input = plan.pretrain_input;
  for (std::size_t i = 0; i < convs.size(); ++i) {
    const auto& entry = plan.convs[i];
    if (entry.layer_index != convs[i]) {
      throw ArchitectureMismatchError("plan entry " + std::to_string(i + 1) + " names layer " +
                                      std::to_string(entry.layer_index + 1) + " but conv is layer " +
                                      std::to_string(convs[i] + 1));
    }
    auto& c = std::get<ConvSpec>(out.layers[convs[i]]);
    if (c.kernel != entry.k_target) {
      throw ArchitectureMismatchError(layer_label(target, convs[i]) + " has kernel " +
                                      std::to_string(c.kernel) + ", plan expects " +
                                      std::to_string(entry.k_target));
    }
    c.kernel = entry.k_pretrain;
    c.pad = entry.pretrain_pad;
  }
  return out;
}

}  // namespace scaletrain
