#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "scaletrain/architecture.hpp"
#include "scaletrain/checkpoint.hpp"
#include "scaletrain/cost_model.hpp"
#include "scaletrain/resample.hpp"
#include "scaletrain/scale_plan.hpp"

namespace scaletrain {

// ------------------------------------------------------------- derivation

struct PretrainDerivation {
  ArchitectureSpec pretrain;
  ScalePlan plan;
};

/// Integer side in [1, side] whose ratio side/candidate is closest to s;
/// ties go to the larger candidate.
inline std::size_t closest_scaled_side(std::size_t side, double s) {
  std::size_t best = side;
  double best_err = std::numeric_limits<double>::infinity();
  for (std::size_t cand = side; cand >= 1; --cand) {
    const double err = std::abs(static_cast<double>(side) / static_cast<double>(cand) - s);
    if (err < best_err) {
      best_err = err;
      best = cand;
    }
  }
  return best;
}

namespace detail {

// Signed (before, after) adjustment moving `have` to `want`; odd counts put
// the extra row/column after (bottom/right), for padding and cropping alike.
inline std::pair<int, int> split_adjustment(long long have, long long want) {
  const long long delta = want - have;
  const long long mag = delta < 0 ? -delta : delta;
  const long long first = mag / 2, second = mag - mag / 2;
  if (delta >= 0) return {static_cast<int>(first), static_cast<int>(second)};
  return {static_cast<int>(-first), static_cast<int>(-second)};
}

inline long long nearest_integer(double x) { return static_cast<long long>(std::floor(x + 0.5)); }

}  // namespace detail

/// Reduced-resolution counterpart of `target`: conv kernels follow
/// suggest_pretrain_kernel, the input side best approximates the first
/// layer's scale, and each conv layer pads or crops its incoming map so
/// its padded side is the nearest integer to (target padded side)/s_l.
inline PretrainDerivation derive_pretrain_architecture(const ArchitectureSpec& target) {
  validate(target);
  const auto target_ext = infer_extents(target);
  ScalePlan plan;
  plan.target_input = target.input;

  double s1 = 1.0;
  for (const auto& layer : target.layers) {
    if (const auto* c = std::get_if<ConvSpec>(&layer)) {
      s1 = suggest_pretrain_kernel(static_cast<long long>(c->kernel)).s();
      break;
    }
  }
  plan.pretrain_input = {target.input.channels, closest_scaled_side(target.input.height, s1),
                         closest_scaled_side(target.input.width, s1)};

  ArchitectureSpec pre = target;
  pre.name = target.name + "-pretrain";
  pre.input = plan.pretrain_input;
  FeatureExtent cur{pre.input.channels, pre.input.height, pre.input.width, false};

  for (std::size_t i = 0; i < target.layers.size(); ++i) {
    const std::string where = layer_label(target, i);
    if (const auto* tc = std::get_if<ConvSpec>(&target.layers[i])) {
      if (tc->kernel % 2 == 0) throw DomainError(where + ": kernel side must be odd");
      const auto conv = suggest_pretrain_kernel(static_cast<long long>(tc->kernel));
      const double s = conv.s();
      const auto& tin = target_ext[i];
      const long long want_h = detail::nearest_integer(
          static_cast<double>(static_cast<long long>(tin.height) + tc->pad.top + tc->pad.bottom) / s);
      const long long want_w = detail::nearest_integer(
          static_cast<double>(static_cast<long long>(tin.width) + tc->pad.left + tc->pad.right) / s);
      const auto [top, bottom] = detail::split_adjustment(static_cast<long long>(cur.height), want_h);
      const auto [left, right] = detail::split_adjustment(static_cast<long long>(cur.width), want_w);
      const Padding pad{top, left, bottom, right};
      const auto k = static_cast<long long>(conv.k_pretrain);
      const auto oh = window_output_extent(static_cast<long long>(cur.height), pad.top, pad.bottom, k, tc->stride);
      const auto ow = window_output_extent(static_cast<long long>(cur.width), pad.left, pad.right, k, tc->stride);
      if (want_h < k || want_w < k || oh < 1 || ow < 1) {
        throw UnsatisfiablePlanError(where + ": pre-train feature map " + std::to_string(cur.height) +
                                     "x" + std::to_string(cur.width) + " cannot host a " +
                                     std::to_string(k) + "x" + std::to_string(k) + " kernel");
      }
      auto& pc = std::get<ConvSpec>(pre.layers[i]);
      pc.kernel = conv.k_pretrain;
      pc.pad = pad;
      plan.convs.push_back({i, tc->kernel, conv.k_pretrain, tc->pad, pad});
      cur = {tc->out_channels, static_cast<std::size_t>(oh), static_cast<std::size_t>(ow), false};
    } else if (const auto* p = std::get_if<MaxPoolSpec>(&target.layers[i])) {
      if (p->window > cur.height || p->window > cur.width) {
        throw UnsatisfiablePlanError(where + ": pre-train feature map " + std::to_string(cur.height) +
                                     "x" + std::to_string(cur.width) + " is smaller than pooling window " +
                                     std::to_string(p->window));
      }
      cur = {cur.channels, (cur.height - p->window) / p->stride + 1,
             (cur.width - p->window) / p->stride + 1, false};
    } else if (std::holds_alternative<FlattenSpec>(target.layers[i])) {
      break;
    }
  }
  try {
    validate(pre);
  } catch (const ShapeError& e) {
    throw UnsatisfiablePlanError(std::string("derived pre-train architecture invalid: ") + e.what());
  }
  return {std::move(pre), std::move(plan)};
}

// --------------------------------------------------------------- kernels

/// Gain on upscaled kernels and fc interface weights. Square multiplies by
/// the area ratio (s^2, or s_h*s_w at the fc interface). Preserving
/// divides by it, so each layer keeps its response to an upsampled input.
enum class AmplitudeRule { Square, Preserving };

inline AmplitudeRule parse_amplitude_rule(const std::string& s) {
  if (s == "square") return AmplitudeRule::Square;
  if (s == "preserving") return AmplitudeRule::Preserving;
  throw UsageError("unknown amplitude rule '" + s + "' (expected square or preserving)");
}

inline const char* amplitude_rule_name(AmplitudeRule r) {
  return r == AmplitudeRule::Square ? "square" : "preserving";
}

inline double amplitude_gain(double area_ratio, AmplitudeRule rule) {
  return rule == AmplitudeRule::Square ? area_ratio : 1.0 / area_ratio;
}

/// Bilinear upscale of a square (k~, k~) kernel to (k, k), every value
/// then multiplied by s^2 (Square) or 1/s^2 (Preserving), s = k/k~.
template <typename T>
Tensor<T> upscale_kernel(const Tensor<T>& kernel, std::size_t k_target,
                         AmplitudeRule rule = AmplitudeRule::Square) {
  require_rank(kernel.shape(), 2, "kernel");
  const std::size_t k_src = kernel.dim(0);
  if (kernel.dim(1) != k_src) throw ShapeError("kernel must be square, got " + shape_string(kernel.shape()));
  if (k_target < k_src) {
    throw DomainError("cannot upscale a " + std::to_string(k_src) + "x" + std::to_string(k_src) +
                      " kernel to " + std::to_string(k_target) + "x" + std::to_string(k_target));
  }
  if (k_target == k_src) return kernel;
  const double s = static_cast<double>(k_target) / static_cast<double>(k_src);
  Tensor<T> out({k_target, k_target});
  resample_bilinear<T>(kernel.data(), k_src, k_src, out.data(), k_target, k_target);
  const T gain = static_cast<T>(amplitude_gain(s * s, rule));
  for (auto& v : out.values()) v *= gain;
  return out;
}

/// Every (C_out x C_in) slice upscaled independently; bias and stride kept,
/// padding replaced by the target's.
template <typename T>
ConvLayerParams<T> upscale_conv_layer(const ConvLayerParams<T>& params, std::size_t k_target,
                                      Padding target_pad, AmplitudeRule rule = AmplitudeRule::Square) {
  params.validate();
  const std::size_t co = params.out_channels(), ci = params.in_channels(), k = params.kernel_size();
  if (k_target < k) {
    throw DomainError("cannot upscale a " + std::to_string(k) + "x" + std::to_string(k) +
                      " conv layer to " + std::to_string(k_target) + "x" + std::to_string(k_target));
  }
  ConvLayerParams<T> out{Tensor<T>({co, ci, k_target, k_target}), params.bias, params.stride, target_pad};
  const std::size_t src_plane = k * k, dst_plane = k_target * k_target;
  for (std::size_t slice = 0; slice < co * ci; ++slice) {
    Tensor<T> kernel({k, k}, std::vector<T>(params.kernels.values().begin() + static_cast<std::ptrdiff_t>(slice * src_plane),
                                            params.kernels.values().begin() + static_cast<std::ptrdiff_t>((slice + 1) * src_plane)));
    const auto up = upscale_kernel(kernel, k_target, rule);
    std::copy(up.values().begin(), up.values().end(),
              out.kernels.values().begin() + static_cast<std::ptrdiff_t>(slice * dst_plane));
  }
  return out;
}

// ------------------------------------------------------ FC interface

struct FcInterfaceSpec {
  std::size_t channels = 1;
  std::size_t height = 1, width = 1;                    // target map entering flatten
  std::size_t pretrain_height = 1, pretrain_width = 1;  // pre-train counterpart
  std::size_t outputs = 1;

  std::size_t target_rows() const { return channels * height * width; }
  std::size_t pretrain_rows() const { return channels * pretrain_height * pretrain_width; }
};

/// Interface between the flatten layer and the first fc of each network.
inline FcInterfaceSpec fc_interface(const ArchitectureSpec& target, const ArchitectureSpec& pretrain) {
  const auto te = infer_extents(target);
  const auto pe = infer_extents(pretrain);
  for (std::size_t i = 0; i < target.layers.size(); ++i) {
    if (!std::holds_alternative<FlattenSpec>(target.layers[i])) continue;
    std::size_t outputs = 0;
    for (std::size_t j = i + 1; j < target.layers.size(); ++j) {
      if (const auto* f = std::get_if<FcSpec>(&target.layers[j])) {
        outputs = f->outputs;
        break;
      }
    }
    if (te[i].channels != pe[i].channels) {
      throw ArchitectureMismatchError("channel count entering flatten differs between networks");
    }
    return {te[i].channels, te[i].height, te[i].width, pe[i].height, pe[i].width, outputs};
  }
  throw ArchitectureMismatchError("architecture has no flatten layer");
}

/// Each column reshaped to (C, H~, W~), bilinearly upscaled per channel to
/// (H, W) with gain s_h*s_w (or its inverse under Preserving), and
/// vectorized back in the flatten order.
template <typename T>
Tensor<T> upscale_fc_interface(const Tensor<T>& weights, const FcInterfaceSpec& spec,
                               AmplitudeRule rule = AmplitudeRule::Square) {
  require_rank(weights.shape(), 2, "fc weights");
  if (weights.dim(0) != spec.pretrain_rows() || weights.dim(1) != spec.outputs) {
    throw ShapeError("fc weights " + shape_string(weights.shape()) + " do not match interface (" +
                     std::to_string(spec.pretrain_rows()) + ", " + std::to_string(spec.outputs) + ")");
  }
  if (spec.height < spec.pretrain_height || spec.width < spec.pretrain_width) {
    throw DomainError("fc interface would shrink the feature map");
  }
  if (spec.height == spec.pretrain_height && spec.width == spec.pretrain_width) return weights;
  const double gain = amplitude_gain(
      (static_cast<double>(spec.height) / static_cast<double>(spec.pretrain_height)) *
          (static_cast<double>(spec.width) / static_cast<double>(spec.pretrain_width)),
      rule);
  const std::size_t n_out = spec.outputs;
  const std::size_t src_plane = spec.pretrain_height * spec.pretrain_width;
  const std::size_t dst_plane = spec.height * spec.width;
  Tensor<T> out({spec.target_rows(), n_out});
  std::vector<T> src(src_plane), dst(dst_plane);
  for (std::size_t col = 0; col < n_out; ++col) {
    for (std::size_t c = 0; c < spec.channels; ++c) {
      for (std::size_t p = 0; p < src_plane; ++p) src[p] = weights[(c * src_plane + p) * n_out + col];
      resample_bilinear<T>(src, spec.pretrain_height, spec.pretrain_width, dst, spec.height, spec.width);
      for (std::size_t p = 0; p < dst_plane; ++p) {
        out[(c * dst_plane + p) * n_out + col] = static_cast<T>(dst[p] * static_cast<T>(gain));
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------- images

/// Per-channel corner-aligned bilinear downsample of a (N, C, H, W) batch;
/// no amplitude change.
template <typename T>
Tensor<T> downscale_image(const Tensor<T>& images, std::size_t height, std::size_t width) {
  require_rank(images.shape(), 4, "image batch");
  const std::size_t h = images.dim(2), w = images.dim(3);
  if (height > h || width > w) {
    throw DomainError("downscale_image cannot upscale " + std::to_string(h) + "x" + std::to_string(w) +
                      " to " + std::to_string(height) + "x" + std::to_string(width));
  }
  if (height == 0 || width == 0) throw DomainError("target resolution must be positive");
  if (height == h && width == w) return images;
  const std::size_t planes = images.dim(0) * images.dim(1);
  Tensor<T> out({images.dim(0), images.dim(1), height, width});
  for (std::size_t p = 0; p < planes; ++p) {
    resample_bilinear<T>(images.data().subspan(p * h * w, h * w), h, w,
                         out.data().subspan(p * height * width, height * width), height, width);
  }
  return out;
}

// ------------------------------------------------------------ checkpoints

namespace detail {
inline bool same_structure(ArchitectureSpec a, ArchitectureSpec b) {
  a.name.clear();
  b.name.clear();
  return a == b;
}
}  // namespace detail

/// Upscales a pre-train checkpoint onto `target`. Conv layers follow
/// upscale_conv_layer, the first fc after flatten follows
/// upscale_fc_interface, later fc layers are copied. Velocity is reset to
/// zero unless the plan is the identity. Epoch, RNG state, wall time and
/// schedule fingerprint carry over.
inline Checkpoint resize_checkpoint(const Checkpoint& pretrain_ckpt, const ArchitectureSpec& target,
                                    const ScalePlan& plan, AmplitudeRule rule = AmplitudeRule::Square) {
  const auto expected = apply_plan(target, plan);
  if (!detail::same_structure(expected, pretrain_ckpt.arch)) {
    throw ArchitectureMismatchError("checkpoint architecture '" + pretrain_ckpt.arch.name +
                                    "' is not the pre-train side of this plan");
  }
  const Network<float> pre = network_from_checkpoint(pretrain_ckpt);
  Network<float> out(target);

  for (const auto& entry : plan.convs) {
    out.conv(entry.layer_index) = upscale_conv_layer(pre.conv(entry.layer_index), entry.k_target, entry.target_pad, rule);
  }
  const auto iface = fc_interface(target, pretrain_ckpt.arch);
  bool first_fc = true;
  for (auto i : fc_layer_indices(target)) {
    if (first_fc) {
      out.fc(i).weights = upscale_fc_interface(pre.fc(i).weights, iface, rule);
      out.fc(i).bias = pre.fc(i).bias;
      first_fc = false;
    } else {
      out.fc(i) = pre.fc(i);
    }
  }

  std::vector<Tensor<float>> velocity;
  if (plan.is_identity()) velocity = velocity_from_checkpoint(pretrain_ckpt, pre);
  Checkpoint ck;
  ck.arch = target;
  ck.epoch = pretrain_ckpt.epoch;
  ck.wall_seconds = pretrain_ckpt.wall_seconds;
  ck.schedule_fingerprint = pretrain_ckpt.schedule_fingerprint;
  ck.rng_state = pretrain_ckpt.rng_state;
  const auto names = out.parameter_names();
  const auto params = out.parameters();
  for (std::size_t i = 0; i < names.size(); ++i) {
    ck.params.push_back({names[i], *params[i]});
    ck.velocity.push_back({names[i], velocity.empty() ? Tensor<float>(params[i]->shape()) : velocity[i]});
  }
  return ck;
}

}  // namespace scaletrain
