#pragma once

#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "scaletrain/architecture.hpp"
#include "scaletrain/conv.hpp"
#include "scaletrain/init.hpp"
#include "scaletrain/layers.hpp"

namespace scaletrain {

/// Name of a parameter slot, e.g. "layer3.kernels". Layer numbers are
/// 1-based positions in the architecture's layer list.
inline std::string param_name(std::size_t layer_index, const char* slot) {
  return "layer" + std::to_string(layer_index + 1) + "." + slot;
}

/// A plain feed-forward network instantiated from an ArchitectureSpec.
template <typename T>
class Network {
 public:
  struct Cache {
    std::vector<Tensor<T>> inputs;  // input of every layer
    std::map<std::size_t, std::vector<std::size_t>> argmax;
  };

  /// All parameters zero.
  explicit Network(ArchitectureSpec arch) : arch_(std::move(arch)) {
    validate(arch_);
    const auto extents = infer_extents(arch_);
    for (std::size_t i = 0; i < arch_.layers.size(); ++i) {
      const auto& in = extents[i];
      if (const auto* c = std::get_if<ConvSpec>(&arch_.layers[i])) {
        ConvLayerParams<T> p{Tensor<T>({c->out_channels, in.channels, c->kernel, c->kernel}),
                             Tensor<T>({c->out_channels}), c->stride, c->pad};
        conv_.emplace(i, std::move(p));
      } else if (const auto* f = std::get_if<FcSpec>(&arch_.layers[i])) {
        fc_.emplace(i, FcLayerParams<T>{Tensor<T>({in.size(), f->outputs}), Tensor<T>({f->outputs})});
      }
    }
  }

  /// Uniform init on [-1/sqrt(n), 1/sqrt(n)]; n is the layer's weight count
  /// or, under InitRule::FanIn, the inputs feeding one output unit. Biases
  /// use the same interval as their layer's weights.
  static Network initialized(ArchitectureSpec arch, Rng& rng, InitRule rule = InitRule::WeightCount) {
    Network net(std::move(arch));
    for (std::size_t i = 0; i < net.arch_.layers.size(); ++i) {
      if (auto it = net.conv_.find(i); it != net.conv_.end()) {
        init_layer(it->second.kernels, it->second.bias, rng, rule);
      } else if (auto jt = net.fc_.find(i); jt != net.fc_.end()) {
        init_layer(jt->second.weights, jt->second.bias, rng, rule);
      }
    }
    return net;
  }

  const ArchitectureSpec& architecture() const { return arch_; }

  ConvLayerParams<T>& conv(std::size_t layer_index) { return conv_.at(layer_index); }
  const ConvLayerParams<T>& conv(std::size_t layer_index) const { return conv_.at(layer_index); }
  FcLayerParams<T>& fc(std::size_t layer_index) { return fc_.at(layer_index); }
  const FcLayerParams<T>& fc(std::size_t layer_index) const { return fc_.at(layer_index); }

  /// Parameter tensors in layer order (kernels/weights before bias).
  std::vector<Tensor<T>*> parameters() {
    std::vector<Tensor<T>*> out;
    for (std::size_t i = 0; i < arch_.layers.size(); ++i) {
      if (auto it = conv_.find(i); it != conv_.end()) {
        out.push_back(&it->second.kernels);
        out.push_back(&it->second.bias);
      } else if (auto jt = fc_.find(i); jt != fc_.end()) {
        out.push_back(&jt->second.weights);
        out.push_back(&jt->second.bias);
      }
    }
    return out;
  }

  std::vector<const Tensor<T>*> parameters() const {
    auto mut = const_cast<Network*>(this)->parameters();
    return {mut.begin(), mut.end()};
  }

  std::vector<std::string> parameter_names() const {
    std::vector<std::string> names;
    for (std::size_t i = 0; i < arch_.layers.size(); ++i) {
      if (conv_.count(i)) {
        names.push_back(param_name(i, "kernels"));
        names.push_back(param_name(i, "bias"));
      } else if (fc_.count(i)) {
        names.push_back(param_name(i, "weights"));
        names.push_back(param_name(i, "bias"));
      }
    }
    return names;
  }

  /// Logits for a (N, C, H, W) batch. `cache` is filled when non-null.
  Tensor<T> forward(const Tensor<T>& batch, Cache* cache = nullptr,
                    ConvAlgorithm algorithm = ConvAlgorithm::Im2col) const {
    require_shape(Shape(batch.shape().begin() + 1, batch.shape().end()),
                  Shape{arch_.input.channels, arch_.input.height, arch_.input.width},
                  "network input");
    if (cache) {
      cache->inputs.clear();
      cache->argmax.clear();
    }
    Tensor<T> x = batch;
    for (std::size_t i = 0; i < arch_.layers.size(); ++i) {
      const auto& layer = arch_.layers[i];
      if (std::holds_alternative<SoftmaxSpec>(layer)) break;
      if (cache) cache->inputs.push_back(x);
      if (std::holds_alternative<ConvSpec>(layer)) {
        x = conv2d_forward(x, conv_.at(i), algorithm);
      } else if (const auto* p = std::get_if<MaxPoolSpec>(&layer)) {
        auto r = maxpool_forward(x, p->window, p->stride);
        if (cache) cache->argmax.emplace(i, std::move(r.argmax));
        x = std::move(r.output);
      } else if (std::holds_alternative<ReluSpec>(layer)) {
        x = relu_forward(x);
      } else if (std::holds_alternative<FlattenSpec>(layer)) {
        x = flatten_forward(x);
      } else if (std::holds_alternative<FcSpec>(layer)) {
        x = fc_forward(x, fc_.at(i));
      }
    }
    return x;
  }

  /// Gradients aligned with parameters(), given d(loss)/d(logits).
  std::vector<Tensor<T>> backward(const Cache& cache, const Tensor<T>& grad_logits) const {
    std::vector<Tensor<T>> grads_rev;
    Tensor<T> g = grad_logits;
    const std::size_t n_layers = cache.inputs.size();
    for (std::size_t r = n_layers; r-- > 0;) {
      const auto& layer = arch_.layers[r];
      const Tensor<T>& in = cache.inputs[r];
      if (std::holds_alternative<ConvSpec>(layer)) {
        auto cg = conv2d_backward(in, conv_.at(r), g);
        grads_rev.push_back(std::move(cg.bias));
        grads_rev.push_back(std::move(cg.kernels));
        if (r > 0) g = std::move(cg.input);
      } else if (std::holds_alternative<MaxPoolSpec>(layer)) {
        g = maxpool_backward<T>(in.shape(), cache.argmax.at(r), g);
      } else if (std::holds_alternative<ReluSpec>(layer)) {
        g = relu_backward(in, g);
      } else if (std::holds_alternative<FlattenSpec>(layer)) {
        g = flatten_backward(in.shape(), g);
      } else if (std::holds_alternative<FcSpec>(layer)) {
        auto fg = fc_backward(in, fc_.at(r), g);
        grads_rev.push_back(std::move(fg.bias));
        grads_rev.push_back(std::move(fg.weights));
        g = std::move(fg.input);
      }
    }
    return {std::make_move_iterator(grads_rev.rbegin()), std::make_move_iterator(grads_rev.rend())};
  }

 private:
  static void init_layer(Tensor<T>& weights, Tensor<T>& bias, Rng& rng, InitRule rule) {
    // conv kernels are (out, in, k, k); fc weights are (in, out)
    const std::size_t n = rule == InitRule::WeightCount ? weights.size()
                          : weights.rank() == 4        ? weights.size() / weights.dim(0)
                                                       : weights.dim(0);
    const double bound = 1.0 / std::sqrt(static_cast<double>(n));
    for (auto& v : weights.values()) v = static_cast<T>(rng.uniform(-bound, bound));
    for (auto& v : bias.values()) v = static_cast<T>(rng.uniform(-bound, bound));
  }

  ArchitectureSpec arch_;
  std::map<std::size_t, ConvLayerParams<T>> conv_;
  std::map<std::size_t, FcLayerParams<T>> fc_;
};

}  // namespace scaletrain
