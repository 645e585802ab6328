#pragma once

#include <charconv>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "scaletrain/conv.hpp"
#include "scaletrain/error.hpp"

namespace scaletrain {

struct ConvSpec {
  std::size_t out_channels = 1;
  std::size_t kernel = 1;
  int stride = 1;
  Padding pad{};
  friend bool operator==(const ConvSpec&, const ConvSpec&) = default;
};
struct MaxPoolSpec {
  std::size_t window = 2;
  std::size_t stride = 2;
  friend bool operator==(const MaxPoolSpec&, const MaxPoolSpec&) = default;
};
struct ReluSpec {
  friend bool operator==(const ReluSpec&, const ReluSpec&) = default;
};
struct FlattenSpec {
  friend bool operator==(const FlattenSpec&, const FlattenSpec&) = default;
};
struct FcSpec {
  std::size_t outputs = 1;
  friend bool operator==(const FcSpec&, const FcSpec&) = default;
};
struct SoftmaxSpec {
  friend bool operator==(const SoftmaxSpec&, const SoftmaxSpec&) = default;
};

using LayerSpec = std::variant<ConvSpec, MaxPoolSpec, ReluSpec, FlattenSpec, FcSpec, SoftmaxSpec>;

struct InputSpec {
  std::size_t channels = 1;
  std::size_t height = 1;
  std::size_t width = 1;
  friend bool operator==(const InputSpec&, const InputSpec&) = default;
};

/// Ordered layer list plus input resolution.
struct ArchitectureSpec {
  std::string name = "unnamed";
  InputSpec input{};
  std::vector<double> channel_mean;  // optional, subtracted after /255
  std::vector<LayerSpec> layers;

  friend bool operator==(const ArchitectureSpec&, const ArchitectureSpec&) = default;
};

/// Activation extent entering a layer: spatial (C, H, W) before flatten,
/// a feature vector (C = features, H = W = 1, flat = true) after.
struct FeatureExtent {
  std::size_t channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  bool flat = false;

  std::size_t size() const { return channels * height * width; }
  friend bool operator==(const FeatureExtent&, const FeatureExtent&) = default;
};

inline const char* layer_keyword(const LayerSpec& layer) {
  static constexpr const char* names[] = {"conv", "maxpool", "relu", "flatten", "fc", "softmax"};
  return names[layer.index()];
}

inline std::string layer_label(const ArchitectureSpec& arch, std::size_t index) {
  return "layer " + std::to_string(index + 1) + " (" + layer_keyword(arch.layers.at(index)) + ")";
}

/// Extent entering each layer, plus one trailing entry for the network output.
/// Throws ShapeError naming the first layer whose input would vanish.
inline std::vector<FeatureExtent> infer_extents(const ArchitectureSpec& arch) {
  std::vector<FeatureExtent> extents;
  FeatureExtent cur{arch.input.channels, arch.input.height, arch.input.width, false};
  if (cur.size() == 0) throw ShapeError("input extents must be positive");
  bool seen_flatten = false;
  for (std::size_t i = 0; i < arch.layers.size(); ++i) {
    extents.push_back(cur);
    const auto& layer = arch.layers[i];
    const std::string where = layer_label(arch, i);
    if (const auto* c = std::get_if<ConvSpec>(&layer)) {
      if (cur.flat) throw ShapeError(where + " follows flatten");
      if (c->kernel == 0 || c->out_channels == 0 || c->stride < 1) {
        throw ShapeError(where + " has non-positive parameters");
      }
      const auto k = static_cast<long long>(c->kernel);
      const auto oh = window_output_extent(static_cast<long long>(cur.height), c->pad.top,
                                           c->pad.bottom, k, c->stride);
      const auto ow = window_output_extent(static_cast<long long>(cur.width), c->pad.left,
                                           c->pad.right, k, c->stride);
      if (oh < 1 || ow < 1) {
        throw ShapeError(where + ": input " + std::to_string(cur.height) + "x" +
                         std::to_string(cur.width) + " vanishes under kernel " +
                         std::to_string(c->kernel));
      }
      cur = {c->out_channels, static_cast<std::size_t>(oh), static_cast<std::size_t>(ow), false};
    } else if (const auto* p = std::get_if<MaxPoolSpec>(&layer)) {
      if (cur.flat) throw ShapeError(where + " follows flatten");
      if (p->window == 0 || p->stride == 0) throw ShapeError(where + " has non-positive parameters");
      if (p->window > cur.height || p->window > cur.width) {
        throw ShapeError(where + ": window " + std::to_string(p->window) + " exceeds input " +
                         std::to_string(cur.height) + "x" + std::to_string(cur.width));
      }
      cur = {cur.channels, (cur.height - p->window) / p->stride + 1,
             (cur.width - p->window) / p->stride + 1, false};
    } else if (std::holds_alternative<FlattenSpec>(layer)) {
      if (seen_flatten) throw ShapeError(where + ": more than one flatten");
      seen_flatten = true;
      cur = {cur.size(), 1, 1, true};
    } else if (const auto* f = std::get_if<FcSpec>(&layer)) {
      if (!cur.flat) throw ShapeError(where + ": fc must follow flatten");
      if (f->outputs == 0) throw ShapeError(where + " has zero outputs");
      cur = {f->outputs, 1, 1, true};
    } else if (std::holds_alternative<SoftmaxSpec>(layer)) {
      if (i + 1 != arch.layers.size()) throw ShapeError(where + ": softmax must be last");
      if (!cur.flat) throw ShapeError(where + ": softmax needs a flat input");
    }
  }
  extents.push_back(cur);
  return extents;
}

inline void validate(const ArchitectureSpec& arch) {
  const auto extents = infer_extents(arch);
  bool has_fc = false, has_flatten = false;
  for (const auto& l : arch.layers) {
    has_fc |= std::holds_alternative<FcSpec>(l);
    has_flatten |= std::holds_alternative<FlattenSpec>(l);
  }
  if (!has_flatten || !has_fc) throw ShapeError("architecture needs a flatten followed by an fc layer");
  if (!arch.channel_mean.empty() && arch.channel_mean.size() != arch.input.channels) {
    throw ShapeError("mean has " + std::to_string(arch.channel_mean.size()) +
                     " values for " + std::to_string(arch.input.channels) + " channels");
  }
}

inline std::vector<std::size_t> conv_layer_indices(const ArchitectureSpec& arch) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < arch.layers.size(); ++i) {
    if (std::holds_alternative<ConvSpec>(arch.layers[i])) idx.push_back(i);
  }
  return idx;
}

inline std::vector<std::size_t> fc_layer_indices(const ArchitectureSpec& arch) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < arch.layers.size(); ++i) {
    if (std::holds_alternative<FcSpec>(arch.layers[i])) idx.push_back(i);
  }
  return idx;
}

// ------------------------------------------------------------ text format

namespace detail {

inline std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
    if (j > i) fields.push_back(line.substr(i, j - i));
    i = j;
  }
  return fields;
}

class LineParser {
 public:
  LineParser(std::size_t line_no, std::vector<std::string_view> fields)
      : line_(line_no), fields_(std::move(fields)) {}

  [[noreturn]] void fail(std::size_t field, const std::string& msg) const {
    throw ParseError("line " + std::to_string(line_) + ", field " + std::to_string(field + 1) +
                     " ('" + std::string(field < fields_.size() ? fields_[field] : "") +
                     "'): " + msg);
  }

  void expect_count(std::initializer_list<std::size_t> allowed, const char* usage) const {
    for (auto n : allowed) {
      if (fields_.size() == n) return;
    }
    throw ParseError("line " + std::to_string(line_) + ": '" + std::string(fields_[0]) +
                     "' takes " + usage + ", got " + std::to_string(fields_.size() - 1) +
                     " values");
  }

  template <typename Int>
  Int integer(std::size_t field, long long min_value, const char* what) const {
    long long v = 0;
    const auto s = fields_.at(field);
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) fail(field, std::string(what) + " must be an integer");
    if (v < min_value) fail(field, std::string(what) + " must be >= " + std::to_string(min_value));
    return static_cast<Int>(v);
  }

  double real(std::size_t field, const char* what) const {
    const std::string s(fields_.at(field));
    try {
      std::size_t used = 0;
      const double v = std::stod(s, &used);
      if (used != s.size()) fail(field, std::string(what) + " must be a number");
      return v;
    } catch (const std::logic_error&) {
      fail(field, std::string(what) + " must be a number");
    }
  }

  std::size_t size() const { return fields_.size(); }
  std::string_view operator[](std::size_t i) const { return fields_[i]; }
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
  std::vector<std::string_view> fields_;
};

}  // namespace detail

/// Parses the line-oriented architecture format:
///   name <id> | input C H W | mean m1..mC | conv C_out k stride pad
///   | conv C_out k stride top left bottom right | maxpool w s | relu
///   | flatten | fc n | softmax.   '#' starts a comment.
inline ArchitectureSpec parse_architecture(std::string_view text) {
  ArchitectureSpec arch;
  bool have_input = false;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t end = std::min(text.find('\n', pos), text.size());
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    auto fields = detail::split_fields(line);
    if (fields.empty()) {
      if (end == text.size()) break;
      continue;
    }
    detail::LineParser p(line_no, fields);
    const std::string_view kw = p[0];
    if (kw == "name") {
      p.expect_count({2}, "one identifier");
      arch.name = std::string(p[1]);
    } else if (kw == "input") {
      p.expect_count({4}, "C H W");
      if (have_input) p.fail(0, "duplicate input line");
      arch.input = {p.integer<std::size_t>(1, 1, "C"), p.integer<std::size_t>(2, 1, "H"),
                    p.integer<std::size_t>(3, 1, "W")};
      have_input = true;
    } else if (kw == "mean") {
      if (p.size() < 2) p.fail(0, "mean needs one value per channel");
      arch.channel_mean.clear();
      for (std::size_t i = 1; i < p.size(); ++i) arch.channel_mean.push_back(p.real(i, "mean"));
    } else if (kw == "conv") {
      p.expect_count({5, 8}, "C_out k stride pad, or C_out k stride top left bottom right");
      ConvSpec c;
      c.out_channels = p.integer<std::size_t>(1, 1, "C_out");
      c.kernel = p.integer<std::size_t>(2, 1, "k");
      c.stride = p.integer<int>(3, 1, "stride");
      if (p.size() == 5) {
        c.pad = Padding::uniform(p.integer<int>(4, 0, "pad"));
      } else {
        constexpr long long any = -(1LL << 30);
        c.pad = {p.integer<int>(4, any, "pad top"), p.integer<int>(5, any, "pad left"),
                 p.integer<int>(6, any, "pad bottom"), p.integer<int>(7, any, "pad right")};
      }
      arch.layers.emplace_back(c);
    } else if (kw == "maxpool") {
      p.expect_count({3}, "window stride");
      arch.layers.emplace_back(
          MaxPoolSpec{p.integer<std::size_t>(1, 1, "window"), p.integer<std::size_t>(2, 1, "stride")});
    } else if (kw == "relu") {
      p.expect_count({1}, "no values");
      arch.layers.emplace_back(ReluSpec{});
    } else if (kw == "flatten") {
      p.expect_count({1}, "no values");
      arch.layers.emplace_back(FlattenSpec{});
    } else if (kw == "fc") {
      p.expect_count({2}, "n");
      arch.layers.emplace_back(FcSpec{p.integer<std::size_t>(1, 1, "n")});
    } else if (kw == "softmax") {
      p.expect_count({1}, "no values");
      arch.layers.emplace_back(SoftmaxSpec{});
    } else {
      p.fail(0, "unknown layer keyword");
    }
    if (end == text.size()) break;
  }
  if (!have_input) throw ParseError("architecture has no 'input C H W' line");
  try {
    validate(arch);
  } catch (const ShapeError& e) {
    throw ParseError(std::string("invalid architecture: ") + e.what());
  }
  return arch;
}

inline std::string to_text(const ArchitectureSpec& arch) {
  std::ostringstream os;
  os << "name " << arch.name << '\n';
  os << "input " << arch.input.channels << ' ' << arch.input.height << ' ' << arch.input.width << '\n';
  if (!arch.channel_mean.empty()) {
    os << "mean";
    os.precision(17);
    for (double m : arch.channel_mean) os << ' ' << m;
    os << '\n';
  }
  for (const auto& layer : arch.layers) {
    std::visit(
        [&](const auto& l) {
          using L = std::decay_t<decltype(l)>;
          if constexpr (std::is_same_v<L, ConvSpec>) {
            os << "conv " << l.out_channels << ' ' << l.kernel << ' ' << l.stride;
            if (l.pad.symmetric() && l.pad.top >= 0) {
              os << ' ' << l.pad.top;
            } else {
              os << ' ' << l.pad.top << ' ' << l.pad.left << ' ' << l.pad.bottom << ' ' << l.pad.right;
            }
          } else if constexpr (std::is_same_v<L, MaxPoolSpec>) {
            os << "maxpool " << l.window << ' ' << l.stride;
          } else if constexpr (std::is_same_v<L, FcSpec>) {
            os << "fc " << l.outputs;
          } else {
            os << layer_keyword(LayerSpec{l});
          }
        },
        layer);
    os << '\n';
  }
  return os.str();
}

inline ArchitectureSpec load_architecture(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open architecture file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return parse_architecture(buf.str());
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what());
  }
}

inline void save_architecture(const ArchitectureSpec& arch, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write architecture file '" + path + "'");
  out << to_text(arch);
  if (!out) throw IoError("write failed for '" + path + "'");
}

}  // namespace scaletrain
