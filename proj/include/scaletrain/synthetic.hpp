#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>

#include "scaletrain/dataset.hpp"
#include "scaletrain/random.hpp"

namespace scaletrain {

/// Ten-class 32x32 RGB images. Class c = 2g + t: g picks one of five
/// coarse shapes, t picks the orientation of a fine one-pixel grating.
/// Position, size, colour and grating phase are random; pixel noise is iid.
struct SyntheticSpec {
  std::size_t train = 10000;
  std::size_t test = 2000;
  std::uint64_t seed = 1;
  double shape_contrast = 0.25;
  double grating_amplitude = 0.08;
  double noise = 0.06;
};

namespace detail {

inline float shape_mask(std::size_t group, double y, double x, double cy, double cx, double r) {
  const double dy = y - cy, dx = x - cx;
  switch (group) {
    case 0: return dy * dy + dx * dx <= r * r ? 1.f : 0.f;                      // disk
    case 1: return std::abs(dy) <= r * 0.8 && std::abs(dx) <= r * 0.8 ? 1.f : 0.f;  // square
    case 2: return std::abs(dy) <= r * 0.35 && std::abs(dx) <= r * 1.3 ? 1.f : 0.f;  // horizontal bar
    case 3: return std::abs(dx) <= r * 0.35 && std::abs(dy) <= r * 1.3 ? 1.f : 0.f;  // vertical bar
    default: {
      const double d = std::sqrt(dy * dy + dx * dx);                             // ring
      return d <= r && d >= r * 0.55 ? 1.f : 0.f;
    }
  }
}

inline void render_synthetic(float* img, int label, const SyntheticSpec& spec, Rng& rng) {
  constexpr std::size_t side = kCifarSide, plane = side * side;
  const std::size_t group = static_cast<std::size_t>(label) / 2;
  const bool vertical = label % 2 == 1;
  const double cy = 15.5 + rng.uniform(-4, 4), cx = 15.5 + rng.uniform(-4, 4);
  const double r = rng.uniform(6, 9);
  const int phase = static_cast<int>(rng.below(2));
  double base[3], tint[3], grad_y[3], grad_x[3];
  for (int c = 0; c < 3; ++c) {
    base[c] = rng.uniform(0.35, 0.65);
    tint[c] = rng.uniform(-1, 1) * spec.shape_contrast;
    grad_y[c] = rng.uniform(-0.1, 0.1);
    grad_x[c] = rng.uniform(-0.1, 0.1);
  }
  for (std::size_t y = 0; y < side; ++y) {
    for (std::size_t x = 0; x < side; ++x) {
      const float m = shape_mask(group, static_cast<double>(y), static_cast<double>(x), cy, cx, r);
      const int stripe = static_cast<int>(vertical ? x : y) + phase;
      const double grating = (stripe % 2 == 0 ? 1.0 : -1.0) * spec.grating_amplitude;
      for (int c = 0; c < 3; ++c) {
        const double v = base[c] + grad_y[c] * (static_cast<double>(y) / 31.0 - 0.5) +
                         grad_x[c] * (static_cast<double>(x) / 31.0 - 0.5) + m * tint[c] + grating +
                         spec.noise * rng.normal();
        img[c * plane + y * side + x] = static_cast<float>(std::clamp(v, 0.0, 1.0));
      }
    }
  }
}

inline unsigned char to_byte(float v) {
  return static_cast<unsigned char>(std::lround(std::clamp(v, 0.f, 1.f) * 255.f));
}

}  // namespace detail

/// Balanced labels in shuffled order; pixel values quantized to k/255.
inline Dataset make_synthetic(std::size_t count, Split split, const SyntheticSpec& spec, Rng& rng) {
  if (count == 0) throw UsageError("synthetic dataset needs at least one record");
  Dataset d{Tensor<float>({count, 3, kCifarSide, kCifarSide}), std::vector<int>(count), split, 10};
  for (std::size_t i = 0; i < count; ++i) d.labels[i] = static_cast<int>(i % 10);
  shuffle(d.labels.begin(), d.labels.end(), rng);
  const std::size_t per = 3 * kCifarSide * kCifarSide;
  for (std::size_t i = 0; i < count; ++i) {
    float* img = d.images.raw() + i * per;
    detail::render_synthetic(img, d.labels[i], spec, rng);
    for (std::size_t j = 0; j < per; ++j) img[j] = static_cast<float>(detail::to_byte(img[j])) / 255.0f;
  }
  return d;
}

inline void write_cifar_binary(const Dataset& data, const std::string& path) {
  data.validate();
  if (data.images.dim(1) != 3 || data.images.dim(2) != kCifarSide || data.images.dim(3) != kCifarSide) {
    throw ShapeError("cifar-binary records are 3x32x32, got " + shape_string(data.images.shape()));
  }
  std::string bytes(data.size() * kCifarRecord, '\0');
  for (std::size_t r = 0; r < data.size(); ++r) {
    bytes[r * kCifarRecord] = static_cast<char>(data.labels[r]);
    const float* src = data.images.raw() + r * (kCifarRecord - 1);
    for (std::size_t i = 0; i + 1 < kCifarRecord; ++i) {
      bytes[r * kCifarRecord + 1 + i] = static_cast<char>(detail::to_byte(src[i]));
    }
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for '" + path + "'");
}

/// Writes data_batch_1.bin and test_batch.bin under `dir`.
inline void write_synthetic_cifar(const std::string& dir, const SyntheticSpec& spec) {
  std::filesystem::create_directories(dir);
  Rng rng(spec.seed);
  write_cifar_binary(make_synthetic(spec.train, Split::Train, spec, rng),
                     (std::filesystem::path(dir) / "data_batch_1.bin").string());
  write_cifar_binary(make_synthetic(spec.test, Split::Test, spec, rng),
                     (std::filesystem::path(dir) / "test_batch.bin").string());
}

}  // namespace scaletrain
