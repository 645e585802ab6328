#pragma once

#include <cstddef>
#include <span>

namespace scaletrain {

/// Corner-aligned bilinear resampling of one plane: destination sample i
/// reads the source at i*(src-1)/(dst-1), so first and last samples of
/// both grids coincide. A source extent of 1 replicates; a destination
/// extent of 1 reads the first source sample. Equal extents copy exactly.
template <typename T>
void resample_bilinear(std::span<const T> src, std::size_t src_h, std::size_t src_w,
                       std::span<T> dst, std::size_t dst_h, std::size_t dst_w) {
  struct Tap {
    std::size_t i0, i1;
    double frac;
  };
  auto tap = [](std::size_t i, std::size_t src_n, std::size_t dst_n) -> Tap {
    if (src_n == 1 || dst_n == 1) return {0, 0, 0.0};
    if (src_n == dst_n) return {i, i, 0.0};
    // Exact rational position i*(src_n-1)/(dst_n-1).
    const std::size_t num = i * (src_n - 1);
    const std::size_t den = dst_n - 1;
    const std::size_t i0 = num / den;
    const std::size_t rem = num % den;
    if (rem == 0) return {i0, i0, 0.0};
    return {i0, i0 + 1, static_cast<double>(rem) / static_cast<double>(den)};
  };
  for (std::size_t y = 0; y < dst_h; ++y) {
    const Tap ty = tap(y, src_h, dst_h);
    for (std::size_t x = 0; x < dst_w; ++x) {
      const Tap tx = tap(x, src_w, dst_w);
      const T v00 = src[ty.i0 * src_w + tx.i0];
      T value;
      if (ty.frac == 0.0 && tx.frac == 0.0) {
        value = v00;
      } else {
        const double v01 = src[ty.i0 * src_w + tx.i1];
        const double v10 = src[ty.i1 * src_w + tx.i0];
        const double v11 = src[ty.i1 * src_w + tx.i1];
        // a + (b - a) t keeps constant regions exact.
        const double top = static_cast<double>(v00) + (v01 - static_cast<double>(v00)) * tx.frac;
        const double bottom = v10 + (v11 - v10) * tx.frac;
        value = static_cast<T>(top + (bottom - top) * ty.frac);
      }
      dst[y * dst_w + x] = value;
    }
  }
}

}  // namespace scaletrain
