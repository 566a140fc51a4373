#pragma once

#include <array>
#include <cstddef>
#include <string>

#include "extremeforge/error.hpp"
#include "extremeforge/image.hpp"

namespace extremeforge {

inline constexpr std::size_t kDetailLevels = 3;
inline constexpr std::size_t kPyramidLevels = kDetailLevels + 1;
inline constexpr std::size_t kMinStylizeSide = 8;

using ChannelPlanes = std::array<Plane, ImageBuffer::kChannels>;

// Laplacian pyramid: levels[0..2] are band-pass details from fine to coarse,
// levels[3] is the coarsest Gaussian level (the base).
struct FeaturePyramid {
  std::array<ChannelPlanes, kPyramidLevels> levels;
  std::size_t width = 0;
  std::size_t height = 0;

  ChannelPlanes& detail(std::size_t l) { return levels[l]; }
  const ChannelPlanes& detail(std::size_t l) const { return levels[l]; }
  ChannelPlanes& base() { return levels[kDetailLevels]; }
  const ChannelPlanes& base() const { return levels[kDetailLevels]; }

  friend bool operator==(const FeaturePyramid&, const FeaturePyramid&) = default;
};

namespace kernel {

inline std::size_t half_up(std::size_t n) noexcept { return (n + 1) / 2; }

// Reflect-101 (mirror without repeating the edge sample).
inline std::size_t reflect101(std::ptrdiff_t i, std::size_t n) noexcept {
  if (n == 1) return 0;
  const auto period = static_cast<std::ptrdiff_t>(2 * (n - 1));
  i %= period;
  if (i < 0) i += period;
  if (i >= static_cast<std::ptrdiff_t>(n)) i = period - i;
  return static_cast<std::size_t>(i);
}

// Binomial taps [1,4,6,4,1], applied as integers and scaled once.
inline constexpr std::array<double, 5> kTaps = {1.0, 4.0, 6.0, 4.0, 1.0};

// Blur along x keeping even columns, then along y keeping even rows.
inline Plane reduce(const Plane& src) {
  const std::size_t w = src.width(), h = src.height();
  const std::size_t ow = half_up(w), oh = half_up(h);
  Plane tmp(ow, h);
  for (std::size_t y = 0; y < h; ++y) {
    auto in = src.row(y);
    auto out = tmp.row(y);
    for (std::size_t ox = 0; ox < ow; ++ox) {
      const auto x = static_cast<std::ptrdiff_t>(2 * ox);
      double acc = 0.0;
      for (std::ptrdiff_t k = -2; k <= 2; ++k) acc += kTaps[k + 2] * in[reflect101(x + k, w)];
      out[ox] = acc * (1.0 / 16.0);
    }
  }
  Plane dst(ow, oh);
  for (std::size_t oy = 0; oy < oh; ++oy) {
    const auto y = static_cast<std::ptrdiff_t>(2 * oy);
    std::array<std::span<const double>, 5> rows;
    for (std::ptrdiff_t k = -2; k <= 2; ++k) rows[k + 2] = tmp.row(reflect101(y + k, h));
    auto out = dst.row(oy);
    for (std::size_t x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (std::size_t k = 0; k < 5; ++k) acc += kTaps[k] * rows[k][x];
      out[x] = acc * (1.0 / 16.0);
    }
  }
  return dst;
}

// Zero-insertion to (w, h) followed by the same kernel scaled by 2 per axis.
// Only even positions of the inserted signal are non-zero, so each output
// sample reads the coarse plane directly.
inline Plane expand(const Plane& coarse, std::size_t w, std::size_t h) {
  const std::size_t cw = coarse.width(), ch = coarse.height();
  Plane tmp(w, ch);
  for (std::size_t y = 0; y < ch; ++y) {
    auto in = coarse.row(y);
    auto out = tmp.row(y);
    for (std::size_t x = 0; x < w; ++x) {
      double acc = 0.0;
      for (std::ptrdiff_t k = -2; k <= 2; ++k) {
        const std::size_t j = reflect101(static_cast<std::ptrdiff_t>(x) + k, w);
        if (j % 2 == 0 && j / 2 < cw) acc += kTaps[k + 2] * in[j / 2];
      }
      out[x] = acc * (1.0 / 8.0);
    }
  }
  Plane dst(w, h);
  for (std::size_t y = 0; y < h; ++y) {
    auto out = dst.row(y);
    for (std::ptrdiff_t k = -2; k <= 2; ++k) {
      const std::size_t j = reflect101(static_cast<std::ptrdiff_t>(y) + k, h);
      if (j % 2 != 0 || j / 2 >= ch) continue;
      auto in = tmp.row(j / 2);
      const double tap = kTaps[k + 2] * (1.0 / 8.0);
      for (std::size_t x = 0; x < w; ++x) out[x] += tap * in[x];
    }
  }
  return dst;
}

}  // namespace kernel

inline FeaturePyramid encode_pyramid(const ImageBuffer& img) {
  if (img.width() < kMinStylizeSide || img.height() < kMinStylizeSide) {
    throw Error(ErrorCode::ImageTooSmall,
                std::to_string(img.width()) + "x" + std::to_string(img.height()) +
                    " is below the 8x8 minimum");
  }
  FeaturePyramid pyr;
  pyr.width = img.width();
  pyr.height = img.height();
  for (std::size_t c = 0; c < ImageBuffer::kChannels; ++c) {
    Plane current = img.channel(c);
    for (std::size_t l = 0; l < kDetailLevels; ++l) {
      Plane next = kernel::reduce(current);
      Plane up = kernel::expand(next, current.width(), current.height());
      auto cur = current.values();
      auto u = up.values();
      for (std::size_t i = 0; i < cur.size(); ++i) cur[i] -= u[i];
      pyr.levels[l][c] = std::move(current);
      current = std::move(next);
    }
    pyr.base()[c] = std::move(current);
  }
  return pyr;
}

inline void check_pyramid_shape(const FeaturePyramid& pyr) {
  std::size_t w = pyr.width, h = pyr.height;
  for (std::size_t l = 0; l < kPyramidLevels; ++l) {
    for (const auto& plane : pyr.levels[l]) {
      if (plane.width() != w || plane.height() != h) {
        throw Error(ErrorCode::ShapeMismatch, "pyramid level " + std::to_string(l) +
                                                  " expected " + std::to_string(w) + "x" +
                                                  std::to_string(h));
      }
    }
    w = kernel::half_up(w);
    h = kernel::half_up(h);
  }
}

// Upsample-and-add from the base; the result is clamped to [0,1].
inline ImageBuffer collapse_pyramid(const FeaturePyramid& pyr) {
  check_pyramid_shape(pyr);
  ChannelPlanes out;
  for (std::size_t c = 0; c < ImageBuffer::kChannels; ++c) {
    Plane current = pyr.base()[c];
    for (std::size_t l = kDetailLevels; l-- > 0;) {
      const Plane& detail = pyr.levels[l][c];
      Plane up = kernel::expand(current, detail.width(), detail.height());
      auto u = up.values();
      auto d = detail.values();
      for (std::size_t i = 0; i < u.size(); ++i) u[i] += d[i];
      current = std::move(up);
    }
    out[c] = std::move(current);
  }
  return ImageBuffer::from_planes(std::move(out));
}

}  // namespace extremeforge
