#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "extremeforge/error.hpp"

namespace extremeforge {

// A single-channel row-major plane of doubles. Used for image channels and
// for signed pyramid coefficients alike, so it carries no range invariant.
class Plane {
 public:
  Plane() = default;
  Plane(std::size_t width, std::size_t height, double fill = 0.0)
      : width_(width), height_(height), data_(width * height, fill) {}

  std::size_t width() const noexcept { return width_; }
  std::size_t height() const noexcept { return height_; }
  std::size_t size() const noexcept { return data_.size(); }

  double& at(std::size_t x, std::size_t y) noexcept { return data_[y * width_ + x]; }
  double at(std::size_t x, std::size_t y) const noexcept { return data_[y * width_ + x]; }

  std::span<double> row(std::size_t y) noexcept { return {data_.data() + y * width_, width_}; }
  std::span<const double> row(std::size_t y) const noexcept {
    return {data_.data() + y * width_, width_};
  }

  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }

  bool same_shape(const Plane& other) const noexcept {
    return width_ == other.width_ && height_ == other.height_;
  }

  friend bool operator==(const Plane&, const Plane&) = default;

 private:
  std::size_t width_ = 0;
  std::size_t height_ = 0;
  std::vector<double> data_;
};

// Planar RGB image with samples in [0,1]. Pixel math happens in doubles;
// quantization to bytes only happens at file boundaries.
class ImageBuffer {
 public:
  static constexpr std::size_t kChannels = 3;

  ImageBuffer() = default;
  ImageBuffer(std::size_t width, std::size_t height, double fill = 0.0)
      : planes_{Plane(width, height, fill), Plane(width, height, fill),
                Plane(width, height, fill)} {
    if (width == 0 || height == 0) {
      throw Error(ErrorCode::ShapeMismatch, "image dimensions must be at least 1x1");
    }
  }

  // Takes ownership of three equally sized planes, clamping into [0,1].
  // Non-finite samples become 0.
  static ImageBuffer from_planes(std::array<Plane, kChannels> planes) {
    if (!planes[0].same_shape(planes[1]) || !planes[0].same_shape(planes[2]) ||
        planes[0].size() == 0) {
      throw Error(ErrorCode::ShapeMismatch, "image planes differ in shape or are empty");
    }
    ImageBuffer img;
    img.planes_ = std::move(planes);
    img.clamp();
    return img;
  }

  std::size_t width() const noexcept { return planes_[0].width(); }
  std::size_t height() const noexcept { return planes_[0].height(); }
  bool empty() const noexcept { return planes_[0].size() == 0; }

  Plane& channel(std::size_t c) noexcept { return planes_[c]; }
  const Plane& channel(std::size_t c) const noexcept { return planes_[c]; }

  double& at(std::size_t c, std::size_t x, std::size_t y) noexcept { return planes_[c].at(x, y); }
  double at(std::size_t c, std::size_t x, std::size_t y) const noexcept {
    return planes_[c].at(x, y);
  }

  void clamp() noexcept {
    for (auto& p : planes_) {
      for (double& v : p.values()) {
        v = std::isfinite(v) ? std::clamp(v, 0.0, 1.0) : 0.0;
      }
    }
  }

  friend bool operator==(const ImageBuffer&, const ImageBuffer&) = default;

 private:
  std::array<Plane, kChannels> planes_;
};

inline double max_abs_diff(const ImageBuffer& a, const ImageBuffer& b) {
  if (a.width() != b.width() || a.height() != b.height()) {
    throw Error(ErrorCode::ShapeMismatch, "cannot compare images of different size");
  }
  double worst = 0.0;
  for (std::size_t c = 0; c < ImageBuffer::kChannels; ++c) {
    auto va = a.channel(c).values();
    auto vb = b.channel(c).values();
    for (std::size_t i = 0; i < va.size(); ++i) worst = std::max(worst, std::abs(va[i] - vb[i]));
  }
  return worst;
}

inline ImageBuffer flip_horizontal(const ImageBuffer& img) {
  ImageBuffer out(img.width(), img.height());
  for (std::size_t c = 0; c < ImageBuffer::kChannels; ++c)
    for (std::size_t y = 0; y < img.height(); ++y)
      for (std::size_t x = 0; x < img.width(); ++x)
        out.at(c, x, y) = img.at(c, img.width() - 1 - x, y);
  return out;
}

// u8 = floor(x * 255 + 0.5)
inline unsigned char quantize(double v) noexcept {
  v = std::clamp(v, 0.0, 1.0);
  return static_cast<unsigned char>(std::floor(v * 255.0 + 0.5));
}

inline double dequantize(unsigned char b) noexcept { return static_cast<double>(b) / 255.0; }

// Snaps every sample onto the u8 grid the file formats can represent.
inline ImageBuffer quantized(const ImageBuffer& img) {
  ImageBuffer out = img;
  for (std::size_t c = 0; c < ImageBuffer::kChannels; ++c)
    for (double& v : out.channel(c).values()) v = dequantize(quantize(v));
  return out;
}

}  // namespace extremeforge
