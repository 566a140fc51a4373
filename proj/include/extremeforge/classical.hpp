#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "json.hpp"

#include "extremeforge/error.hpp"
#include "extremeforge/image.hpp"
#include "extremeforge/prng.hpp"
#include "extremeforge/types.hpp"

namespace extremeforge {

using Rgb = std::array<double, 3>;

struct LowLightParams {
  double gamma = 2.2;
  double gain = 0.6;
  friend bool operator==(const LowLightParams&, const LowLightParams&) = default;
};

struct IntenseLightParams {
  double gamma = 0.45;
  double glare_strength = 0.5;
  double glare_radius = 0.4;  // fraction of the image diagonal
  friend bool operator==(const IntenseLightParams&, const IntenseLightParams&) = default;
};

struct SandDustParams {
  Rgb tint = {0.76, 0.57, 0.34};
  double blend_w = 0.45;
  double contrast_k = 0.7;
  friend bool operator==(const SandDustParams&, const SandDustParams&) = default;
};

struct FogParams {
  double beta = 1.2;
  Rgb airlight = {0.9, 0.9, 0.92};
  double horizon = 0.4;  // row fraction from the top
  friend bool operator==(const FogParams&, const FogParams&) = default;
};

struct RainParams {
  std::uint32_t n_streaks = 400;
  double angle_deg = 75.0;
  double angle_jitter_deg = 4.0;
  double length_px = 18.0;
  double intensity = 0.25;
  bool post_blur = true;
  friend bool operator==(const RainParams&, const RainParams&) = default;
};

// Alternative order matches ConditionKind.
using ConditionParams =
    std::variant<LowLightParams, IntenseLightParams, SandDustParams, FogParams, RainParams>;

inline ConditionKind kind_of(const ConditionParams& params) noexcept {
  return static_cast<ConditionKind>(params.index());
}

inline ConditionParams default_params(ConditionKind kind) {
  switch (kind) {
    case ConditionKind::LowLight: return LowLightParams{};
    case ConditionKind::IntenseLight: return IntenseLightParams{};
    case ConditionKind::SandDust: return SandDustParams{};
    case ConditionKind::Fog: return FogParams{};
    case ConditionKind::Rain: return RainParams{};
  }
  return LowLightParams{};
}

namespace detail {

inline void require(bool ok, const char* what) {
  if (!ok) throw Error(ErrorCode::ParamOutOfRange, what);
}

inline bool unit(double v) { return std::isfinite(v) && v >= 0.0 && v <= 1.0; }
inline bool unit_rgb(const Rgb& c) { return unit(c[0]) && unit(c[1]) && unit(c[2]); }

inline void validate(const LowLightParams& p) {
  require(std::isfinite(p.gamma) && p.gamma >= 1.0, "low_light.gamma must be >= 1");
  require(std::isfinite(p.gain) && p.gain > 0.0 && p.gain <= 1.0, "low_light.gain must be in (0,1]");
}
inline void validate(const IntenseLightParams& p) {
  require(std::isfinite(p.gamma) && p.gamma > 0.0 && p.gamma <= 1.0,
          "intense_light.gamma must be in (0,1]");
  require(std::isfinite(p.glare_strength) && p.glare_strength >= 0.0,
          "intense_light.glare_strength must be >= 0");
  require(std::isfinite(p.glare_radius) && p.glare_radius > 0.0,
          "intense_light.glare_radius must be > 0");
}
inline void validate(const SandDustParams& p) {
  require(unit_rgb(p.tint), "sand_dust.tint components must be in [0,1]");
  require(unit(p.blend_w), "sand_dust.blend_w must be in [0,1]");
  require(std::isfinite(p.contrast_k) && p.contrast_k > 0.0 && p.contrast_k <= 1.0,
          "sand_dust.contrast_k must be in (0,1]");
}
inline void validate(const FogParams& p) {
  require(std::isfinite(p.beta) && p.beta >= 0.0, "fog.beta must be >= 0");
  require(unit_rgb(p.airlight), "fog.airlight components must be in [0,1]");
  require(unit(p.horizon), "fog.horizon must be in [0,1]");
}
inline void validate(const RainParams& p) {
  require(std::isfinite(p.angle_deg), "rain.angle_deg must be finite");
  require(std::isfinite(p.angle_jitter_deg) && p.angle_jitter_deg >= 0.0,
          "rain.angle_jitter_deg must be >= 0");
  require(std::isfinite(p.length_px) && p.length_px >= 1.0, "rain.length_px must be >= 1");
  require(unit(p.intensity), "rain.intensity must be in [0,1]");
}

inline ImageBuffer low_light(const ImageBuffer& img, const LowLightParams& p) {
  ImageBuffer out = img;
  for (std::size_t c = 0; c < 3; ++c)
    for (double& v : out.channel(c).values()) v = p.gain * std::pow(v, p.gamma);
  out.clamp();
  return out;
}

inline ImageBuffer intense_light(const ImageBuffer& img, const IntenseLightParams& p, Seed seed) {
  SplitMix64 rng(seed);
  const double w = static_cast<double>(img.width());
  const double h = static_cast<double>(img.height());
  const double gx = rng.uniform() * w;
  const double gy = rng.uniform() * (h / 2.0);
  const double radius = p.glare_radius * std::hypot(w, h);
  ImageBuffer out = img;
  for (std::size_t y = 0; y < img.height(); ++y) {
    for (std::size_t x = 0; x < img.width(); ++x) {
      const double d = std::hypot(static_cast<double>(x) + 0.5 - gx, static_cast<double>(y) + 0.5 - gy);
      const double glare = p.glare_strength * std::exp(-(d / radius) * (d / radius));
      for (std::size_t c = 0; c < 3; ++c) {
        double& v = out.at(c, x, y);
        v = std::pow(v, p.gamma) + glare;
      }
    }
  }
  out.clamp();
  return out;
}

// Written as k*J + (1-k)*mean so that k = 1 is bit-exact.
inline ImageBuffer sand_dust(const ImageBuffer& img, const SandDustParams& p) {
  ImageBuffer out = img;
  for (std::size_t c = 0; c < 3; ++c) {
    auto v = out.channel(c).values();
    double sum = 0.0;
    for (double& x : v) {
      x = p.tint[c] * p.blend_w + x * (1.0 - p.blend_w);
      sum += x;
    }
    const double mean = sum / static_cast<double>(v.size());
    for (double& x : v) x = p.contrast_k * x + (1.0 - p.contrast_k) * mean;
  }
  out.clamp();
  return out;
}

inline ImageBuffer fog(const ImageBuffer& img, const FogParams& p) {
  ImageBuffer out = img;
  const double horizon_row = p.horizon * static_cast<double>(img.height());
  for (std::size_t y = 0; y < img.height(); ++y) {
    double depth = 0.0;
    if (horizon_row > 0.0) {
      depth = std::clamp((horizon_row - static_cast<double>(y)) / horizon_row, 0.0, 1.0);
    }
    const double t = std::exp(-p.beta * depth);
    for (std::size_t c = 0; c < 3; ++c)
      for (double& v : out.channel(c).row(y)) v = t * v + (1.0 - t) * p.airlight[c];
  }
  out.clamp();
  return out;
}

inline void splat(Plane& layer, double x, double y, double amount) {
  if (x < 0.0 || y < 0.0) return;
  const auto xi = static_cast<std::size_t>(x);
  const auto yi = static_cast<std::size_t>(y);
  if (xi < layer.width() && yi < layer.height()) layer.at(xi, yi) += amount;
}

// 1 px anti-aliased segment: one sample per step along the major axis, the
// coverage split between the two nearest pixels on the minor axis.
inline void draw_segment(Plane& layer, double x0, double y0, double x1, double y1, double value) {
  const double dx = x1 - x0, dy = y1 - y0;
  const bool x_major = std::abs(dx) >= std::abs(dy);
  const int steps = std::max(1, static_cast<int>(std::ceil(std::max(std::abs(dx), std::abs(dy)))));
  for (int i = 0; i <= steps; ++i) {
    const double t = static_cast<double>(i) / steps;
    // shift to pixel-index space, pixel k covers [k, k+1) with center k+0.5
    const double px = x0 + t * dx - 0.5;
    const double py = y0 + t * dy - 0.5;
    if (x_major) {
      const double base = std::floor(py);
      const double frac = py - base;
      const double col = std::floor(px + 0.5);
      splat(layer, col, base, value * (1.0 - frac));
      splat(layer, col, base + 1.0, value * frac);
    } else {
      const double base = std::floor(px);
      const double frac = px - base;
      const double row = std::floor(py + 0.5);
      splat(layer, base, row, value * (1.0 - frac));
      splat(layer, base + 1.0, row, value * frac);
    }
  }
}

inline double bilinear_or_zero(const Plane& p, double x, double y) {
  const double fx = std::floor(x), fy = std::floor(y);
  const double ax = x - fx, ay = y - fy;
  double acc = 0.0;
  for (int j = 0; j < 2; ++j) {
    for (int i = 0; i < 2; ++i) {
      const double sx = fx + i, sy = fy + j;
      if (sx < 0.0 || sy < 0.0 || sx >= static_cast<double>(p.width()) ||
          sy >= static_cast<double>(p.height()))
        continue;
      const double wgt = (i ? ax : 1.0 - ax) * (j ? ay : 1.0 - ay);
      acc += wgt * p.at(static_cast<std::size_t>(sx), static_cast<std::size_t>(sy));
    }
  }
  return acc;
}

inline ImageBuffer rain(const ImageBuffer& img, const RainParams& p, Seed seed) {
  SplitMix64 rng(seed);
  const double w = static_cast<double>(img.width());
  const double h = static_cast<double>(img.height());
  constexpr double kDeg = std::numbers::pi / 180.0;
  Plane layer(img.width(), img.height());
  for (std::uint32_t s = 0; s < p.n_streaks; ++s) {
    const double x0 = rng.uniform() * w;
    const double y0 = rng.uniform() * h;
    const double angle = (p.angle_deg + p.angle_jitter_deg * (2.0 * rng.uniform() - 1.0)) * kDeg;
    const double length = p.length_px * (0.5 + rng.uniform());
    const double brightness = p.intensity * (0.5 + rng.uniform() / 2.0);
    draw_segment(layer, x0, y0, x0 + length * std::cos(angle), y0 + length * std::sin(angle),
                 brightness);
  }
  if (p.post_blur) {
    const double ux = std::cos(p.angle_deg * kDeg), uy = std::sin(p.angle_deg * kDeg);
    Plane blurred(img.width(), img.height());
    for (std::size_t y = 0; y < img.height(); ++y) {
      for (std::size_t x = 0; x < img.width(); ++x) {
        const double fx = static_cast<double>(x), fy = static_cast<double>(y);
        blurred.at(x, y) = (bilinear_or_zero(layer, fx - ux, fy - uy) + layer.at(x, y) +
                            bilinear_or_zero(layer, fx + ux, fy + uy)) / 3.0;
      }
    }
    layer = std::move(blurred);
  }
  ImageBuffer out = img;
  for (std::size_t c = 0; c < 3; ++c) {
    auto v = out.channel(c).values();
    auto add = layer.values();
    for (std::size_t i = 0; i < v.size(); ++i) v[i] += add[i];
  }
  out.clamp();
  return out;
}

}  // namespace detail

inline void validate_params(const ConditionParams& params) {
  std::visit([](const auto& p) { detail::validate(p); }, params);
}

// Geometry is never changed, so annotations remain valid for the output.
inline ImageBuffer simulate(const ImageBuffer& img, ConditionKind kind,
                            const ConditionParams& params, Seed seed) {
  if (kind_of(params) != kind) {
    throw Error(ErrorCode::ParamsKindMismatch, std::string("params are for ") +
                                                   std::string(to_string(kind_of(params))) +
                                                   ", requested " + std::string(to_string(kind)));
  }
  validate_params(params);
  switch (kind) {
    case ConditionKind::LowLight: return detail::low_light(img, std::get<LowLightParams>(params));
    case ConditionKind::IntenseLight:
      return detail::intense_light(img, std::get<IntenseLightParams>(params), seed);
    case ConditionKind::SandDust: return detail::sand_dust(img, std::get<SandDustParams>(params));
    case ConditionKind::Fog: return detail::fog(img, std::get<FogParams>(params));
    case ConditionKind::Rain: return detail::rain(img, std::get<RainParams>(params), seed);
  }
  return img;
}

inline ImageBuffer simulate(const ImageBuffer& img, const ConditionParams& params, Seed seed) {
  return simulate(img, kind_of(params), params, seed);
}

// ---- JSON ---------------------------------------------------------------

namespace detail {

class FieldReader {
 public:
  FieldReader(const nlohmann::json& j, std::string_view kind) : j_(j), kind_(kind) {
    if (!j.is_object()) throw Error(ErrorCode::ParseError, "condition params must be a JSON object");
  }

  template <typename T>
  void read(const char* key, T& field) {
    seen_.push_back(key);
    if (!j_.contains(key)) return;
    if constexpr (std::is_unsigned_v<T> && !std::is_same_v<T, bool>) {
      const auto& v = j_.at(key);
      if (!v.is_number_integer() || v.get<long long>() < 0) {
        throw Error(ErrorCode::ParamOutOfRange, std::string(kind_) + "." + key +
                                                    " must be a non-negative integer");
      }
    }
    try {
      field = j_.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::ParseError, std::string(kind_) + "." + key + ": " + e.what());
    }
  }

  void reject_unknown() const {
    for (const auto& [key, value] : j_.items()) {
      if (key == "kind") continue;
      if (std::find(seen_.begin(), seen_.end(), key) == seen_.end()) {
        throw Error(ErrorCode::ParseError, "unknown field '" + key + "' for " + std::string(kind_));
      }
    }
  }

 private:
  const nlohmann::json& j_;
  std::string_view kind_;
  std::vector<std::string> seen_;
};

template <typename Visitor>
void fields(LowLightParams& p, Visitor&& v) {
  v("gamma", p.gamma);
  v("gain", p.gain);
}
template <typename Visitor>
void fields(IntenseLightParams& p, Visitor&& v) {
  v("gamma", p.gamma);
  v("glare_strength", p.glare_strength);
  v("glare_radius", p.glare_radius);
}
template <typename Visitor>
void fields(SandDustParams& p, Visitor&& v) {
  v("tint", p.tint);
  v("blend_w", p.blend_w);
  v("contrast_k", p.contrast_k);
}
template <typename Visitor>
void fields(FogParams& p, Visitor&& v) {
  v("beta", p.beta);
  v("airlight", p.airlight);
  v("horizon", p.horizon);
}
template <typename Visitor>
void fields(RainParams& p, Visitor&& v) {
  v("n_streaks", p.n_streaks);
  v("angle_deg", p.angle_deg);
  v("angle_jitter_deg", p.angle_jitter_deg);
  v("length_px", p.length_px);
  v("intensity", p.intensity);
  v("post_blur", p.post_blur);
}

}  // namespace detail

inline nlohmann::json to_json(const ConditionParams& params) {
  nlohmann::json j = {{"kind", to_string(kind_of(params))}};
  std::visit(
      [&](auto p) { detail::fields(p, [&](const char* key, const auto& value) { j[key] = value; }); },
      params);
  return j;
}

// Omitted fields take their defaults. A "kind" field, if present, must agree
// with the requested kind.
inline ConditionParams params_from_json(ConditionKind kind, const nlohmann::json& j) {
  if (j.is_object() && j.contains("kind")) {
    const auto stated = j.at("kind").is_string() ? j.at("kind").get<std::string>() : std::string{};
    if (stated != to_string(kind)) {
      throw Error(ErrorCode::ParamsKindMismatch,
                  "params declare kind '" + stated + "', expected " + std::string(to_string(kind)));
    }
  }
  ConditionParams params = default_params(kind);
  std::visit(
      [&](auto& p) {
        detail::FieldReader reader(j, to_string(kind));
        detail::fields(p, [&](const char* key, auto& field) { reader.read(key, field); });
        reader.reject_unknown();
      },
      params);
  validate_params(params);
  return params;
}

inline ConditionParams params_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("kind") || !j.at("kind").is_string()) {
    throw Error(ErrorCode::ParseError, "condition params need a string 'kind'");
  }
  return params_from_json(condition_from_string(j.at("kind").get<std::string>()), j);
}

}  // namespace extremeforge
