#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "json.hpp"

#include "extremeforge/error.hpp"
#include "extremeforge/image.hpp"
#include "extremeforge/pyramid.hpp"

namespace extremeforge {

inline constexpr double kSigmaFloor = 1e-6;
inline constexpr double kStyleMismatchTol = 1e-6;

struct ChannelStats {
  double mean = 0.0;
  double stddev = 0.0;

  friend bool operator==(const ChannelStats&, const ChannelStats&) = default;
};

// Mean/std of every (pyramid level, channel): 4 x 3 pairs, 24 scalars.
struct StyleVector {
  std::array<std::array<ChannelStats, ImageBuffer::kChannels>, kPyramidLevels> levels{};
  std::string source_id;

  const ChannelStats& at(std::size_t level, std::size_t channel) const {
    return levels[level][channel];
  }

  friend bool operator==(const StyleVector&, const StyleVector&) = default;
};

class StrengthFactor {
 public:
  StrengthFactor() = default;
  explicit StrengthFactor(double alpha) : alpha_(alpha) {
    if (!std::isfinite(alpha) || alpha < 0.0) {
      throw Error(ErrorCode::ParamOutOfRange, "alpha must be finite and >= 0");
    }
  }
  double value() const noexcept { return alpha_; }

  friend auto operator<=>(const StrengthFactor&, const StrengthFactor&) = default;

 private:
  double alpha_ = 0.0;
};

// Population statistics (two-pass).
inline ChannelStats plane_stats(const Plane& plane) {
  auto v = plane.values();
  double sum = 0.0;
  for (double x : v) sum += x;
  const double mean = sum / static_cast<double>(v.size());
  double sq = 0.0;
  for (double x : v) sq += (x - mean) * (x - mean);
  return {mean, std::sqrt(sq / static_cast<double>(v.size()))};
}

inline StyleVector pyramid_style(const FeaturePyramid& pyr, std::string source_id = {}) {
  StyleVector s;
  s.source_id = std::move(source_id);
  for (std::size_t l = 0; l < kPyramidLevels; ++l)
    for (std::size_t c = 0; c < ImageBuffer::kChannels; ++c)
      s.levels[l][c] = plane_stats(pyr.levels[l][c]);
  return s;
}

inline StyleVector extract_style(const ImageBuffer& img, std::string source_id = {}) {
  return pyramid_style(encode_pyramid(img), std::move(source_id));
}

namespace detail {

inline FeaturePyramid transfer_unchecked(const FeaturePyramid& pyr, const StyleVector& content,
                                         const StyleVector& target, StrengthFactor alpha) {
  const double a = alpha.value();
  FeaturePyramid out = pyr;
  for (std::size_t l = 0; l < kPyramidLevels; ++l) {
    for (std::size_t c = 0; c < ImageBuffer::kChannels; ++c) {
      const auto& cs = content.levels[l][c];
      const auto& ts = target.levels[l][c];
      const double mean_eff = cs.mean + a * (ts.mean - cs.mean);
      const double std_eff = std::max(cs.stddev + a * (ts.stddev - cs.stddev), kSigmaFloor);
      const double scale = std_eff / std::max(cs.stddev, kSigmaFloor);
      for (double& x : out.levels[l][c].values()) x = (x - cs.mean) * scale + mean_eff;
    }
  }
  return out;
}

}  // namespace detail

// Moves each level/channel's statistics from content_style toward (alpha<=1)
// or past (alpha>1) target_style. No clamping happens here.
inline FeaturePyramid transfer_statistics(const FeaturePyramid& pyr,
                                          const StyleVector& content_style,
                                          const StyleVector& target_style, StrengthFactor alpha) {
  check_pyramid_shape(pyr);
  const StyleVector actual = pyramid_style(pyr);
  for (std::size_t l = 0; l < kPyramidLevels; ++l) {
    for (std::size_t c = 0; c < ImageBuffer::kChannels; ++c) {
      const auto& want = content_style.levels[l][c];
      const auto& got = actual.levels[l][c];
      if (std::abs(want.mean - got.mean) > kStyleMismatchTol ||
          std::abs(want.stddev - got.stddev) > kStyleMismatchTol) {
        throw Error(ErrorCode::StyleMismatch, "content style does not describe this pyramid (level " +
                                                  std::to_string(l) + ", channel " +
                                                  std::to_string(c) + ")");
      }
    }
  }
  return detail::transfer_unchecked(pyr, content_style, target_style, alpha);
}

// A content image analysed once, ready to be rendered under many styles.
struct PreparedContent {
  FeaturePyramid pyramid;
  StyleVector stats;

  explicit PreparedContent(const ImageBuffer& img)
      : pyramid(encode_pyramid(img)), stats(pyramid_style(pyramid)) {}

  ImageBuffer render(const StyleVector& style, StrengthFactor alpha) const {
    return collapse_pyramid(detail::transfer_unchecked(pyramid, stats, style, alpha));
  }
};

inline ImageBuffer apply_style(const ImageBuffer& content, const StyleVector& style,
                               StrengthFactor alpha) {
  return PreparedContent(content).render(style, alpha);
}

// {source_id, levels: [[[mu, sigma] x3] x4]}
inline nlohmann::json to_json(const StyleVector& s) {
  nlohmann::json levels = nlohmann::json::array();
  for (const auto& level : s.levels) {
    nlohmann::json channels = nlohmann::json::array();
    for (const auto& st : level) channels.push_back({st.mean, st.stddev});
    levels.push_back(std::move(channels));
  }
  return {{"source_id", s.source_id}, {"levels", std::move(levels)}};
}

inline StyleVector style_from_json(const nlohmann::json& j) {
  StyleVector s;
  try {
    s.source_id = j.value("source_id", std::string{});
    const auto& levels = j.at("levels");
    if (!levels.is_array() || levels.size() != kPyramidLevels) {
      throw Error(ErrorCode::ParseError, "style vector needs 4 levels");
    }
    for (std::size_t l = 0; l < kPyramidLevels; ++l) {
      const auto& channels = levels[l];
      if (!channels.is_array() || channels.size() != ImageBuffer::kChannels) {
        throw Error(ErrorCode::ParseError, "style level needs 3 channels");
      }
      for (std::size_t c = 0; c < ImageBuffer::kChannels; ++c) {
        const auto& pair = channels[c];
        if (!pair.is_array() || pair.size() != 2) {
          throw Error(ErrorCode::ParseError, "style entry must be [mu, sigma]");
        }
        ChannelStats st{pair[0].get<double>(), pair[1].get<double>()};
        if (!std::isfinite(st.mean) || !std::isfinite(st.stddev) || st.stddev < 0.0) {
          throw Error(ErrorCode::ParseError, "style statistics must be finite with sigma >= 0");
        }
        s.levels[l][c] = st;
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("style vector JSON: ") + e.what());
  }
  return s;
}

}  // namespace extremeforge
