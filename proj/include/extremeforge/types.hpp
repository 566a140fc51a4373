#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "extremeforge/error.hpp"

namespace extremeforge {

// Normalized YOLO-style box: center and size relative to image dimensions.
struct BBox {
  int class_id = 0;
  double cx = 0.0;
  double cy = 0.0;
  double w = 0.0;
  double h = 0.0;

  double x1() const noexcept { return cx - w / 2.0; }
  double y1() const noexcept { return cy - h / 2.0; }
  double x2() const noexcept { return cx + w / 2.0; }
  double y2() const noexcept { return cy + h / 2.0; }

  static BBox from_corners(int class_id, double x1, double y1, double x2, double y2) noexcept {
    return {class_id, (x1 + x2) / 2.0, (y1 + y2) / 2.0, x2 - x1, y2 - y1};
  }

  friend bool operator==(const BBox&, const BBox&) = default;
};

struct Detection {
  BBox box;
  double confidence = 0.0;

  friend bool operator==(const Detection&, const Detection&) = default;
};

enum class ConditionKind { LowLight, IntenseLight, SandDust, Fog, Rain };

inline constexpr std::array<ConditionKind, 5> kAllConditions = {
    ConditionKind::LowLight, ConditionKind::IntenseLight, ConditionKind::SandDust,
    ConditionKind::Fog, ConditionKind::Rain};

// Canonical names double as style-library subdirectory names.
inline std::string_view to_string(ConditionKind kind) noexcept {
  switch (kind) {
    case ConditionKind::LowLight: return "low_light";
    case ConditionKind::IntenseLight: return "intense_light";
    case ConditionKind::SandDust: return "sand_dust";
    case ConditionKind::Fog: return "fog";
    case ConditionKind::Rain: return "rain";
  }
  return "";
}

inline std::optional<ConditionKind> parse_condition(std::string_view name) noexcept {
  for (auto kind : kAllConditions) {
    if (to_string(kind) == name) return kind;
  }
  return std::nullopt;
}

inline ConditionKind condition_from_string(std::string_view name) {
  if (auto kind = parse_condition(name)) return *kind;
  throw Error(ErrorCode::ParseError, "unknown condition '" + std::string(name) + "'");
}

}  // namespace extremeforge
