#pragma once

#include <string_view>

#include "emberpipe/geometry.hpp"

namespace emberpipe {

enum class DetectionKind { Thermal, Hole };

inline const char* to_string(DetectionKind k) { return k == DetectionKind::Thermal ? "thermal" : "hole"; }

inline std::optional<DetectionKind> parse_detection_kind(std::string_view s) {
  if (s == "thermal") return DetectionKind::Thermal;
  if (s == "hole") return DetectionKind::Hole;
  return std::nullopt;
}

/// A fire-candidate observation d = (p, n) in the localization frame.
struct Detection {
  Vec3 position = Vec3::Zero();
  Vec3 normal = Vec3::UnitX();
  DetectionKind kind = DetectionKind::Thermal;
  double timestamp = 0.0;
};

}  // namespace emberpipe
