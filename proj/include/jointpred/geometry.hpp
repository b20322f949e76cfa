/* Copyright 2026 The Jointpred Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

// 2D rigid-body geometry: poses, angle normalization, and the agent-frame
// transforms used to normalize every trajectory into a zero-yaw local frame.

#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <vector>

namespace jointpred {

using Vec2 = std::array<double, 2>;

/// Wraps an angle into (-pi, pi].
inline double normalize_angle(double a) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double r = std::fmod(a + std::numbers::pi, two_pi);
  if (r <= 0.0) r += two_pi;
  return r - std::numbers::pi;
}

/// Pose in the world plane. Yaw is kept normalized in (-pi, pi].
struct Pose2 {
  double x = 0.0;
  double y = 0.0;
  double yaw = 0.0;

  Pose2() = default;
  Pose2(double x_, double y_, double yaw_) : x(x_), y(y_), yaw(normalize_angle(yaw_)) {}

  [[nodiscard]] Vec2 position() const { return {x, y}; }

  friend bool operator==(const Pose2&, const Pose2&) = default;
};

/// World point -> the anchor's local frame (anchor at origin, zero yaw).
inline Vec2 to_agent_frame(const Vec2& p, const Pose2& anchor) {
  const double c = std::cos(anchor.yaw);
  const double s = std::sin(anchor.yaw);
  const double dx = p[0] - anchor.x;
  const double dy = p[1] - anchor.y;
  return {c * dx + s * dy, -s * dx + c * dy};
}

/// Local point in the anchor's frame -> world. Exact inverse of to_agent_frame.
inline Vec2 from_agent_frame(const Vec2& p, const Pose2& anchor) {
  const double c = std::cos(anchor.yaw);
  const double s = std::sin(anchor.yaw);
  return {c * p[0] - s * p[1] + anchor.x, s * p[0] + c * p[1] + anchor.y};
}

inline std::vector<Vec2> to_agent_frame(const std::vector<Vec2>& pts, const Pose2& anchor) {
  std::vector<Vec2> out;
  out.reserve(pts.size());
  for (const auto& p : pts) out.push_back(to_agent_frame(p, anchor));
  return out;
}

inline std::vector<Vec2> from_agent_frame(const std::vector<Vec2>& pts, const Pose2& anchor) {
  std::vector<Vec2> out;
  out.reserve(pts.size());
  for (const auto& p : pts) out.push_back(from_agent_frame(p, anchor));
  return out;
}

/// A rigid map p -> R(angle) p + t, precomputed for batch application to
/// flattened [x0, y0, x1, y1, ...] coordinate arrays.
struct RigidTransform {
  double cos_a = 1.0;
  double sin_a = 0.0;
  double tx = 0.0;
  double ty = 0.0;

  static RigidTransform identity() { return {}; }

  /// Map from the anchor's local frame into world coordinates.
  static RigidTransform frame_to_world(const Pose2& anchor) {
    return {std::cos(anchor.yaw), std::sin(anchor.yaw), anchor.x, anchor.y};
  }

  /// Map from world coordinates into the anchor's local frame.
  static RigidTransform world_to_frame(const Pose2& anchor) {
    const double c = std::cos(anchor.yaw);
    const double s = std::sin(anchor.yaw);
    // R(-yaw) p - R(-yaw) t
    return {c, -s, -(c * anchor.x + s * anchor.y), -(-s * anchor.x + c * anchor.y)};
  }

  /// Map from agent `src`'s frame directly into agent `dst`'s frame.
  static RigidTransform frame_to_frame(const Pose2& src, const Pose2& dst) {
    return world_to_frame(dst).compose(frame_to_world(src));
  }

  /// this∘other: applies `other` first.
  [[nodiscard]] RigidTransform compose(const RigidTransform& other) const {
    return {cos_a * other.cos_a - sin_a * other.sin_a,
            sin_a * other.cos_a + cos_a * other.sin_a,
            cos_a * other.tx - sin_a * other.ty + tx,
            sin_a * other.tx + cos_a * other.ty + ty};
  }

  [[nodiscard]] Vec2 apply(const Vec2& p) const {
    return {cos_a * p[0] - sin_a * p[1] + tx, sin_a * p[0] + cos_a * p[1] + ty};
  }

  /// Applies to a flat [x0, y0, x1, y1, ...] buffer.
  [[nodiscard]] std::vector<double> apply_flat(const std::vector<double>& pts) const {
    std::vector<double> out(pts.size());
    for (std::size_t i = 0; i + 1 < pts.size(); i += 2) {
      out[i] = cos_a * pts[i] - sin_a * pts[i + 1] + tx;
      out[i + 1] = sin_a * pts[i] + cos_a * pts[i + 1] + ty;
    }
    return out;
  }
};

inline double distance(const Vec2& a, const Vec2& b) {
  return std::hypot(a[0] - b[0], a[1] - b[1]);
}

}  // namespace jointpred
