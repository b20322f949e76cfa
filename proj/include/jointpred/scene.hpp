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

// Scene containers: per-agent tracks sampled at 10 Hz with a fixed
// 11-step history and 80-step future. The future grid starts at the
// current timestep, i.e. future_gt[0] duplicates the last history pose and
// the horizon covers t = 0.0 .. 7.9 s. Predicted candidates share the grid,
// so every candidate's first waypoint sits exactly on the agent's current
// position.

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "jointpred/geometry.hpp"

namespace jointpred {

inline constexpr int kHistorySteps = 11;  // t = -1.0 .. 0.0 s inclusive
inline constexpr int kFutureSteps = 80;   // t = 0.0 .. 7.9 s inclusive
inline constexpr double kStepSeconds = 0.1;
inline constexpr int kMaxAgents = 40;

enum class AgentType { vehicle, pedestrian, cyclist };

inline const char* agent_type_name(AgentType t) {
  switch (t) {
    case AgentType::vehicle: return "vehicle";
    case AgentType::pedestrian: return "pedestrian";
    case AgentType::cyclist: return "cyclist";
  }
  return "vehicle";
}

inline AgentType agent_type_from_name(const std::string& s) {
  if (s == "vehicle") return AgentType::vehicle;
  if (s == "pedestrian") return AgentType::pedestrian;
  if (s == "cyclist") return AgentType::cyclist;
  throw std::invalid_argument("unknown agent type: " + s);
}

struct HistoryStep {
  Pose2 pose;
  double velocity = 0.0;  // signed speed along heading, m/s

  friend bool operator==(const HistoryStep&, const HistoryStep&) = default;
};

struct AgentTrack {
  int id = 0;
  AgentType type = AgentType::vehicle;
  double length = 4.8;
  double width = 2.0;
  bool is_av = false;
  std::vector<HistoryStep> history;  // exactly kHistorySteps
  std::vector<Pose2> future_gt;      // exactly kFutureSteps
  std::vector<bool> valid_mask;      // one flag per future step

  [[nodiscard]] const Pose2& current_pose() const { return history.back().pose; }
  [[nodiscard]] double current_speed() const { return history.back().velocity; }

  friend bool operator==(const AgentTrack&, const AgentTrack&) = default;
};

struct Scene {
  std::string scene_id;
  std::vector<AgentTrack> agents;
  double dt = kStepSeconds;
  std::uint64_t rng_seed = 0;

  [[nodiscard]] int num_agents() const { return static_cast<int>(agents.size()); }

  /// Index of the AV agent; the scene invariant guarantees exactly one.
  [[nodiscard]] int av_index() const {
    for (int i = 0; i < num_agents(); ++i)
      if (agents[i].is_av) return i;
    throw std::logic_error("scene has no AV agent");
  }

  friend bool operator==(const Scene&, const Scene&) = default;
};

/// Frame tag for a trajectory: world coordinates or some agent's local frame.
struct Frame {
  enum Kind { world, agent } kind = world;
  int agent_index = -1;

  static Frame world_frame() { return {world, -1}; }
  static Frame agent_frame(int i) { return {agent, i}; }

  friend bool operator==(const Frame&, const Frame&) = default;
};

/// A candidate or ground-truth path: kFutureSteps waypoints on the future grid.
struct Trajectory {
  std::vector<Vec2> waypoints;
  Frame frame = Frame::world_frame();

  friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

/// Waypoints flattened to [x0, y0, x1, y1, ...].
inline std::vector<double> flatten(const std::vector<Vec2>& waypoints) {
  std::vector<double> out;
  out.reserve(2 * waypoints.size());
  for (const auto& w : waypoints) {
    out.push_back(w[0]);
    out.push_back(w[1]);
  }
  return out;
}

inline std::vector<Vec2> unflatten(const std::vector<double>& flat) {
  std::vector<Vec2> out(flat.size() / 2);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = {flat[2 * i], flat[2 * i + 1]};
  return out;
}

inline std::vector<Vec2> future_positions(const AgentTrack& t) {
  std::vector<Vec2> out;
  out.reserve(t.future_gt.size());
  for (const auto& p : t.future_gt) out.push_back(p.position());
  return out;
}

/// Checks every structural invariant; throws std::invalid_argument on the
/// first violation.
inline void validate_scene(const Scene& scene) {
  if (scene.agents.empty() || scene.num_agents() > kMaxAgents)
    throw std::invalid_argument("scene '" + scene.scene_id + "': agent count " +
                                std::to_string(scene.num_agents()) + " outside [1, " +
                                std::to_string(kMaxAgents) + "]");
  int av_count = 0;
  std::vector<int> ids;
  for (const auto& a : scene.agents) {
    if (a.history.size() != kHistorySteps)
      throw std::invalid_argument("agent " + std::to_string(a.id) + ": history length " +
                                  std::to_string(a.history.size()));
    if (a.future_gt.size() != kFutureSteps || a.valid_mask.size() != kFutureSteps)
      throw std::invalid_argument("agent " + std::to_string(a.id) + ": future length " +
                                  std::to_string(a.future_gt.size()));
    if (a.length <= 0.0 || a.width <= 0.0)
      throw std::invalid_argument("agent " + std::to_string(a.id) + ": non-positive box dims");
    if (a.type == AgentType::vehicle && a.length < a.width)
      throw std::invalid_argument("agent " + std::to_string(a.id) + ": vehicle length < width");
    av_count += a.is_av ? 1 : 0;
    ids.push_back(a.id);
  }
  if (av_count != 1)
    throw std::invalid_argument("scene '" + scene.scene_id + "': expected exactly one AV, got " +
                                std::to_string(av_count));
  for (std::size_t i = 0; i < ids.size(); ++i)
    for (std::size_t j = i + 1; j < ids.size(); ++j)
      if (ids[i] == ids[j])
        throw std::invalid_argument("scene '" + scene.scene_id + "': duplicate agent id " +
                                    std::to_string(ids[i]));
}

}  // namespace jointpred
