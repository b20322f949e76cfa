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

// Trainable candidate generator. Each agent gets K anchor trajectories in its
// own frame plus MLP-predicted per-waypoint offsets and unary logits, all
// computed from agent-centric history features. Waypoint 0 of every anchor is
// the frame origin and its offset is structurally zero, so world-frame
// candidates start exactly at the agent's current position.

#pragma once

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "jointpred/autodiff.hpp"
#include "jointpred/geometry.hpp"
#include "jointpred/scenario_gen.hpp"
#include "jointpred/scene.hpp"

namespace jointpred {

inline constexpr int kFeatureDim = 2 * kHistorySteps + 2 + 3;  // xy history, speed, yaw rate, type
inline constexpr int kOffsetDim = 2 * (kFutureSteps - 1);      // waypoint 0 is pinned

struct ModelConfig {
  int k = 6;
  int backbone_hidden = 64;
  double anchor_speed_vehicle = 10.0;
  double anchor_speed_pedestrian = 1.4;
  double anchor_speed_cyclist = 5.0;
  int bp_iterations = 3;
  double huber_delta = 1.0;
  double miss_threshold_m = 2.0;
  // When set, the pair potential reads stop-gradient'd trajectories: its MLP
  // weights still receive gradients, but pair losses do not bend the
  // candidates. Off by default so the recorded graph carries the exact
  // likelihood gradient; the training loop switches it on (see TrainConfig).
  bool detach_pair_inputs = false;
};

// ---------------------------------------------------------------------------
// Features
// ---------------------------------------------------------------------------

/// Agent-centric history features: positions in the last-pose frame, current
/// speed, current yaw rate, and an agent-type one-hot. Fixed length
/// kFeatureDim; deterministic.
inline std::vector<double> extract_features(const AgentTrack& track) {
  if (track.history.size() != kHistorySteps)
    throw std::invalid_argument("extract_features: history must have " +
                                std::to_string(kHistorySteps) + " steps");
  const Pose2& anchor = track.current_pose();
  std::vector<double> out;
  out.reserve(kFeatureDim);
  for (const auto& h : track.history) {
    const Vec2 p = to_agent_frame(h.pose.position(), anchor);
    out.push_back(p[0]);
    out.push_back(p[1]);
  }
  out.push_back(track.current_speed());
  const double yaw_rate =
      normalize_angle(track.history[kHistorySteps - 1].pose.yaw -
                      track.history[kHistorySteps - 2].pose.yaw) / kStepSeconds;
  out.push_back(yaw_rate);
  for (int t = 0; t < 3; ++t) out.push_back(static_cast<int>(track.type) == t ? 1.0 : 0.0);
  return out;
}

// ---------------------------------------------------------------------------
// Anchors
// ---------------------------------------------------------------------------

/// K agent-frame template trajectories per agent type. Base variants:
/// straight, hard stop, left turn, right turn, slow down, accelerate; larger
/// K adds progressively sharper turn variants.
struct AnchorSet {
  int k = 0;
  std::array<std::vector<std::vector<Vec2>>, 3> templates;  // [agent type][anchor][waypoint]

  [[nodiscard]] const std::vector<std::vector<Vec2>>& for_type(AgentType t) const {
    return templates[static_cast<int>(t)];
  }
};

namespace detail {

inline std::vector<Vec2> sample_anchor(const ArcPath& path, const MotionProfile& profile) {
  std::vector<Vec2> wps(kFutureSteps);
  for (int j = 0; j < kFutureSteps; ++j) {
    const auto [v, s] = profile.at(j * kStepSeconds);
    wps[j] = path.pose_at(s).position();
  }
  return wps;
}

inline std::vector<Vec2> anchor_variant(int variant, double v) {
  const Pose2 origin{0.0, 0.0, 0.0};
  const double horizon = (kFutureSteps - 1) * kStepSeconds;
  switch (variant) {
    case 0:  // straight
      return sample_anchor(ArcPath::straight(origin), MotionProfile::constant(v));
    case 1: {  // hard stop
      MotionProfile prof(v);
      prof.add_phase(-v / 2.5, horizon);
      return sample_anchor(ArcPath::straight(origin), prof);
    }
    case 2:
    case 3: {  // brake, then a tight quarter turn left / right
      const double vt = 0.5 * v;
      const double brake_time = 1.6;
      const double radius = std::max(2.5, 2.4 * vt);
      const double approach = 0.5 * (v + vt) * brake_time;
      const double curvature = (variant == 2 ? 1.0 : -1.0) / radius;
      ArcPath path(origin, {{0.0, approach},
                            {curvature, std::numbers::pi / 2.0 * radius}});
      return sample_anchor(path, MotionProfile(v, {{-(v - vt) / brake_time, brake_time}}));
    }
    case 4: {  // slow to 45%
      MotionProfile prof(v);
      prof.add_phase(-(0.55 * v) / 3.5, 3.5);
      return sample_anchor(ArcPath::straight(origin), prof);
    }
    case 5: {  // accelerate
      MotionProfile prof(v);
      prof.add_phase(0.12 * v, 4.0);
      return sample_anchor(ArcPath::straight(origin), prof);
    }
    default: {  // wider sweeping turns, alternating side
      const int extra = variant - 6;
      const double vt = 0.8 * v;
      const double radius = (2.2 + 1.1 * (extra / 2)) * std::max(2.5, 2.4 * vt);
      const double curvature = (extra % 2 == 0 ? 1.0 : -1.0) / radius;
      ArcPath path(origin, {{curvature, std::numbers::pi / 2.0 * radius}});
      return sample_anchor(path, MotionProfile::constant(vt));
    }
  }
}

}  // namespace detail

inline AnchorSet build_anchors(int k, const ModelConfig& cfg = {}) {
  if (k < 2) throw std::invalid_argument("build_anchors: need k >= 2, got " + std::to_string(k));
  AnchorSet set;
  set.k = k;
  const std::array<double, 3> speeds{cfg.anchor_speed_vehicle, cfg.anchor_speed_pedestrian,
                                     cfg.anchor_speed_cyclist};
  for (int t = 0; t < 3; ++t) {
    set.templates[t].reserve(k);
    for (int j = 0; j < k; ++j) set.templates[t].push_back(detail::anchor_variant(j, speeds[t]));
  }
  return set;
}

// ---------------------------------------------------------------------------
// Candidate prediction
// ---------------------------------------------------------------------------

/// Per-agent candidate trajectories in world coordinates plus unary logits.
struct CandidateSet {
  std::vector<Trajectory> trajectories;  // K, world frame
  std::vector<double> unary_logits;      // K

  [[nodiscard]] int k() const { return static_cast<int>(trajectories.size()); }
  [[nodiscard]] int top_index() const { return argmax_lowest(unary_logits); }
};

/// Tape-side handles for one agent's prediction.
struct AgentCandidateVars {
  ad::Var unary_logits;              // K
  std::vector<ad::Var> agent_frame;  // K flat trajectories, 2 * kFutureSteps each
  std::vector<ad::Var> world;        // same, in world coordinates
};

inline void add_backbone_params(ad::ParamStore& store, const ModelConfig& cfg) {
  ad::add_mlp_params(store, "backbone.offset.",
                     {kFeatureDim, cfg.backbone_hidden, cfg.k * kOffsetDim});
  ad::add_mlp_params(store, "backbone.logits.", {kFeatureDim, cfg.backbone_hidden, cfg.k});
}

/// Scale factor applied to an agent's anchor templates: templates are built
/// at the type's nominal speed and stretched to the agent's current speed, so
/// an untrained model already respects each agent's kinematic state.
inline double anchor_speed_scale(const AgentTrack& track, const ModelConfig& cfg) {
  const double nominal = track.type == AgentType::vehicle     ? cfg.anchor_speed_vehicle
                         : track.type == AgentType::pedestrian ? cfg.anchor_speed_pedestrian
                                                               : cfg.anchor_speed_cyclist;
  return std::clamp(track.current_speed() / nominal, 0.1, 1.8);
}

/// The agent-frame anchor trajectory the backbone offsets are added to.
inline std::vector<double> agent_anchor_flat(const AgentTrack& track, const AnchorSet& anchors,
                                             const ModelConfig& cfg, int j) {
  std::vector<double> flat = flatten(anchors.for_type(track.type)[j]);
  const double scale = anchor_speed_scale(track, cfg);
  for (double& v : flat) v *= scale;
  return flat;
}

/// Runs the backbone for every agent, recording the computation on the tape.
/// Candidate j = speed-scaled anchor j + predicted offsets (agent frame),
/// then transformed to world coordinates about the agent's current pose.
inline std::vector<AgentCandidateVars> predict_candidates(ad::Tape& tape, const Scene& scene,
                                                          const AnchorSet& anchors,
                                                          const ModelConfig& cfg,
                                                          const ad::ParamStore& params) {
  if (anchors.k != cfg.k) throw std::invalid_argument("anchor set K does not match model K");
  const auto offset_layers = ad::mlp_layer_names("backbone.offset.", 2);
  const auto logits_layers = ad::mlp_layer_names("backbone.logits.", 2);

  std::vector<AgentCandidateVars> out;
  out.reserve(scene.agents.size());
  for (const auto& track : scene.agents) {
    const ad::Var feat = tape.constant(extract_features(track));
    const ad::Var offsets = ad::mlp_forward(tape, feat, offset_layers, params);
    AgentCandidateVars vars;
    vars.unary_logits = ad::mlp_forward(tape, feat, logits_layers, params);

    const Pose2& pose = track.current_pose();
    const double c = std::cos(pose.yaw);
    const double s = std::sin(pose.yaw);
    const ad::Var pinned_origin = tape.constant(std::vector<double>{0.0, 0.0});
    for (int j = 0; j < cfg.k; ++j) {
      const ad::Var anchor = tape.constant(agent_anchor_flat(track, anchors, cfg, j));
      const ad::Var off = tape.slice(offsets, j * kOffsetDim, kOffsetDim);
      const ad::Var padded = tape.concat({pinned_origin, off});
      const ad::Var local = tape.add(anchor, padded);
      vars.agent_frame.push_back(local);
      vars.world.push_back(tape.rigid(local, c, s, pose.x, pose.y));
    }
    out.push_back(std::move(vars));
  }
  return out;
}

inline CandidateSet extract_candidate_set(const ad::Tape& tape, const AgentCandidateVars& vars) {
  CandidateSet set;
  set.unary_logits = tape.val(vars.unary_logits);
  set.trajectories.reserve(vars.world.size());
  for (const auto& w : vars.world)
    set.trajectories.push_back({unflatten(tape.val(w)), Frame::world_frame()});
  return set;
}

inline std::vector<CandidateSet> extract_candidate_sets(
    const ad::Tape& tape, const std::vector<AgentCandidateVars>& vars) {
  std::vector<CandidateSet> out;
  out.reserve(vars.size());
  for (const auto& v : vars) out.push_back(extract_candidate_set(tape, v));
  return out;
}

}  // namespace jointpred
