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

// Synthetic interactive scenes. Tracks are sampled from constant-curvature
// paths driven by piecewise-constant-acceleration speed profiles, so
// histories and futures are kinematically smooth by construction. In the
// interactive kinds exactly one agent of a conflicting pair yields (chosen by
// a seeded coin), which makes the ground-truth futures jointly consistent.

#pragma once

#include <cmath>
#include <random>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "jointpred/geometry.hpp"
#include "jointpred/numeric.hpp"
#include "jointpred/scene.hpp"

namespace jointpred {

// ---------------------------------------------------------------------------
// Kinematic primitives
// ---------------------------------------------------------------------------

/// Piecewise constant-curvature path. Arc length beyond the listed segments
/// continues straight along the final heading.
class ArcPath {
 public:
  struct Segment {
    double curvature = 0.0;  // 1/m, positive turns left
    double length = 0.0;     // m
  };

  ArcPath(Pose2 start, std::vector<Segment> segments = {})
      : start_(start), segments_(std::move(segments)) {}

  static ArcPath straight(Pose2 start) { return ArcPath(start); }

  void add_segment(double curvature, double length) { segments_.push_back({curvature, length}); }

  [[nodiscard]] Pose2 pose_at(double s) const {
    Pose2 p = start_;
    for (const auto& seg : segments_) {
      const double ds = std::min(s, seg.length);
      p = advance(p, seg.curvature, ds);
      s -= ds;
      if (s <= 0.0) return p;
    }
    return advance(p, 0.0, s);
  }

 private:
  static Pose2 advance(const Pose2& p, double curvature, double ds) {
    if (ds <= 0.0) return p;
    if (std::abs(curvature) < 1e-12)
      return {p.x + ds * std::cos(p.yaw), p.y + ds * std::sin(p.yaw), p.yaw};
    const double yaw1 = p.yaw + curvature * ds;
    return {p.x + (std::sin(yaw1) - std::sin(p.yaw)) / curvature,
            p.y - (std::cos(yaw1) - std::cos(p.yaw)) / curvature, yaw1};
  }

  Pose2 start_;
  std::vector<Segment> segments_;
};

/// Speed profile v(t) with piecewise constant acceleration, clamped at zero
/// from below. After the last phase the speed is held constant.
class MotionProfile {
 public:
  struct Phase {
    double accel = 0.0;     // m/s^2
    double duration = 0.0;  // s
  };

  explicit MotionProfile(double v0, std::vector<Phase> phases = {})
      : v0_(v0), phases_(std::move(phases)) {}

  static MotionProfile constant(double v) { return MotionProfile(v); }

  void add_phase(double accel, double duration) { phases_.push_back({accel, duration}); }

  /// (speed, distance traveled) at time t >= 0.
  [[nodiscard]] std::pair<double, double> at(double t) const {
    double v = v0_;
    double s = 0.0;
    for (const auto& ph : phases_) {
      const double dt = std::min(t, ph.duration);
      if (dt <= 0.0) break;
      integrate(v, s, ph.accel, dt);
      t -= dt;
    }
    if (t > 0.0) s += v * t;
    return {v, s};
  }

 private:
  // Advances (v, s) by dt under acceleration a, holding v >= 0.
  static void integrate(double& v, double& s, double a, double dt) {
    if (a < 0.0 && v + a * dt < 0.0) {
      const double t_zero = v / -a;
      s += v * t_zero + 0.5 * a * t_zero * t_zero;
      v = 0.0;
      return;  // remains stopped for the rest of the phase
    }
    s += v * dt + 0.5 * a * dt * dt;
    v += a * dt;
  }

  double v0_;
  std::vector<Phase> phases_;
};

/// Samples a full track on the 10 Hz grid. The path and profile are
/// parameterized from the start of history (t = -1.0 s); future_gt[0]
/// coincides with the last history step.
inline AgentTrack make_track(int id, AgentType type, double length, double width, bool is_av,
                             const ArcPath& path, const MotionProfile& profile) {
  AgentTrack track;
  track.id = id;
  track.type = type;
  track.length = length;
  track.width = width;
  track.is_av = is_av;
  const int total_ticks = kHistorySteps + kFutureSteps - 1;  // shared tick at t = 0
  for (int k = 0; k < total_ticks; ++k) {
    const auto [v, s] = profile.at(k * kStepSeconds);
    const Pose2 pose = path.pose_at(s);
    if (k < kHistorySteps) track.history.push_back({pose, v});
    if (k >= kHistorySteps - 1) track.future_gt.push_back(pose);
  }
  track.valid_mask.assign(kFutureSteps, true);
  return track;
}

// ---------------------------------------------------------------------------
// Scenario generation
// ---------------------------------------------------------------------------

enum class ScenarioKind { intersection, merge, queue, random_mix };

inline const char* scenario_kind_name(ScenarioKind k) {
  switch (k) {
    case ScenarioKind::intersection: return "intersection";
    case ScenarioKind::merge: return "merge";
    case ScenarioKind::queue: return "queue";
    case ScenarioKind::random_mix: return "random-mix";
  }
  return "intersection";
}

inline ScenarioKind scenario_kind_from_name(const std::string& s) {
  if (s == "intersection") return ScenarioKind::intersection;
  if (s == "merge") return ScenarioKind::merge;
  if (s == "queue") return ScenarioKind::queue;
  if (s == "random-mix" || s == "random_mix") return ScenarioKind::random_mix;
  throw std::invalid_argument("unknown scenario kind: " + s);
}

struct GeneratorParams {
  int num_agents = 8;  // random_mix only; other kinds fix their own counts
};

namespace detail {

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline std::pair<double, double> vehicle_dims(std::mt19937_64& rng) {
  return {uniform(rng, 4.4, 5.2), uniform(rng, 1.8, 2.2)};
}

/// Rotates and translates every pose of the finished scene, exercising the
/// agent-centric normalization downstream.
inline void apply_world_offset(Scene& scene, std::mt19937_64& rng) {
  const Pose2 offset{uniform(rng, -60.0, 60.0), uniform(rng, -60.0, 60.0),
                     uniform(rng, -std::numbers::pi, std::numbers::pi)};
  const RigidTransform tf = RigidTransform::frame_to_world(offset);
  for (auto& agent : scene.agents) {
    for (auto& h : agent.history) {
      const Vec2 p = tf.apply(h.pose.position());
      h.pose = Pose2(p[0], p[1], h.pose.yaw + offset.yaw);
    }
    for (auto& f : agent.future_gt) {
      const Vec2 p = tf.apply(f.position());
      f = Pose2(p[0], p[1], f.yaw + offset.yaw);
    }
  }
}

/// A vehicle that brakes to a stop (or a crawl) `margin` meters before the
/// conflict point located `dist_at_t0` ahead of its t=0 position.
inline MotionProfile yield_profile(std::mt19937_64& rng, double v, double dist_at_t0,
                                   double margin, bool crawl) {
  const double brake_start = uniform(rng, 0.2, 0.6);  // relative to t = 0
  const double target = dist_at_t0 - margin - v * brake_start;
  // A crawl may creep at most margin - 3 m, keeping the conflict point clear.
  const double v_end = crawl ? uniform(rng, 0.25, std::min(1.0, (margin - 3.0) / 8.0)) : 0.0;
  // Brake so that the speed reaches v_end exactly when `target` is covered.
  const double decel = (v * v - v_end * v_end) / (2.0 * target);
  const double brake_time = (v - v_end) / decel;
  MotionProfile prof(v);
  prof.add_phase(0.0, 1.0 + brake_start);
  prof.add_phase(-decel, brake_time);
  return prof;  // holds v_end afterwards
}

inline Scene intersection_scene(std::uint64_t seed) {
  std::mt19937_64 rng(mix_seed(seed, 0xA11CE));
  Scene scene;
  scene.scene_id = "intersection-" + std::to_string(seed);
  scene.rng_seed = seed;

  const int yielder = std::uniform_int_distribution<int>(0, 1)(rng);
  const bool turn_style = std::uniform_int_distribution<int>(0, 1)(rng) == 1;
  const bool crawl = std::uniform_int_distribution<int>(0, 1)(rng) == 1;
  const int av = std::uniform_int_distribution<int>(0, 1)(rng);
  const double margin = uniform(rng, 6.5, 7.5);

  for (int i = 0; i < 2; ++i) {
    const double v = uniform(rng, 9.0, 11.0);
    // The yielder starts a little further out; who yields stays a coin flip,
    // so the histories alone cannot reveal it.
    const double dist = i == yielder ? uniform(rng, 23.0, 25.0) : uniform(rng, 18.0, 24.0);
    const double lateral = uniform(rng, -0.3, 0.3);
    // Agent 0 approaches from the west, agent 1 from the south.
    const Pose2 start = i == 0 ? Pose2{-(dist + v), lateral, 0.0}
                               : Pose2{-lateral, -(dist + v), std::numbers::pi / 2.0};
    ArcPath path = ArcPath::straight(start);
    MotionProfile profile = MotionProfile::constant(v);
    if (i == yielder) {
      // Yield either by braking short of the crossing or by turning off to
      // the right before reaching it.
      bool turned = false;
      if (turn_style) {
        const double brake_start = uniform(rng, 0.15, 0.25);
        const double v_turn = uniform(rng, 4.5, 5.0);
        const double decel = uniform(rng, 4.0, 4.5);
        const double brake_dist = (v * v - v_turn * v_turn) / (2.0 * decel);
        // The arc apex must stay 4.5 m short of the other lane.
        const double r_max = dist - v * brake_start - brake_dist - 4.5;
        if (r_max > 7.0) {
          const double radius = std::min(uniform(rng, 9.5, 10.5), r_max);
          path = ArcPath(start, {{0.0, v + v * brake_start + brake_dist},
                                 {-1.0 / radius, std::numbers::pi / 2.0 * radius}});
          profile = MotionProfile(v, {{0.0, 1.0 + brake_start},
                                      {-decel, (v - v_turn) / decel}});
          turned = true;
        }
      }
      if (!turned) profile = yield_profile(rng, v, dist, margin, crawl);
    }
    const auto [len, wid] = vehicle_dims(rng);
    scene.agents.push_back(
        make_track(i, AgentType::vehicle, len, wid, i == av, path, profile));
  }
  apply_world_offset(scene, rng);
  validate_scene(scene);
  return scene;
}

inline Scene merge_scene(std::uint64_t seed) {
  std::mt19937_64 rng(mix_seed(seed, 0x3E26E));
  Scene scene;
  scene.scene_id = "merge-" + std::to_string(seed);
  scene.rng_seed = seed;

  // The ramp vehicle always yields; a stop any closer to the merge point
  // would put its box inside the main lane.
  const int ramp = std::uniform_int_distribution<int>(0, 1)(rng);
  const int av = std::uniform_int_distribution<int>(0, 1)(rng);
  const double angle = uniform(rng, 0.3, 0.45);  // ramp approach angle
  const double margin = 3.6 / std::sin(angle) + uniform(rng, 0.3, 1.0);

  for (int i = 0; i < 2; ++i) {
    const double v = uniform(rng, 8.0, 11.0);
    const double dist = uniform(rng, 22.0, 30.0);  // along-path distance to merge point
    const auto [len, wid] = vehicle_dims(rng);
    ArcPath path = [&] {
      if (i != ramp) return ArcPath::straight(Pose2{-(dist + v), 0.0, 0.0});
      // Ramp vehicle: straight approach, then a short arc onto the main lane.
      const double arc_len = 8.0;
      const Pose2 start{-(dist + v) * std::cos(angle), (dist + v) * std::sin(angle), -angle};
      ArcPath p(start);
      p.add_segment(0.0, dist + v - arc_len);
      p.add_segment(angle / arc_len, arc_len);
      return p;
    }();
    const MotionProfile profile = i == ramp ? yield_profile(rng, v, dist, margin, /*crawl=*/false)
                                            : MotionProfile::constant(v);
    scene.agents.push_back(
        make_track(i, AgentType::vehicle, len, wid, i == av, path, profile));
  }
  apply_world_offset(scene, rng);
  validate_scene(scene);
  return scene;
}

inline Scene queue_scene(std::uint64_t seed) {
  std::mt19937_64 rng(mix_seed(seed, 0x40E0E));
  Scene scene;
  scene.scene_id = "queue-" + std::to_string(seed);
  scene.rng_seed = seed;

  const int n = std::uniform_int_distribution<int>(3, 6)(rng);
  const int av = std::uniform_int_distribution<int>(0, n - 1)(rng);
  const double v = uniform(rng, 4.0, 7.0);
  const double lead_brake_dist = uniform(rng, 6.0, 12.0);

  // Lead vehicle stops first; each follower stops with a positive bumper gap.
  double stop_x = v + lead_brake_dist;
  double start_x = 0.0;
  for (int i = 0; i < n; ++i) {
    const auto [len, wid] = vehicle_dims(rng);
    const double travel = stop_x - start_x;
    MotionProfile prof(v);
    prof.add_phase(0.0, 1.0);                                     // history at speed
    prof.add_phase(-(v * v) / (2.0 * (travel - v)), 8.0);         // brake to the target
    scene.agents.push_back(make_track(i, AgentType::vehicle, len, wid, i == av,
                                      ArcPath::straight(Pose2{start_x, 0.0, 0.0}), prof));
    const double gap = uniform(rng, 8.0, 12.0);
    start_x -= gap + len;
    stop_x -= uniform(rng, 0.8, 2.2) + len;
  }
  apply_world_offset(scene, rng);
  validate_scene(scene);
  return scene;
}

inline Scene random_mix_scene(std::uint64_t seed, const GeneratorParams& params) {
  std::mt19937_64 rng(mix_seed(seed, 0x3A2D0));
  Scene scene;
  scene.scene_id = "random-mix-" + std::to_string(seed);
  scene.rng_seed = seed;

  const int n = params.num_agents;
  const int av = std::uniform_int_distribution<int>(0, n - 1)(rng);
  for (int i = 0; i < n; ++i) {
    // Parallel corridors keep ground-truth futures disjoint for any speed mix.
    const double lane_y = 7.0 * i + uniform(rng, -0.8, 0.8);
    const double x0 = uniform(rng, -30.0, 30.0);
    const int kind_draw = std::uniform_int_distribution<int>(0, 9)(rng);
    AgentType type = AgentType::vehicle;
    double len = 4.8, wid = 2.0, v = uniform(rng, 5.0, 12.0);
    if (kind_draw == 8) {
      type = AgentType::pedestrian;
      len = wid = uniform(rng, 0.6, 0.9);
      v = uniform(rng, 0.8, 1.8);
    } else if (kind_draw == 9) {
      type = AgentType::cyclist;
      len = uniform(rng, 1.6, 2.0);
      wid = 0.6;
      v = uniform(rng, 3.0, 6.0);
    } else {
      std::tie(len, wid) = vehicle_dims(rng);
    }
    MotionProfile prof(v);
    switch (std::uniform_int_distribution<int>(0, 3)(rng)) {
      case 0: break;  // constant speed
      case 1:         // brake to a stop shortly after t = 0
        prof.add_phase(0.0, uniform(rng, 1.0, 1.6));
        prof.add_phase(-uniform(rng, 1.5, 3.0), 8.0);
        break;
      case 2:  // accelerate, then hold
        prof.add_phase(0.0, 1.0);
        prof.add_phase(uniform(rng, 0.5, 1.5), uniform(rng, 2.0, 4.0));
        break;
      default:  // slow down to half speed
        prof.add_phase(0.0, 1.0);
        prof.add_phase(-v / 8.0, 4.0);
        break;
    }
    scene.agents.push_back(make_track(i, type, len, wid, i == av,
                                      ArcPath::straight(Pose2{x0, lane_y, 0.0}), prof));
  }
  apply_world_offset(scene, rng);
  validate_scene(scene);
  return scene;
}

}  // namespace detail

/// Deterministic scene synthesis: equal (kind, seed, params) yield equal scenes.
inline Scene generate_scene(ScenarioKind kind, std::uint64_t seed,
                            const GeneratorParams& params = {}) {
  if (params.num_agents < 1 || params.num_agents > kMaxAgents)
    throw std::invalid_argument("generator params: num_agents " +
                                std::to_string(params.num_agents) + " outside [1, " +
                                std::to_string(kMaxAgents) + "]");
  switch (kind) {
    case ScenarioKind::intersection: return detail::intersection_scene(seed);
    case ScenarioKind::merge: return detail::merge_scene(seed);
    case ScenarioKind::queue: return detail::queue_scene(seed);
    case ScenarioKind::random_mix: return detail::random_mix_scene(seed, params);
  }
  throw std::invalid_argument("unknown scenario kind");
}

}  // namespace jointpred
