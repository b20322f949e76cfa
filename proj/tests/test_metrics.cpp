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

#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <random>

#include "jointpred/exact_joint.hpp"
#include "jointpred/metrics.hpp"
#include "jointpred/model.hpp"
#include "jointpred/scenario_gen.hpp"

using namespace jointpred;

namespace {

// Exact convex-polygon intersection oracle, independent of the SAT route:
// boxes intersect iff one contains a corner of the other or any edges cross.
std::array<Vec2, 4> box_corners(const OrientedBox& b) {
  const double c = std::cos(b.yaw), s = std::sin(b.yaw);
  const double hl = 0.5 * b.length, hw = 0.5 * b.width;
  std::array<Vec2, 4> out;
  const double sx[4] = {1.0, 1.0, -1.0, -1.0};
  const double sy[4] = {1.0, -1.0, -1.0, 1.0};
  for (int i = 0; i < 4; ++i)
    out[i] = {b.center[0] + c * sx[i] * hl - s * sy[i] * hw,
              b.center[1] + s * sx[i] * hl + c * sy[i] * hw};
  return out;
}

bool point_in_box(const Vec2& p, const OrientedBox& b) {
  const Vec2 local = to_agent_frame(p, Pose2{b.center[0], b.center[1], b.yaw});
  return std::abs(local[0]) <= 0.5 * b.length + 1e-12 &&
         std::abs(local[1]) <= 0.5 * b.width + 1e-12;
}

double cross(const Vec2& o, const Vec2& a, const Vec2& b) {
  return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
}

bool segments_intersect(const Vec2& a1, const Vec2& a2, const Vec2& b1, const Vec2& b2) {
  const double d1 = cross(b1, b2, a1);
  const double d2 = cross(b1, b2, a2);
  const double d3 = cross(a1, a2, b1);
  const double d4 = cross(a1, a2, b2);
  if (((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) && ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0)))
    return true;
  auto on_segment = [](const Vec2& p, const Vec2& q, const Vec2& r) {
    return std::min(p[0], r[0]) - 1e-12 <= q[0] && q[0] <= std::max(p[0], r[0]) + 1e-12 &&
           std::min(p[1], r[1]) - 1e-12 <= q[1] && q[1] <= std::max(p[1], r[1]) + 1e-12;
  };
  if (d1 == 0 && on_segment(b1, a1, b2)) return true;
  if (d2 == 0 && on_segment(b1, a2, b2)) return true;
  if (d3 == 0 && on_segment(a1, b1, a2)) return true;
  if (d4 == 0 && on_segment(a1, b2, a2)) return true;
  return false;
}

bool oracle_overlap(const OrientedBox& a, const OrientedBox& b) {
  const auto ca = box_corners(a);
  const auto cb = box_corners(b);
  for (const auto& p : ca)
    if (point_in_box(p, b)) return true;
  for (const auto& p : cb)
    if (point_in_box(p, a)) return true;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      if (segments_intersect(ca[i], ca[(i + 1) % 4], cb[j], cb[(j + 1) % 4])) return true;
  return false;
}

Trajectory line(Vec2 start, Vec2 step, int n = kFutureSteps) {
  Trajectory t;
  t.waypoints.resize(n);
  for (int i = 0; i < n; ++i) t.waypoints[i] = {start[0] + step[0] * i, start[1] + step[1] * i};
  return t;
}

}  // namespace

TEST_CASE("box overlap basics") {
  const OrientedBox a{{0.0, 0.0}, 0.0, 2.0, 1.0};
  CHECK(boxes_overlap(a, a));  // identical boxes

  const OrientedBox far{{10.0, 0.0}, 0.0, 1.0, 1.0};
  CHECK_FALSE(boxes_overlap({{0.0, 0.0}, 0.0, 1.0, 1.0}, far));

  // touching unit squares count as overlapping
  CHECK(boxes_overlap({{0.0, 0.0}, 0.0, 1.0, 1.0}, {{1.0, 0.0}, 0.0, 1.0, 1.0}));
  // symmetry
  const OrientedBox tilted{{1.2, 0.3}, 0.6, 3.0, 1.2};
  CHECK(boxes_overlap(a, tilted) == boxes_overlap(tilted, a));
}

TEST_CASE("separating-axis test agrees with the polygon oracle on random pairs") {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> pos(-4.0, 4.0);
  std::uniform_real_distribution<double> ang(-3.14, 3.14);
  std::uniform_real_distribution<double> dim(0.4, 5.0);
  int overlaps = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const OrientedBox a{{pos(rng), pos(rng)}, ang(rng), dim(rng), dim(rng)};
    const OrientedBox b{{pos(rng), pos(rng)}, ang(rng), dim(rng), dim(rng)};
    const bool sat = boxes_overlap(a, b);
    const bool oracle = oracle_overlap(a, b);
    INFO("trial " << trial);
    REQUIRE(sat == oracle);
    overlaps += sat ? 1 : 0;
  }
  CHECK(overlaps > 100);  // the sample hits both outcomes
  CHECK(overlaps < 900);
}

TEST_CASE("trajectory overlap basics") {
  const BoxDims car{4.8, 2.0};
  const Trajectory a = line({0.0, 0.0}, {1.0, 0.0});
  CHECK(trajectories_overlap(a, a, car, car));  // same trajectory

  const Trajectory parallel = line({0.0, 10.0}, {1.0, 0.0});
  CHECK_FALSE(trajectories_overlap(a, parallel, car, car));  // 10 m apart, 2 m wide

  CHECK(trajectories_overlap(a, parallel, car, car) ==
        trajectories_overlap(parallel, a, car, car));
}

TEST_CASE("crossing paths timed to miss each other do not overlap") {
  const BoxDims car{4.4, 1.8};
  // both cross (40, 0): the eastbound car passes first, the northbound car
  // arrives 30 steps later
  const Trajectory east = line({10.0, 0.0}, {1.0, 0.0});
  const Trajectory north = line({40.0, -60.0}, {0.0, 1.0});
  CHECK_FALSE(trajectories_overlap(east, north, car, car));

  // same paths timed to meet: northbound starts 30 m closer
  const Trajectory north_now = line({40.0, -30.0}, {0.0, 1.0});
  CHECK(trajectories_overlap(east, north_now, car, car));
}

TEST_CASE("overlap metric counts colliding pairs") {
  GeneratorParams params;
  params.num_agents = 5;
  Scene scene = generate_scene(ScenarioKind::random_mix, 19, params);
  const Model model = make_model({.k = 2}, 1);
  auto pred = predict_scene(model, scene, GraphType::none, PotentialMode::none);

  // disjoint corridors: no overlap at the decode
  const auto clean = overlap_metric(scene, pred.decode, pred.candidates);
  CHECK(clean.all == 0);
  CHECK(clean.av == 0);

  // plant exactly one collision: agent 1 drives straight through agent 2's lane slot
  auto planted = pred.candidates;
  const int sel1 = pred.decode.selected[1];
  const int sel2 = pred.decode.selected[2];
  planted[1].trajectories[sel1] = planted[2].trajectories[sel2];
  const auto one = overlap_metric(scene, pred.decode, planted);
  CHECK(one.all == 1);
  const int av = scene.av_index();
  CHECK(one.av == ((av == 1 || av == 2) ? 1 : 0));
}

TEST_CASE("overlap metric is invariant under agent reordering") {
  const Scene scene = generate_scene(ScenarioKind::intersection, 33);
  const Model model = make_model({.k = 2}, 2);
  const auto pred = predict_scene(model, scene, GraphType::none, PotentialMode::none);
  auto planted = pred.candidates;
  planted[0].trajectories[pred.decode.selected[0]] =
      planted[1].trajectories[pred.decode.selected[1]];
  const auto base = overlap_metric(scene, pred.decode, planted);

  Scene swapped = scene;
  std::swap(swapped.agents[0], swapped.agents[1]);
  auto planted_swapped = planted;
  std::swap(planted_swapped[0], planted_swapped[1]);
  JointDecode decode_swapped = pred.decode;
  std::swap(decode_swapped.selected[0], decode_swapped.selected[1]);
  const auto flipped = overlap_metric(swapped, decode_swapped, planted_swapped);
  CHECK(base.all == flipped.all);
  CHECK(base.av == flipped.av);
}

TEST_CASE("marginal metrics hand cases") {
  const Scene scene = generate_scene(ScenarioKind::intersection, 3);
  const auto gt = future_positions(scene.agents[0]);
  const auto& mask = scene.agents[0].valid_mask;

  CandidateSet exact;
  exact.trajectories = {line({0.0, 50.0}, {0.5, 0.0}), Trajectory{gt, Frame::world_frame()}};
  exact.unary_logits = {0.0, 1.0};
  const auto hit = marginal_metrics(exact, softmax(exact.unary_logits), gt, mask, 2.0);
  CHECK(hit.min_ade == Catch::Approx(0.0).margin(1e-12));
  CHECK(hit.min_fde == Catch::Approx(0.0).margin(1e-12));
  CHECK_FALSE(hit.miss);
  CHECK(hit.ap == 1.0);  // ranked first by probability

  // every candidate offset by a constant 1 m
  CandidateSet off;
  Trajectory shifted{gt, Frame::world_frame()};
  for (auto& w : shifted.waypoints) w[1] += 1.0;
  off.trajectories = {shifted, shifted};
  off.unary_logits = {0.0, 0.0};
  const auto one = marginal_metrics(off, softmax(off.unary_logits), gt, mask, 2.0);
  CHECK(one.min_ade == Catch::Approx(1.0).margin(1e-9));
  CHECK(one.min_fde == Catch::Approx(1.0).margin(1e-9));
  CHECK_FALSE(one.miss);
}

TEST_CASE("marginal metrics match an independent recomputation over 50 scenes") {
  const Model model = make_model({.k = 4}, 9);
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const Scene scene = generate_scene(static_cast<ScenarioKind>(seed % 4), seed);
    const auto pred = predict_scene(model, scene, GraphType::none, PotentialMode::none);
    for (int i = 0; i < scene.num_agents(); ++i) {
      const auto gt = future_positions(scene.agents[i]);
      const auto& mask = scene.agents[i].valid_mask;
      const auto probs = pred.beliefs.node_probs(i);
      const auto got = marginal_metrics(pred.candidates[i], probs, gt, mask, 2.0);

      // independent recomputation, straight from the definitions
      double best_ade = 1e300, best_fde = 1e300;
      std::vector<double> fde_per(4);
      for (int j = 0; j < 4; ++j) {
        double sum = 0.0;
        int count = 0;
        for (int t = 0; t < kFutureSteps; ++t) {
          if (!mask[t]) continue;
          sum += std::hypot(pred.candidates[i].trajectories[j].waypoints[t][0] - gt[t][0],
                            pred.candidates[i].trajectories[j].waypoints[t][1] - gt[t][1]);
          ++count;
        }
        int last = kFutureSteps - 1;
        while (last >= 0 && !mask[last]) --last;
        fde_per[j] = std::hypot(pred.candidates[i].trajectories[j].waypoints[last][0] - gt[last][0],
                                pred.candidates[i].trajectories[j].waypoints[last][1] -
                                    gt[last][1]);
        best_ade = std::min(best_ade, sum / count);
        best_fde = std::min(best_fde, fde_per[j]);
      }
      REQUIRE(std::abs(got.min_ade - best_ade) < 1e-9);
      REQUIRE(std::abs(got.min_fde - best_fde) < 1e-9);
      REQUIRE(got.miss == (best_fde > 2.0));

      std::vector<int> order{0, 1, 2, 3};
      std::stable_sort(order.begin(), order.end(),
                       [&](int x, int y) { return probs[x] > probs[y]; });
      double ap = 0.0;
      for (int r = 0; r < 4; ++r)
        if (fde_per[order[r]] <= 2.0) {
          ap = 1.0 / (r + 1);
          break;
        }
      REQUIRE(std::abs(got.ap - ap) < 1e-12);
    }
  }
}

TEST_CASE("minADE never increases when candidates are appended") {
  const Scene scene = generate_scene(ScenarioKind::merge, 6);
  const auto gt = future_positions(scene.agents[0]);
  const auto& mask = scene.agents[0].valid_mask;
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> jitter(-5.0, 5.0);

  CandidateSet set;
  double prev = 1e300;
  for (int j = 0; j < 8; ++j) {
    Trajectory t{gt, Frame::world_frame()};
    for (auto& w : t.waypoints) {
      w[0] += jitter(rng);
      w[1] += jitter(rng);
    }
    set.trajectories.push_back(t);
    set.unary_logits.push_back(0.0);
    const auto m = marginal_metrics(set, softmax(set.unary_logits), gt, mask, 2.0);
    CHECK(m.min_ade <= prev + 1e-12);
    prev = m.min_ade;
  }
}

TEST_CASE("pair metrics: ground-truth joint in the top set gives zero error") {
  const Scene scene = generate_scene(ScenarioKind::intersection, 14);
  CandidateSet ci, cj;
  ci.trajectories = {Trajectory{future_positions(scene.agents[0]), Frame::world_frame()},
                     line({0.0, 100.0}, {1.0, 0.0})};
  ci.unary_logits = {1.0, 0.0};
  cj.trajectories = {Trajectory{future_positions(scene.agents[1]), Frame::world_frame()},
                     line({0.0, -100.0}, {1.0, 0.0})};
  cj.unary_logits = {1.0, 0.0};

  Beliefs beliefs;
  beliefs.k = 2;
  beliefs.node_logits = {ci.unary_logits, cj.unary_logits};
  for (auto& row : beliefs.node_logits) normalize_logits(row);

  const auto sample =
      pair_joint_metrics(scene, beliefs, {ci, cj}, Edge(0, 1), 4, 2.0);
  REQUIRE(sample.has_value());
  CHECK(sample->min_sade == Catch::Approx(0.0).margin(1e-12));
  CHECK(sample->min_sfde == Catch::Approx(0.0).margin(1e-12));
  CHECK_FALSE(sample->smiss);
}

TEST_CASE("pairs beyond the interaction filter are excluded") {
  GeneratorParams params;
  params.num_agents = 2;
  const Scene scene = generate_scene(ScenarioKind::random_mix, 25, params);
  // random-mix corridors sit far apart unless agents share a lane
  double min_dist = 1e300;
  for (int t = 0; t < kFutureSteps; ++t)
    min_dist = std::min(min_dist, distance(scene.agents[0].future_gt[t].position(),
                                           scene.agents[1].future_gt[t].position()));
  if (min_dist > 50.0) {
    CHECK_FALSE(gt_pair_interacts(scene.agents[0], scene.agents[1]));
  }
  // an intersection pair passes the 10 m filter
  const Scene inter = generate_scene(ScenarioKind::intersection, 2);
  CHECK(gt_pair_interacts(inter.agents[0], inter.agents[1]));
}

TEST_CASE("pair metrics from beliefs equal oracle top-6 on two-agent trees") {
  const Model model = make_model({.k = 3}, 8);
  std::mt19937_64 rng(31);
  std::normal_distribution<double> logit(0.0, 1.0);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Scene scene = generate_scene(ScenarioKind::intersection, seed);
    auto pred = predict_scene(model, scene, GraphType::fully_connected, PotentialMode::none);

    // random potentials on the real candidate geometry
    UnaryLogits unary(2, std::vector<double>(3));
    for (auto& u : unary)
      for (double& x : u) x = logit(rng);
    PairTableMap tables;
    PairPotentialTable table{Edge(0, 1), 3, std::vector<double>(9)};
    for (double& x : table.logits) x = logit(rng);
    tables[Edge(0, 1)] = table;
    InteractionGraph graph{2, {Edge(0, 1)}, GraphType::dynamic};

    const Beliefs beliefs = sum_product(graph, unary, tables, 3);
    const auto via_bp = pair_joint_metrics(scene, beliefs, pred.candidates, Edge(0, 1), 6, 2.0);

    // oracle route: exact pair marginal, same tie-break, direct evaluation
    const ExactJoint joint = brute_force_joint(graph, unary, tables);
    auto exact = joint.pair_marginal(0, 1);
    std::vector<int> order(9);
    for (int c = 0; c < 9; ++c) order[c] = c;
    std::stable_sort(order.begin(), order.end(),
                     [&](int x, int y) { return exact[x] > exact[y]; });
    double min_sade = 1e300, min_sfde = 1e300;
    bool smiss = false;
    for (int r = 0; r < 6; ++r) {
      const int a = order[r] / 3, b = order[r] % 3;
      const auto da = displacement(pred.candidates[0].trajectories[a].waypoints,
                                   future_positions(scene.agents[0]), scene.agents[0].valid_mask);
      const auto db = displacement(pred.candidates[1].trajectories[b].waypoints,
                                   future_positions(scene.agents[1]), scene.agents[1].valid_mask);
      min_sade = std::min(min_sade, 0.5 * (da.ade + db.ade));
      min_sfde = std::min(min_sfde, 0.5 * (da.fde + db.fde));
      if (r == 0) smiss = da.fde > 2.0 || db.fde > 2.0;
    }
    REQUIRE(via_bp.has_value());
    REQUIRE(via_bp->min_sade == Catch::Approx(min_sade).margin(1e-9));
    REQUIRE(via_bp->min_sfde == Catch::Approx(min_sfde).margin(1e-9));
    REQUIRE(via_bp->smiss == smiss);
  }
}

TEST_CASE("pair minSADE is bounded below by the marginal displacement average") {
  const Model model = make_model({.k = 4}, 21);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Scene scene = generate_scene(ScenarioKind::intersection, seed);
    const auto pred = predict_scene(model, scene, GraphType::fully_connected,
                                    PotentialMode::heuristic, seed);
    const auto sample = pair_joint_metrics(scene, pred.beliefs, pred.candidates, Edge(0, 1), 6,
                                           2.0);
    if (!sample) continue;
    double floor = 0.0;
    for (int a : {0, 1}) {
      const auto m =
          marginal_metrics(pred.candidates[a], pred.beliefs.node_probs(a),
                           future_positions(scene.agents[a]), scene.agents[a].valid_mask, 2.0);
      floor += 0.5 * m.min_ade;
    }
    REQUIRE(sample->min_sade >= floor - 1e-9);
    REQUIRE(sample->min_sade >= 0.0);
  }
}

TEST_CASE("overlap metric is invariant under rigid scene transforms") {
  const Scene scene = generate_scene(ScenarioKind::intersection, 44);
  const Model model = make_model({.k = 3}, 3);
  const auto pred = predict_scene(model, scene, GraphType::none, PotentialMode::none);
  auto planted = pred.candidates;
  planted[0].trajectories[pred.decode.selected[0]] =
      planted[1].trajectories[pred.decode.selected[1]];
  const auto base = overlap_metric(scene, pred.decode, planted);

  const Pose2 offset{-300.0, 42.0, -2.7};
  const RigidTransform tf = RigidTransform::frame_to_world(offset);
  Scene moved = scene;
  for (auto& agent : moved.agents) {
    for (auto& h : agent.history) {
      const Vec2 p = tf.apply(h.pose.position());
      h.pose = Pose2(p[0], p[1], h.pose.yaw + offset.yaw);
    }
    for (auto& f : agent.future_gt) {
      const Vec2 p = tf.apply(f.position());
      f = Pose2(p[0], p[1], f.yaw + offset.yaw);
    }
  }
  auto moved_cands = planted;
  for (auto& set : moved_cands)
    for (auto& traj : set.trajectories)
      for (auto& w : traj.waypoints) w = tf.apply(w);
  const auto shifted = overlap_metric(moved, pred.decode, moved_cands);
  CHECK(base.all == shifted.all);
  CHECK(base.av == shifted.av);
}
