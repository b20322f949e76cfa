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

// Learned pairwise compatibility tables. For each candidate pair (a, b) on an
// edge the two trajectories are expressed in each other's agent frame, each
// side is embedded by a weight-shared two-layer MLP (128 then 64 units), and
// an outer MLP maps the concatenated embeddings to the scalar pair energy.
// The table stores logits, i.e. negated energies. The heuristic variant
// instead drops a -1e9 logit on every geometrically colliding cell.

#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "jointpred/autodiff.hpp"
#include "jointpred/backbone.hpp"
#include "jointpred/interaction_graph.hpp"
#include "jointpred/metrics.hpp"
#include "jointpred/scene.hpp"

namespace jointpred {

inline constexpr int kTrajFlatDim = 2 * kFutureSteps;
inline constexpr int kPairInnerHidden = 128;
inline constexpr int kPairInnerOut = 64;

inline void add_pair_params(ad::ParamStore& store) {
  ad::add_mlp_params(store, "pair.inner.",
                     {2 * kTrajFlatDim, kPairInnerHidden, kPairInnerOut});
  ad::add_mlp_params(store, "pair.outer.", {2 * kPairInnerOut, 128, 64, 1});
}

/// Projects each agent's world-frame candidates into the other agent's frame:
/// returns (s_i in j's frame, s_j in i's frame). Poses are the agents'
/// current (last-history) poses, the same anchors the backbone normalizes to.
inline std::pair<std::vector<Trajectory>, std::vector<Trajectory>> project_pair(
    const std::vector<Trajectory>& cands_i, const std::vector<Trajectory>& cands_j,
    const Pose2& pose_i, const Pose2& pose_j) {
  const RigidTransform into_j = RigidTransform::world_to_frame(pose_j);
  const RigidTransform into_i = RigidTransform::world_to_frame(pose_i);
  std::pair<std::vector<Trajectory>, std::vector<Trajectory>> out;
  out.first.reserve(cands_i.size());
  out.second.reserve(cands_j.size());
  for (const auto& t : cands_i) {
    Trajectory p;
    p.frame = Frame::agent_frame(-1);
    p.waypoints.reserve(t.waypoints.size());
    for (const auto& w : t.waypoints) p.waypoints.push_back(into_j.apply(w));
    out.first.push_back(std::move(p));
  }
  for (const auto& t : cands_j) {
    Trajectory p;
    p.frame = Frame::agent_frame(-1);
    p.waypoints.reserve(t.waypoints.size());
    for (const auto& w : t.waypoints) p.waypoints.push_back(into_i.apply(w));
    out.second.push_back(std::move(p));
  }
  return out;
}

/// Tape-side handle for one edge's learned table.
struct PairTableVar {
  Edge edge;
  int k = 0;
  ad::Var logits;  // K * K, index a * K + b
};

/// Builds the K x K learned table on the tape. Cell (a, b):
///   f_i = inner([s_j^b @ i, s_i^a]),  f_j = inner([s_i^a @ j, s_j^b])
///   logits[a, b] = -outer([f_i, f_j])
/// with the inner MLP weights shared between both sides and across cells.
inline PairTableVar compute_pair_table(ad::Tape& tape, const Edge& edge,
                                       const std::vector<AgentCandidateVars>& candidates,
                                       const Scene& scene, const ad::ParamStore& params,
                                       bool detach_trajectory_inputs = true) {
  const auto& vars_i = candidates[edge.i];
  const auto& vars_j = candidates[edge.j];
  const int k = static_cast<int>(vars_i.world.size());
  const auto inner_layers = ad::mlp_layer_names("pair.inner.", 2);
  const auto outer_layers = ad::mlp_layer_names("pair.outer.", 3);

  const Pose2& pose_i = scene.agents[edge.i].current_pose();
  const Pose2& pose_j = scene.agents[edge.j].current_pose();
  const RigidTransform into_j = RigidTransform::world_to_frame(pose_j);
  const RigidTransform into_i = RigidTransform::world_to_frame(pose_i);

  const auto input = [&](ad::Var v) { return detach_trajectory_inputs ? tape.stop_gradient(v) : v; };
  std::vector<ad::Var> i_at_j(k), j_at_i(k), own_i(k), own_j(k);
  for (int a = 0; a < k; ++a) {
    i_at_j[a] = input(tape.rigid(vars_i.world[a], into_j.cos_a, into_j.sin_a, into_j.tx,
                                 into_j.ty));
    own_i[a] = input(vars_i.agent_frame[a]);
  }
  for (int b = 0; b < k; ++b) {
    j_at_i[b] = input(tape.rigid(vars_j.world[b], into_i.cos_a, into_i.sin_a, into_i.tx,
                                 into_i.ty));
    own_j[b] = input(vars_j.agent_frame[b]);
  }

  std::vector<ad::Var> cells;
  cells.reserve(k * k);
  for (int a = 0; a < k; ++a) {
    for (int b = 0; b < k; ++b) {
      const ad::Var f_i =
          ad::mlp_forward(tape, tape.concat({j_at_i[b], own_i[a]}), inner_layers, params);
      const ad::Var f_j =
          ad::mlp_forward(tape, tape.concat({i_at_j[a], own_j[b]}), inner_layers, params);
      cells.push_back(
          tape.negate(ad::mlp_forward(tape, tape.concat({f_i, f_j}), outer_layers, params)));
    }
  }
  return {edge, k, tape.concat(cells)};
}

inline PairPotentialTable extract_pair_table(const ad::Tape& tape, const PairTableVar& var) {
  return {var.edge, var.k, tape.val(var.logits)};
}

/// Heuristic table: logit -1e9 wherever the candidate pair's swept boxes
/// overlap, 0 elsewhere.
inline PairPotentialTable heuristic_pair_table(const Edge& edge, const CandidateSet& cands_i,
                                               const CandidateSet& cands_j, const BoxDims& dims_i,
                                               const BoxDims& dims_j) {
  const int k = cands_i.k();
  PairPotentialTable table{edge, k, std::vector<double>(k * k, 0.0)};
  for (int a = 0; a < k; ++a)
    for (int b = 0; b < k; ++b)
      if (trajectories_overlap(cands_i.trajectories[a], cands_j.trajectories[b], dims_i, dims_j))
        table.logits[a * k + b] = kNegInfLogit;
  return table;
}

}  // namespace jointpred
