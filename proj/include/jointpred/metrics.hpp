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

// Evaluation metrics. Overlap counts agent pairs whose selected trajectories'
// oriented boxes intersect at any common timestep (touching counts). Marginal
// metrics are the usual minADE / minFDE / miss-rate family with a fixed 2 m
// FDE miss threshold; the mAP here is a simplified ranking score (reciprocal
// rank of the first non-miss candidate), not the WOMD definition. Pairwise
// joint metrics evaluate top-6 joint predictions for agent pairs whose
// ground-truth futures ever come within 10 m of each other.

#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include "jointpred/belief_propagation.hpp"
#include "jointpred/geometry.hpp"
#include "jointpred/scene.hpp"

namespace jointpred {

inline constexpr double kPairFilterDistance = 10.0;  // m, ground-truth proximity gate

// ---------------------------------------------------------------------------
// Oriented boxes
// ---------------------------------------------------------------------------

struct OrientedBox {
  Vec2 center{0.0, 0.0};
  double yaw = 0.0;
  double length = 1.0;
  double width = 1.0;
};

struct BoxDims {
  double length = 1.0;
  double width = 1.0;
};

/// Separating-axis test for two rectangles; touching counts as overlap.
inline bool boxes_overlap(const OrientedBox& a, const OrientedBox& b) {
  const double axes[4][2] = {
      {std::cos(a.yaw), std::sin(a.yaw)},
      {-std::sin(a.yaw), std::cos(a.yaw)},
      {std::cos(b.yaw), std::sin(b.yaw)},
      {-std::sin(b.yaw), std::cos(b.yaw)},
  };
  const double dx = b.center[0] - a.center[0];
  const double dy = b.center[1] - a.center[1];
  for (const auto& n : axes) {
    const double dist = std::abs(dx * n[0] + dy * n[1]);
    const double ra = 0.5 * a.length * std::abs(std::cos(a.yaw) * n[0] + std::sin(a.yaw) * n[1]) +
                      0.5 * a.width * std::abs(-std::sin(a.yaw) * n[0] + std::cos(a.yaw) * n[1]);
    const double rb = 0.5 * b.length * std::abs(std::cos(b.yaw) * n[0] + std::sin(b.yaw) * n[1]) +
                      0.5 * b.width * std::abs(-std::sin(b.yaw) * n[0] + std::cos(b.yaw) * n[1]);
    if (dist > ra + rb) return false;
  }
  return true;
}

/// Headings from consecutive waypoint differences. Segments shorter than
/// 1e-9 reuse the nearest defined heading (scanning forward first, then
/// backward); a fully stationary trajectory gets heading 0.
inline std::vector<double> derive_headings(const std::vector<Vec2>& waypoints) {
  const int n = static_cast<int>(waypoints.size());
  std::vector<double> headings(n, std::numeric_limits<double>::quiet_NaN());
  for (int t = 0; t + 1 < n; ++t) {
    const double dx = waypoints[t + 1][0] - waypoints[t][0];
    const double dy = waypoints[t + 1][1] - waypoints[t][1];
    if (std::hypot(dx, dy) > 1e-9) headings[t] = std::atan2(dy, dx);
  }
  if (n > 1) headings[n - 1] = headings[n - 2];  // last point reuses the final segment
  double last = 0.0;
  bool seen = false;
  for (int t = n - 1; t >= 0; --t)  // backfill leading gaps from the next defined heading
    if (!std::isnan(headings[t])) {
      last = headings[t];
      seen = true;
    } else if (seen) {
      headings[t] = last;
    }
  last = 0.0;
  for (int t = 0; t < n; ++t) {  // forward fill the rest
    if (std::isnan(headings[t]))
      headings[t] = last;
    else
      last = headings[t];
  }
  return headings;
}

inline OrientedBox box_at(const std::vector<Vec2>& waypoints, const std::vector<double>& headings,
                          int t, const BoxDims& dims) {
  return {waypoints[t], headings[t], dims.length, dims.width};
}

/// True iff the two swept boxes intersect at any common timestep.
inline bool trajectories_overlap(const Trajectory& traj_i, const Trajectory& traj_j,
                                 const BoxDims& dims_i, const BoxDims& dims_j) {
  const int n = static_cast<int>(std::min(traj_i.waypoints.size(), traj_j.waypoints.size()));
  const auto head_i = derive_headings(traj_i.waypoints);
  const auto head_j = derive_headings(traj_j.waypoints);
  const double reach = 0.5 * (std::hypot(dims_i.length, dims_i.width) +
                              std::hypot(dims_j.length, dims_j.width));
  for (int t = 0; t < n; ++t) {
    if (distance(traj_i.waypoints[t], traj_j.waypoints[t]) > reach) continue;
    if (boxes_overlap(box_at(traj_i.waypoints, head_i, t, dims_i),
                      box_at(traj_j.waypoints, head_j, t, dims_j)))
      return true;
  }
  return false;
}

// ---------------------------------------------------------------------------
// Displacement helpers
// ---------------------------------------------------------------------------

struct DisplacementStats {
  double ade = 0.0;
  double fde = 0.0;
  bool valid = false;
};

inline DisplacementStats displacement(const std::vector<Vec2>& candidate,
                                      const std::vector<Vec2>& gt,
                                      const std::vector<bool>& valid_mask) {
  DisplacementStats out;
  double sum = 0.0;
  int count = 0;
  int last_valid = -1;
  const int n = static_cast<int>(std::min(candidate.size(), gt.size()));
  for (int t = 0; t < n; ++t) {
    if (!valid_mask[t]) continue;
    sum += distance(candidate[t], gt[t]);
    ++count;
    last_valid = t;
  }
  if (count == 0) return out;
  out.ade = sum / count;
  out.fde = distance(candidate[last_valid], gt[last_valid]);
  out.valid = true;
  return out;
}

// ---------------------------------------------------------------------------
// Overlap metric
// ---------------------------------------------------------------------------

struct OverlapCount {
  int all = 0;
  int av = 0;
};

/// Counts unordered agent pairs whose selected trajectories overlap; the AV
/// variant keeps only pairs that include the AV.
inline OverlapCount overlap_metric(const Scene& scene, const JointDecode& decode,
                                   const std::vector<CandidateSet>& candidates) {
  const int n = scene.num_agents();
  if (static_cast<int>(decode.selected.size()) != n)
    throw std::invalid_argument("overlap_metric: decode does not cover every agent");
  OverlapCount count;
  const int av = scene.av_index();
  for (int i = 0; i < n; ++i) {
    const auto& ti = candidates[i].trajectories[decode.selected[i]];
    const BoxDims di{scene.agents[i].length, scene.agents[i].width};
    for (int j = i + 1; j < n; ++j) {
      const auto& tj = candidates[j].trajectories[decode.selected[j]];
      const BoxDims dj{scene.agents[j].length, scene.agents[j].width};
      if (trajectories_overlap(ti, tj, di, dj)) {
        ++count.all;
        if (i == av || j == av) ++count.av;
      }
    }
  }
  return count;
}

// ---------------------------------------------------------------------------
// Marginal metrics
// ---------------------------------------------------------------------------

struct MarginalSample {
  double min_ade = 0.0;
  double min_fde = 0.0;
  bool miss = false;
  double ap = 0.0;  // reciprocal rank of the first non-miss candidate
  bool valid = false;
};

/// Per-agent marginal metrics. Candidates are ranked by probability
/// (descending, ties to the lower index); the agent's AP is 1/rank of the
/// first candidate whose FDE clears the miss threshold.
inline MarginalSample marginal_metrics(const CandidateSet& candidates,
                                       const std::vector<double>& probs,
                                       const std::vector<Vec2>& gt,
                                       const std::vector<bool>& valid_mask,
                                       double miss_threshold) {
  MarginalSample sample;
  const int k = candidates.k();
  std::vector<DisplacementStats> stats(k);
  for (int j = 0; j < k; ++j)
    stats[j] = displacement(candidates.trajectories[j].waypoints, gt, valid_mask);
  if (k == 0 || !stats[0].valid) return sample;  // no valid GT: agent skipped

  sample.valid = true;
  sample.min_ade = stats[0].ade;
  sample.min_fde = stats[0].fde;
  for (int j = 1; j < k; ++j) {
    sample.min_ade = std::min(sample.min_ade, stats[j].ade);
    sample.min_fde = std::min(sample.min_fde, stats[j].fde);
  }
  sample.miss = sample.min_fde > miss_threshold;

  std::vector<int> order(k);
  for (int j = 0; j < k; ++j) order[j] = j;
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return probs[a] > probs[b]; });
  for (int r = 0; r < k; ++r)
    if (stats[order[r]].fde <= miss_threshold) {
      sample.ap = 1.0 / (r + 1);
      break;
    }
  return sample;
}

// ---------------------------------------------------------------------------
// Pairwise joint metrics
// ---------------------------------------------------------------------------

struct PairSample {
  double min_sade = 0.0;
  double min_sfde = 0.0;
  bool smiss = false;
};

/// True iff the two agents' ground-truth centers ever come within the filter
/// distance at a commonly valid timestep.
inline bool gt_pair_interacts(const AgentTrack& a, const AgentTrack& b,
                              double filter_distance = kPairFilterDistance) {
  for (int t = 0; t < kFutureSteps; ++t) {
    if (!a.valid_mask[t] || !b.valid_mask[t]) continue;
    if (distance(a.future_gt[t].position(), b.future_gt[t].position()) <= filter_distance)
      return true;
  }
  return false;
}

/// Joint metrics for one qualifying pair from its top-n joint predictions.
/// minSADE / minSFDE take the best of the n joints; the miss test applies to
/// the top-1 joint and trips when either agent misses.
inline std::optional<PairSample> pair_joint_metrics(const Scene& scene, const Beliefs& beliefs,
                                                    const std::vector<CandidateSet>& candidates,
                                                    const Edge& edge, int n,
                                                    double miss_threshold) {
  const auto& ti = scene.agents[edge.i];
  const auto& tj = scene.agents[edge.j];
  const auto gt_i = future_positions(ti);
  const auto gt_j = future_positions(tj);
  const auto top = top_n_joint_pairs(beliefs, edge, n);
  PairSample sample;
  sample.min_sade = std::numeric_limits<double>::infinity();
  sample.min_sfde = std::numeric_limits<double>::infinity();
  for (std::size_t r = 0; r < top.size(); ++r) {
    const auto [a, b] = top[r].first;
    const auto di = displacement(candidates[edge.i].trajectories[a].waypoints, gt_i, ti.valid_mask);
    const auto dj = displacement(candidates[edge.j].trajectories[b].waypoints, gt_j, tj.valid_mask);
    if (!di.valid || !dj.valid) return std::nullopt;
    sample.min_sade = std::min(sample.min_sade, 0.5 * (di.ade + dj.ade));
    sample.min_sfde = std::min(sample.min_sfde, 0.5 * (di.fde + dj.fde));
    if (r == 0) sample.smiss = di.fde > miss_threshold || dj.fde > miss_threshold;
  }
  return sample;
}

// ---------------------------------------------------------------------------
// Aggregation
// ---------------------------------------------------------------------------

/// Dataset-level metric report. Pair metrics are NaN when no pair qualified.
struct MetricReport {
  double overlap_all = 0.0;
  double overlap_av = 0.0;
  double min_ade = 0.0;
  double min_fde = 0.0;
  double miss_rate = 0.0;
  double map = 0.0;
  double pair_min_sade = std::numeric_limits<double>::quiet_NaN();
  double pair_min_sfde = std::numeric_limits<double>::quiet_NaN();
  double pair_smiss_rate = std::numeric_limits<double>::quiet_NaN();
  long scenes = 0;
  long agents = 0;
  long pairs = 0;

  [[nodiscard]] bool has_pair_metrics() const { return pairs > 0; }
};

/// Accumulates per-scene results in deterministic scene order.
class MetricAggregator {
 public:
  explicit MetricAggregator(double miss_threshold = 2.0, int top_n = 6)
      : miss_threshold_(miss_threshold), top_n_(top_n) {}

  /// `probs` are the per-agent marginal probabilities used for ranking
  /// (typically softmax of the inference node beliefs). `exclude_agent`
  /// drops one agent (and its pairs) from the marginal/pair families, which
  /// conditional evaluation uses to skip the clamped AV.
  void add_scene(const Scene& scene, const JointDecode& decode,
                 const std::vector<CandidateSet>& candidates, const Beliefs& beliefs,
                 int exclude_agent = -1) {
    ++scenes_;
    const auto overlap = overlap_metric(scene, decode, candidates);
    overlap_all_ += overlap.all;
    overlap_av_ += overlap.av;

    const int n = scene.num_agents();
    for (int i = 0; i < n; ++i) {
      if (i == exclude_agent) continue;
      const auto sample =
          marginal_metrics(candidates[i], beliefs.node_probs(i), future_positions(scene.agents[i]),
                           scene.agents[i].valid_mask, miss_threshold_);
      if (!sample.valid) continue;
      ++agents_;
      ade_sum_ += sample.min_ade;
      fde_sum_ += sample.min_fde;
      miss_sum_ += sample.miss ? 1 : 0;
      ap_sum_ += sample.ap;
    }
    for (int i = 0; i < n; ++i) {
      if (i == exclude_agent) continue;
      for (int j = i + 1; j < n; ++j) {
        if (j == exclude_agent) continue;
        if (!gt_pair_interacts(scene.agents[i], scene.agents[j])) continue;
        const auto sample =
            pair_joint_metrics(scene, beliefs, candidates, Edge(i, j), top_n_, miss_threshold_);
        if (!sample) continue;
        ++pairs_;
        sade_sum_ += sample->min_sade;
        sfde_sum_ += sample->min_sfde;
        smiss_sum_ += sample->smiss ? 1 : 0;
      }
    }
  }

  [[nodiscard]] MetricReport report() const {
    MetricReport r;
    r.scenes = scenes_;
    r.agents = agents_;
    r.pairs = pairs_;
    if (scenes_ > 0) {
      r.overlap_all = overlap_all_ / scenes_;
      r.overlap_av = overlap_av_ / scenes_;
    }
    if (agents_ > 0) {
      r.min_ade = ade_sum_ / agents_;
      r.min_fde = fde_sum_ / agents_;
      r.miss_rate = static_cast<double>(miss_sum_) / agents_;
      r.map = ap_sum_ / agents_;
    }
    if (pairs_ > 0) {
      r.pair_min_sade = sade_sum_ / pairs_;
      r.pair_min_sfde = sfde_sum_ / pairs_;
      r.pair_smiss_rate = static_cast<double>(smiss_sum_) / pairs_;
    }
    return r;
  }

 private:
  double miss_threshold_;
  int top_n_;
  long scenes_ = 0;
  long agents_ = 0;
  long pairs_ = 0;
  double overlap_all_ = 0.0;
  double overlap_av_ = 0.0;
  double ade_sum_ = 0.0;
  double fde_sum_ = 0.0;
  long miss_sum_ = 0;
  double ap_sum_ = 0.0;
  double sade_sum_ = 0.0;
  double sfde_sum_ = 0.0;
  long smiss_sum_ = 0;
};

}  // namespace jointpred
