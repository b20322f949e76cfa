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

// Model bundle (parameters + anchors + config) and the end-to-end inference
// pipeline: candidates -> interaction graph -> pair tables -> sum-product
// beliefs -> max-product decode.

#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "jointpred/autodiff.hpp"
#include "jointpred/backbone.hpp"
#include "jointpred/belief_propagation.hpp"
#include "jointpred/interaction_graph.hpp"
#include "jointpred/pair_potential.hpp"
#include "jointpred/scene.hpp"

namespace jointpred {

enum class PotentialMode { learned, heuristic, none };

inline const char* potential_mode_name(PotentialMode m) {
  switch (m) {
    case PotentialMode::learned: return "learned";
    case PotentialMode::heuristic: return "heuristic";
    case PotentialMode::none: return "none";
  }
  return "learned";
}

inline PotentialMode potential_mode_from_name(const std::string& s) {
  if (s == "learned") return PotentialMode::learned;
  if (s == "heuristic") return PotentialMode::heuristic;
  if (s == "none") return PotentialMode::none;
  throw std::invalid_argument("unknown potential mode: " + s);
}

struct Model {
  ModelConfig cfg;
  ad::ParamStore params;
  AnchorSet anchors;
};

/// Fresh model with Glorot-uniform weights. The output layers of the offset,
/// logits and outer pair heads start at zero, so an untrained model emits the
/// raw anchors with uniform probabilities and all-zero pair tables.
inline Model make_model(const ModelConfig& cfg, std::uint64_t seed) {
  Model model;
  model.cfg = cfg;
  add_backbone_params(model.params, cfg);
  add_pair_params(model.params);
  std::mt19937_64 rng(mix_seed(seed, 0x0D31));
  for (auto& p : model.params) ad::init_xavier_uniform(p, rng);
  for (const char* head : {"backbone.offset.1", "backbone.logits.1", "pair.outer.2"}) {
    auto& w = model.params.at(std::string(head) + ".w");
    std::fill(w.value.begin(), w.value.end(), 0.0);
    auto& b = model.params.at(std::string(head) + ".b");
    std::fill(b.value.begin(), b.value.end(), 0.0);
  }
  model.anchors = build_anchors(cfg.k, cfg);
  return model;
}

inline UnaryLogits unary_logits_of(const std::vector<CandidateSet>& candidates) {
  UnaryLogits out;
  out.reserve(candidates.size());
  for (const auto& c : candidates) out.push_back(c.unary_logits);
  return out;
}

inline PairTableMap heuristic_pair_tables(const Scene& scene, const InteractionGraph& graph,
                                          const std::vector<CandidateSet>& candidates) {
  PairTableMap tables;
  for (const auto& e : graph.edges)
    tables[e] = heuristic_pair_table(e, candidates[e.i], candidates[e.j],
                                     {scene.agents[e.i].length, scene.agents[e.i].width},
                                     {scene.agents[e.j].length, scene.agents[e.j].width});
  return tables;
}

struct ScenePrediction {
  std::vector<CandidateSet> candidates;
  InteractionGraph graph;
  PairTableMap tables;
  Beliefs beliefs;
  JointDecode decode;
};

/// Full inference pass over one scene. PotentialMode::none drops every edge,
/// reducing the model to independent per-agent prediction. `seed` only feeds
/// the random-star graph choice.
inline ScenePrediction predict_scene(const Model& model, const Scene& scene, GraphType graph_type,
                                     PotentialMode mode, std::uint64_t seed = 0,
                                     int iterations = -1) {
  ScenePrediction out;
  {
    ad::Tape tape(&model.params);
    const auto vars = predict_candidates(tape, scene, model.anchors, model.cfg, model.params);
    out.candidates = extract_candidate_sets(tape, vars);
    if (mode == PotentialMode::none) graph_type = GraphType::none;
    out.graph = build_graph(graph_type, scene, out.candidates, seed);
    if (mode == PotentialMode::learned) {
      for (const auto& e : out.graph.edges)
        out.tables[e] =
            extract_pair_table(tape, compute_pair_table(tape, e, vars, scene, model.params, model.cfg.detach_pair_inputs));
    }
  }
  if (mode == PotentialMode::heuristic)
    out.tables = heuristic_pair_tables(scene, out.graph, out.candidates);
  const int iters = iterations > 0 ? iterations : model.cfg.bp_iterations;
  const auto unary = unary_logits_of(out.candidates);
  out.beliefs = sum_product(out.graph, unary, out.tables, iters);
  out.decode = max_product(out.graph, unary, out.tables, iters);
  return out;
}

}  // namespace jointpred
