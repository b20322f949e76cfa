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

// Shared test helper: random acyclic model instances for oracle comparisons.

#pragma once

#include <random>

#include "jointpred/belief_propagation.hpp"
#include "jointpred/interaction_graph.hpp"

namespace jointpred::testutil {

struct RandomInstance {
  InteractionGraph graph;
  UnaryLogits unary;
  PairTableMap tables;
  int k = 0;
};

/// Random tree-structured instance with continuous potentials (ties have
/// probability zero). Nodes attach to a uniformly chosen earlier parent.
inline RandomInstance random_tree_instance(std::uint64_t seed, int max_agents = 5, int max_k = 4,
                                           double scale = 1.5) {
  std::mt19937_64 rng(mix_seed(seed, 0x7EE5));
  const int a = std::uniform_int_distribution<int>(2, max_agents)(rng);
  const int k = std::uniform_int_distribution<int>(2, max_k)(rng);
  std::normal_distribution<double> logit(0.0, scale);

  RandomInstance inst;
  inst.k = k;
  inst.graph.node_count = a;
  inst.graph.type = GraphType::dynamic;
  for (int v = 1; v < a; ++v)
    inst.graph.edges.emplace_back(std::uniform_int_distribution<int>(0, v - 1)(rng), v);
  std::sort(inst.graph.edges.begin(), inst.graph.edges.end());

  inst.unary.resize(a);
  for (auto& u : inst.unary) {
    u.resize(k);
    for (double& x : u) x = logit(rng);
  }
  for (const auto& e : inst.graph.edges) {
    PairPotentialTable table{e, k, std::vector<double>(k * k)};
    for (double& x : table.logits) x = logit(rng);
    inst.tables[e] = std::move(table);
  }
  return inst;
}

}  // namespace jointpred::testutil
