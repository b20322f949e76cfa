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

// Undirected interaction graph over agents, plus the K x K pairwise potential
// table carried by each edge.

#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "jointpred/backbone.hpp"
#include "jointpred/numeric.hpp"
#include "jointpred/scene.hpp"

namespace jointpred {

/// Unordered agent pair, stored with i < j.
struct Edge {
  int i = 0;
  int j = 0;

  Edge() = default;
  Edge(int a, int b) : i(std::min(a, b)), j(std::max(a, b)) {
    if (a == b) throw std::invalid_argument("edge endpoints must differ");
  }

  auto operator<=>(const Edge&) const = default;
};

enum class GraphType { none, av_star, random_star, dynamic, fully_connected };

inline const char* graph_type_name(GraphType t) {
  switch (t) {
    case GraphType::none: return "none";
    case GraphType::av_star: return "av-star";
    case GraphType::random_star: return "random-star";
    case GraphType::dynamic: return "dynamic";
    case GraphType::fully_connected: return "fully-connected";
  }
  return "none";
}

inline GraphType graph_type_from_name(const std::string& s) {
  if (s == "none") return GraphType::none;
  if (s == "av-star" || s == "av_star") return GraphType::av_star;
  if (s == "random-star" || s == "random_star") return GraphType::random_star;
  if (s == "dynamic") return GraphType::dynamic;
  if (s == "fully-connected" || s == "fully_connected") return GraphType::fully_connected;
  throw std::invalid_argument("unknown graph type: " + s);
}

inline const std::vector<GraphType>& all_graph_types() {
  static const std::vector<GraphType> kAll = {GraphType::none, GraphType::random_star,
                                              GraphType::av_star, GraphType::dynamic,
                                              GraphType::fully_connected};
  return kAll;
}

struct InteractionGraph {
  int node_count = 0;
  std::vector<Edge> edges;  // sorted, unique
  GraphType type = GraphType::none;

  [[nodiscard]] std::vector<std::vector<int>> adjacency() const {
    std::vector<std::vector<int>> adj(node_count);
    for (const auto& e : edges) {
      adj[e.i].push_back(e.j);
      adj[e.j].push_back(e.i);
    }
    return adj;
  }
};

/// Pairwise potential logits for one edge: logits[a * k + b] = -E_pair(a, b)
/// where a indexes the lower-numbered agent's candidate.
struct PairPotentialTable {
  Edge edge;
  int k = 0;
  std::vector<double> logits;  // K * K

  [[nodiscard]] double at(int a, int b) const { return logits[a * k + b]; }
};

using PairTableMap = std::map<Edge, PairPotentialTable>;

/// True iff the two trajectories' centers ever come within half the summed
/// box lengths of each other at a common timestep (closed inequality).
inline bool proximity_edge(const Trajectory& top_i, const Trajectory& top_j, double length_i,
                           double length_j) {
  const std::size_t n = std::min(top_i.waypoints.size(), top_j.waypoints.size());
  const double threshold = 0.5 * (length_i + length_j);
  for (std::size_t t = 0; t < n; ++t)
    if (distance(top_i.waypoints[t], top_j.waypoints[t]) <= threshold) return true;
  return false;
}

namespace detail {

inline InteractionGraph star_graph(int node_count, int center, GraphType type) {
  InteractionGraph g{node_count, {}, type};
  for (int k = 0; k < node_count; ++k)
    if (k != center) g.edges.emplace_back(center, k);
  std::sort(g.edges.begin(), g.edges.end());
  return g;
}

}  // namespace detail

/// Builds the edge set for the configured graph type. Dynamic graphs connect
/// agents whose most-likely candidates pass the proximity predicate; the seed
/// is used only by random_star.
inline InteractionGraph build_graph(GraphType type, const Scene& scene,
                                    const std::vector<CandidateSet>& candidates,
                                    std::uint64_t seed = 0) {
  const int n = scene.num_agents();
  switch (type) {
    case GraphType::none:
      return {n, {}, type};
    case GraphType::av_star:
      return detail::star_graph(n, scene.av_index(), type);
    case GraphType::random_star: {
      std::mt19937_64 rng(mix_seed(seed, 0x57A2));
      const int center = std::uniform_int_distribution<int>(0, n - 1)(rng);
      return detail::star_graph(n, center, type);
    }
    case GraphType::dynamic: {
      if (static_cast<int>(candidates.size()) != n)
        throw std::invalid_argument("dynamic graph requires candidates for every agent");
      InteractionGraph g{n, {}, type};
      for (int i = 0; i < n; ++i) {
        const auto& top_i = candidates[i].trajectories[candidates[i].top_index()];
        for (int j = i + 1; j < n; ++j) {
          const auto& top_j = candidates[j].trajectories[candidates[j].top_index()];
          if (proximity_edge(top_i, top_j, scene.agents[i].length, scene.agents[j].length))
            g.edges.emplace_back(i, j);
        }
      }
      return g;
    }
    case GraphType::fully_connected: {
      InteractionGraph g{n, {}, type};
      for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) g.edges.emplace_back(i, j);
      return g;
    }
  }
  throw std::invalid_argument("unknown graph type");
}

/// Longest shortest path over all connected components (0 for edgeless graphs).
inline int graph_diameter(const InteractionGraph& g) {
  const auto adj = g.adjacency();
  int diameter = 0;
  std::vector<int> dist(g.node_count);
  for (int start = 0; start < g.node_count; ++start) {
    std::fill(dist.begin(), dist.end(), -1);
    dist[start] = 0;
    std::vector<int> queue{start};
    for (std::size_t qi = 0; qi < queue.size(); ++qi) {
      const int u = queue[qi];
      for (int v : adj[u])
        if (dist[v] < 0) {
          dist[v] = dist[u] + 1;
          diameter = std::max(diameter, dist[v]);
          queue.push_back(v);
        }
    }
  }
  return diameter;
}

}  // namespace jointpred
