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

// Log-domain message passing on the pairwise model. Messages follow a
// synchronous flooding schedule: every directed edge is refreshed each
// iteration from the previous iteration's snapshot, initialized uniform
// (all zeros) and renormalized after every update. Sum-product yields node
// and pair marginal logits; max-product yields the joint MAP decode.

#pragma once

#include <algorithm>
#include <cmath>
#include <iostream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "jointpred/interaction_graph.hpp"
#include "jointpred/numeric.hpp"

namespace jointpred {

using UnaryLogits = std::vector<std::vector<double>>;  // [agent][candidate]

struct Beliefs {
  int k = 0;
  std::vector<std::vector<double>> node_logits;   // normalized: log-sum-exp == 0
  std::map<Edge, std::vector<double>> pair_logits;  // K*K, normalized

  [[nodiscard]] std::vector<double> node_probs(int agent) const {
    return softmax(node_logits[agent]);
  }
};

struct JointDecode {
  std::vector<int> selected;  // candidate index per agent
  double score = 0.0;         // unnormalized joint log-score of the selection
};

/// Returns a copy of the unary logits with agent `agent` forced to candidate
/// `candidate`: all other entries drop to the -1e9 sentinel.
inline UnaryLogits conditional_clamp(const UnaryLogits& unary, int agent, int candidate) {
  UnaryLogits out = unary;
  if (agent < 0 || agent >= static_cast<int>(out.size()))
    throw std::out_of_range("conditional_clamp: agent out of range");
  auto& row = out[agent];
  if (candidate < 0 || candidate >= static_cast<int>(row.size()))
    throw std::out_of_range("conditional_clamp: candidate out of range");
  for (std::size_t t = 0; t < row.size(); ++t)
    if (static_cast<int>(t) != candidate) row[t] = kNegInfLogit;
  return out;
}

namespace detail {

inline void check_bp_inputs(const InteractionGraph& graph, const UnaryLogits& unary,
                            const PairTableMap& tables, int iterations) {
  if (iterations < 1) throw std::invalid_argument("message passing needs iterations >= 1");
  if (static_cast<int>(unary.size()) != graph.node_count)
    throw std::invalid_argument("unary logits count does not match graph node count");
  const int k = unary.empty() ? 0 : static_cast<int>(unary[0].size());
  for (const auto& u : unary)
    if (static_cast<int>(u.size()) != k)
      throw std::invalid_argument("unary logits must share one K");
  for (const auto& e : graph.edges) {
    auto it = tables.find(e);
    if (it == tables.end())
      throw std::invalid_argument("missing pair table for edge (" + std::to_string(e.i) + ", " +
                                  std::to_string(e.j) + ")");
    if (it->second.k != k || static_cast<int>(it->second.logits.size()) != k * k)
      throw std::invalid_argument("pair table shape mismatch on edge (" + std::to_string(e.i) +
                                  ", " + std::to_string(e.j) + ")");
  }
}

/// Runs the flooding schedule; `max_mode` switches the accumulation between
/// log-sum-exp and max. Returns the final directed messages: for edge index e
/// over graph.edges, slot 2e holds i->j and slot 2e+1 holds j->i.
inline std::vector<std::vector<double>> run_messages(const InteractionGraph& graph,
                                                     const UnaryLogits& unary,
                                                     const PairTableMap& tables, int iterations,
                                                     bool max_mode) {
  const int k = unary.empty() ? 0 : static_cast<int>(unary[0].size());
  const int num_edges = static_cast<int>(graph.edges.size());
  std::vector<std::vector<double>> msgs(2 * num_edges, std::vector<double>(k, 0.0));
  if (num_edges == 0) return msgs;

  // incoming[v] lists (message slot, source node) pairs feeding node v.
  std::vector<std::vector<std::pair<int, int>>> incoming(graph.node_count);
  for (int e = 0; e < num_edges; ++e) {
    incoming[graph.edges[e].j].push_back({2 * e, graph.edges[e].i});
    incoming[graph.edges[e].i].push_back({2 * e + 1, graph.edges[e].j});
  }

  std::vector<std::vector<double>> next = msgs;
  std::vector<double> scratch(k);
  for (int iter = 0; iter < iterations; ++iter) {
    // Node-incoming sums over the previous snapshot.
    std::vector<std::vector<double>> sums(graph.node_count, std::vector<double>(k, 0.0));
    for (int v = 0; v < graph.node_count; ++v)
      for (const auto& [slot, src] : incoming[v])
        for (int x = 0; x < k; ++x) sums[v][x] += msgs[slot][x];

    for (int e = 0; e < num_edges; ++e) {
      const Edge& edge = graph.edges[e];
      const auto& table = tables.at(edge);
      for (int dir = 0; dir < 2; ++dir) {
        const int from = dir == 0 ? edge.i : edge.j;
        const auto& reverse_msg = msgs[2 * e + (1 - dir)];
        auto& out = next[2 * e + dir];
        for (int xt = 0; xt < k; ++xt) {
          for (int xf = 0; xf < k; ++xf) {
            const double pair_logit = dir == 0 ? table.at(xf, xt) : table.at(xt, xf);
            scratch[xf] = unary[from][xf] + sums[from][xf] - reverse_msg[xf] + pair_logit;
          }
          out[xt] = max_mode ? *std::max_element(scratch.begin(), scratch.end())
                             : log_sum_exp(scratch);
        }
        if (max_mode)
          normalize_max(out);
        else
          normalize_logits(out);
      }
    }
    msgs.swap(next);
  }
  return msgs;
}

inline std::vector<std::vector<double>> node_belief_logits(
    const InteractionGraph& graph, const UnaryLogits& unary,
    const std::vector<std::vector<double>>& msgs) {
  std::vector<std::vector<double>> beliefs = unary;
  for (int e = 0; e < static_cast<int>(graph.edges.size()); ++e) {
    const Edge& edge = graph.edges[e];
    for (std::size_t x = 0; x < beliefs[edge.j].size(); ++x) beliefs[edge.j][x] += msgs[2 * e][x];
    for (std::size_t x = 0; x < beliefs[edge.i].size(); ++x)
      beliefs[edge.i][x] += msgs[2 * e + 1][x];
  }
  return beliefs;
}

}  // namespace detail

/// Sum-product marginals. Node beliefs combine the unary with all incoming
/// messages; pair beliefs additionally include the edge potential while
/// excluding the messages that traveled the shared edge.
inline Beliefs sum_product(const InteractionGraph& graph, const UnaryLogits& unary,
                           const PairTableMap& tables, int iterations = 3) {
  detail::check_bp_inputs(graph, unary, tables, iterations);
  const int k = unary.empty() ? 0 : static_cast<int>(unary[0].size());
  const auto msgs = detail::run_messages(graph, unary, tables, iterations, /*max_mode=*/false);

  Beliefs beliefs;
  beliefs.k = k;
  const auto all = detail::node_belief_logits(graph, unary, msgs);
  beliefs.node_logits = all;
  for (auto& row : beliefs.node_logits) normalize_logits(row);

  for (int e = 0; e < static_cast<int>(graph.edges.size()); ++e) {
    const Edge& edge = graph.edges[e];
    const auto& table = tables.at(edge);
    // Cavity terms: everything entering i except the message from j, and vice versa.
    std::vector<double> into_i(k), into_j(k);
    for (int x = 0; x < k; ++x) {
      into_i[x] = all[edge.i][x] - msgs[2 * e + 1][x];
      into_j[x] = all[edge.j][x] - msgs[2 * e][x];
    }
    std::vector<double> cell(k * k);
    for (int a = 0; a < k; ++a)
      for (int b = 0; b < k; ++b) cell[a * k + b] = into_i[a] + into_j[b] + table.at(a, b);
    normalize_logits(cell);
    beliefs.pair_logits[edge] = std::move(cell);
  }
  return beliefs;
}

/// Max-product decode: per-node argmax over max-beliefs, ties resolved to the
/// lowest candidate index. Exact on acyclic graphs once iterations reach the
/// graph diameter and the maximizer is unique.
inline JointDecode max_product(const InteractionGraph& graph, const UnaryLogits& unary,
                               const PairTableMap& tables, int iterations = 3) {
  detail::check_bp_inputs(graph, unary, tables, iterations);
  const auto msgs = detail::run_messages(graph, unary, tables, iterations, /*max_mode=*/true);
  const auto beliefs = detail::node_belief_logits(graph, unary, msgs);

  JointDecode decode;
  decode.selected.reserve(beliefs.size());
  for (const auto& b : beliefs) decode.selected.push_back(argmax_lowest(b));
  for (int i = 0; i < graph.node_count; ++i) decode.score += unary[i][decode.selected[i]];
  for (const auto& e : graph.edges)
    decode.score += tables.at(e).at(decode.selected[e.i], decode.selected[e.j]);
  return decode;
}

/// Top-n cells of the edge's pair belief by log-probability, descending; ties
/// break lexicographically on (a, b). Edges absent from the inference graph
/// fall back to the outer sum of the two node beliefs.
inline std::vector<std::pair<std::pair<int, int>, double>> top_n_joint_pairs(
    const Beliefs& beliefs, const Edge& edge, int n = 6) {
  const int k = beliefs.k;
  if (n > k * k) {
    std::cerr << "[jointpred] top_n_joint_pairs: n=" << n << " clipped to K^2=" << k * k << "\n";
    n = k * k;
  }
  std::vector<double> cell;
  if (auto it = beliefs.pair_logits.find(edge); it != beliefs.pair_logits.end()) {
    cell = it->second;
  } else {
    cell.resize(k * k);
    for (int a = 0; a < k; ++a)
      for (int b = 0; b < k; ++b)
        cell[a * k + b] = beliefs.node_logits[edge.i][a] + beliefs.node_logits[edge.j][b];
  }
  std::vector<int> order(cell.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  std::stable_sort(order.begin(), order.end(),
                   [&](int lhs, int rhs) { return cell[lhs] > cell[rhs]; });
  std::vector<std::pair<std::pair<int, int>, double>> out;
  out.reserve(n);
  for (int r = 0; r < n; ++r)
    out.push_back({{order[r] / k, order[r] % k}, cell[order[r]]});
  return out;
}

}  // namespace jointpred
