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

// Brute-force enumeration of the joint distribution over K^A candidate
// assignments. Exact but exponential; the feasibility guard caps the state
// space at 10^6. Serves as the reference oracle for every message-passing
// result and for the structured-loss gradient identities.

#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "jointpred/belief_propagation.hpp"
#include "jointpred/interaction_graph.hpp"
#include "jointpred/numeric.hpp"

namespace jointpred {

inline constexpr long kMaxExactStates = 1'000'000;

struct ExactJoint {
  int num_agents = 0;
  int k = 0;
  double log_partition = 0.0;
  std::vector<double> log_scores;                // K^A unnormalized log-weights, agent-0 major
  std::vector<std::vector<double>> marginals;    // exact per-agent probabilities
  std::vector<int> argmax_state;
  double argmax_log_prob = 0.0;

  [[nodiscard]] long num_states() const { return static_cast<long>(log_scores.size()); }

  [[nodiscard]] double state_prob(long index) const {
    return std::exp(log_scores[index] - log_partition);
  }

  /// Decodes state index into per-agent candidate choices (agent 0 most
  /// significant).
  [[nodiscard]] std::vector<int> decode_state(long index) const {
    std::vector<int> state(num_agents);
    for (int i = num_agents - 1; i >= 0; --i) {
      state[i] = static_cast<int>(index % k);
      index /= k;
    }
    return state;
  }

  /// Exact pairwise marginal over (candidate of i, candidate of j), K*K
  /// probabilities with i's candidate as the major index.
  [[nodiscard]] std::vector<double> pair_marginal(int i, int j) const {
    std::vector<double> out(k * k, 0.0);
    for (long s = 0; s < num_states(); ++s) {
      const auto state = decode_state(s);
      out[state[i] * k + state[j]] += state_prob(s);
    }
    return out;
  }

  /// Exact conditionals p(candidates of others | agent takes `candidate`),
  /// computed by restricting the enumeration. The conditioned agent's own row
  /// comes back one-hot.
  [[nodiscard]] std::vector<std::vector<double>> conditional_marginals(int agent,
                                                                       int candidate) const {
    std::vector<std::vector<double>> out(num_agents, std::vector<double>(k, 0.0));
    std::vector<double> restricted;
    std::vector<long> index;
    for (long s = 0; s < num_states(); ++s) {
      const auto state = decode_state(s);
      if (state[agent] != candidate) continue;
      restricted.push_back(log_scores[s]);
      index.push_back(s);
    }
    const double lz = log_sum_exp(restricted);
    for (std::size_t r = 0; r < restricted.size(); ++r) {
      const auto state = decode_state(index[r]);
      const double p = std::exp(restricted[r] - lz);
      for (int i = 0; i < num_agents; ++i) out[i][state[i]] += p;
    }
    return out;
  }
};

/// Enumerates every joint state: log-weight = sum of unary logits plus the
/// pair logits of graph edges (all logits are negated energies).
inline ExactJoint brute_force_joint(const InteractionGraph& graph, const UnaryLogits& unary,
                                    const PairTableMap& tables) {
  detail::check_bp_inputs(graph, unary, tables, /*iterations=*/1);
  const int a = graph.node_count;
  const int k = unary.empty() ? 0 : static_cast<int>(unary[0].size());
  double states_d = 1.0;
  for (int i = 0; i < a; ++i) states_d *= k;
  if (states_d > static_cast<double>(kMaxExactStates))
    throw std::length_error("brute_force_joint: state space " + std::to_string(states_d) +
                            " exceeds " + std::to_string(kMaxExactStates));
  const long num_states = static_cast<long>(states_d);

  ExactJoint joint;
  joint.num_agents = a;
  joint.k = k;
  joint.log_scores.resize(num_states);
  joint.marginals.assign(a, std::vector<double>(k, 0.0));

  std::vector<int> state(a, 0);
  long best = 0;
  for (long s = 0; s < num_states; ++s) {
    double score = 0.0;
    for (int i = 0; i < a; ++i) score += unary[i][state[i]];
    for (const auto& e : graph.edges) score += tables.at(e).at(state[e.i], state[e.j]);
    joint.log_scores[s] = score;
    if (score > joint.log_scores[best]) best = s;
    // mixed-radix increment, agent 0 most significant
    for (int i = a - 1; i >= 0; --i) {
      if (++state[i] < k) break;
      state[i] = 0;
    }
  }
  joint.log_partition = log_sum_exp(joint.log_scores);
  joint.argmax_state = joint.decode_state(best);
  joint.argmax_log_prob = joint.log_scores[best] - joint.log_partition;

  for (long s = 0; s < num_states; ++s) {
    const double p = joint.state_prob(s);
    const auto st = joint.decode_state(s);
    for (int i = 0; i < a; ++i) joint.marginals[i][st[i]] += p;
  }
  return joint;
}

}  // namespace jointpred
