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

// Structured training. The classification terms are cross-entropies evaluated
// at the message-passing marginal logits but differentiated at the raw
// potential logits via the stop-gradient construction
//     CE(mu + stop_gradient(mu_hat - mu))
// which reproduces the exact negative-joint-log-likelihood gradient
// (marginal minus one-hot) while message passing itself stays outside the
// differentiated graph. Regression is a Huber loss on the label-assigned
// candidate only.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "jointpred/autodiff.hpp"
#include "jointpred/backbone.hpp"
#include "jointpred/belief_propagation.hpp"
#include "jointpred/exact_joint.hpp"
#include "jointpred/interaction_graph.hpp"
#include "jointpred/metrics.hpp"
#include "jointpred/model.hpp"
#include "jointpred/optimizer.hpp"
#include "jointpred/pair_potential.hpp"
#include "jointpred/scene.hpp"

namespace jointpred {

// ---------------------------------------------------------------------------
// Label assignment
// ---------------------------------------------------------------------------

/// Per-agent ground-truth candidate index: -1 marks agents with no valid
/// future steps, which are excluded from every loss term.
struct LabelAssignment {
  std::vector<int> label;
};

/// Hard nearest-candidate assignment: argmin over candidates of mean
/// displacement to ground truth over valid steps, ties to the lowest index.
inline LabelAssignment assign_labels(const std::vector<CandidateSet>& candidates,
                                     const Scene& scene) {
  LabelAssignment out;
  out.label.reserve(candidates.size());
  for (int i = 0; i < scene.num_agents(); ++i) {
    const auto gt = future_positions(scene.agents[i]);
    const auto& mask = scene.agents[i].valid_mask;
    int best = -1;
    double best_ade = 0.0;
    for (int j = 0; j < candidates[i].k(); ++j) {
      const auto d = displacement(candidates[i].trajectories[j].waypoints, gt, mask);
      if (!d.valid) break;
      if (best < 0 || d.ade < best_ade) {
        best = j;
        best_ade = d.ade;
      }
    }
    out.label.push_back(best);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Structured losses
// ---------------------------------------------------------------------------

struct LossBreakdown {
  double reg = 0.0;
  double unary_ce = 0.0;
  double pair_ce = 0.0;
  double total = 0.0;
};

struct StructuredLossVars {
  ad::Var reg;
  ad::Var unary_ce;
  ad::Var pair_ce;
  ad::Var total;
  LossBreakdown values;
};

namespace detail {

/// logits + stop_gradient(target_logits - logits): forward-equal to the
/// target, gradient routed to the raw logits. `use_stop_gradient=false` is
/// the negative control, which silently zeroes the gradient path.
inline ad::Var reroute_logits(ad::Tape& tape, ad::Var logits,
                              const std::vector<double>& target_logits, bool use_stop_gradient) {
  const ad::Var diff = tape.sub(tape.constant(target_logits), logits);
  return tape.add(logits, use_stop_gradient ? tape.stop_gradient(diff) : diff);
}

inline std::vector<int> valid_coord_indices(const std::vector<bool>& mask) {
  std::vector<int> idx;
  for (int t = 0; t < static_cast<int>(mask.size()); ++t)
    if (mask[t]) {
      idx.push_back(2 * t);
      idx.push_back(2 * t + 1);
    }
  return idx;
}

}  // namespace detail

/// Assembles L = L_reg + L_unary + L_pair on the tape.
///  - unary: sum over labeled agents of CE(mu_i + sg(mu_hat_i - mu_i), k*_i)
///  - pair:  sum over graph edges (both endpoints labeled) of CE over the
///           flattened K^2 logits of (v_ij + sg(v_hat_ij - v_ij)) with label
///           (k*_i, k*_j)
///  - reg:   Huber(candidate k*_i, ground truth) over valid coordinates
inline StructuredLossVars structured_losses(ad::Tape& tape,
                                            const std::vector<AgentCandidateVars>& candidates,
                                            const std::map<Edge, PairTableVar>& tables,
                                            const Beliefs& beliefs, const LabelAssignment& labels,
                                            const InteractionGraph& graph, const Scene& scene,
                                            double huber_delta, bool use_stop_gradient = true) {
  const int n = scene.num_agents();
  if (static_cast<int>(beliefs.node_logits.size()) != n ||
      static_cast<int>(labels.label.size()) != n)
    throw std::invalid_argument("structured_losses: beliefs/labels do not cover every agent");

  std::vector<ad::Var> reg_terms, unary_terms, pair_terms;
  for (int i = 0; i < n; ++i) {
    const int k_star = labels.label[i];
    if (k_star < 0) continue;
    const auto idx = detail::valid_coord_indices(scene.agents[i].valid_mask);
    const auto gt_flat = flatten(future_positions(scene.agents[i]));
    std::vector<double> target;
    target.reserve(idx.size());
    for (int id : idx) target.push_back(gt_flat[id]);
    reg_terms.push_back(
        tape.huber(tape.gather(candidates[i].world[k_star], idx), std::move(target), huber_delta));

    const ad::Var routed = detail::reroute_logits(tape, candidates[i].unary_logits,
                                                  beliefs.node_logits[i], use_stop_gradient);
    unary_terms.push_back(tape.softmax_cross_entropy(routed, k_star));
  }
  for (const auto& e : graph.edges) {
    const int ki = labels.label[e.i];
    const int kj = labels.label[e.j];
    if (ki < 0 || kj < 0) continue;
    const auto table_it = tables.find(e);
    if (table_it == tables.end())
      throw std::invalid_argument("structured_losses: missing table for edge (" +
                                  std::to_string(e.i) + ", " + std::to_string(e.j) + ")");
    const auto belief_it = beliefs.pair_logits.find(e);
    if (belief_it == beliefs.pair_logits.end())
      throw std::invalid_argument("structured_losses: missing pair belief for edge (" +
                                  std::to_string(e.i) + ", " + std::to_string(e.j) + ")");
    const ad::Var routed =
        detail::reroute_logits(tape, table_it->second.logits, belief_it->second, use_stop_gradient);
    pair_terms.push_back(
        tape.softmax_cross_entropy(routed, ki * table_it->second.k + kj));
  }

  StructuredLossVars out;
  out.reg = tape.sum(reg_terms);
  out.unary_ce = tape.sum(unary_terms);
  out.pair_ce = tape.sum(pair_terms);
  out.total = tape.add(tape.add(out.reg, out.unary_ce), out.pair_ce);
  out.values = {tape.scalar(out.reg), tape.scalar(out.unary_ce), tape.scalar(out.pair_ce),
                tape.scalar(out.total)};
  return out;
}

// ---------------------------------------------------------------------------
// Tape-side scene forward (shared by training and the gradient checks)
// ---------------------------------------------------------------------------

struct SceneForward {
  std::vector<AgentCandidateVars> candidate_vars;
  std::vector<CandidateSet> candidates;
  InteractionGraph graph;
  std::map<Edge, PairTableVar> table_vars;
  PairTableMap tables;
  Beliefs beliefs;
  LabelAssignment labels;
};

/// Runs backbone + graph + potentials + sum-product for one scene on the
/// given tape. Heuristic potentials enter the tape as constants, so their
/// cells carry no gradient.
inline SceneForward scene_forward(ad::Tape& tape, const Scene& scene, const Model& model,
                                  GraphType graph_type, PotentialMode mode, std::uint64_t seed,
                                  int iterations = -1) {
  SceneForward fw;
  fw.candidate_vars = predict_candidates(tape, scene, model.anchors, model.cfg, model.params);
  fw.candidates = extract_candidate_sets(tape, fw.candidate_vars);
  if (mode == PotentialMode::none) graph_type = GraphType::none;
  fw.graph = build_graph(graph_type, scene, fw.candidates, seed);
  for (const auto& e : fw.graph.edges) {
    if (mode == PotentialMode::learned) {
      const PairTableVar var = compute_pair_table(tape, e, fw.candidate_vars, scene, model.params, model.cfg.detach_pair_inputs);
      fw.table_vars.emplace(e, var);
      fw.tables.emplace(e, extract_pair_table(tape, var));
    } else {
      PairPotentialTable table = heuristic_pair_table(
          e, fw.candidates[e.i], fw.candidates[e.j],
          {scene.agents[e.i].length, scene.agents[e.i].width},
          {scene.agents[e.j].length, scene.agents[e.j].width});
      fw.table_vars.emplace(
          e, PairTableVar{e, table.k, tape.constant(table.logits)});
      fw.tables.emplace(e, std::move(table));
    }
  }
  const int iters = iterations > 0 ? iterations : model.cfg.bp_iterations;
  fw.beliefs = sum_product(fw.graph, unary_logits_of(fw.candidates), fw.tables, iters);
  fw.labels = assign_labels(fw.candidates, scene);
  return fw;
}

// ---------------------------------------------------------------------------
// Gradient equivalence against the exact joint likelihood
// ---------------------------------------------------------------------------

struct GradEquivReport {
  double max_rel_dev = 0.0;
  long checked = 0;
};

inline bool is_acyclic(const InteractionGraph& g) {
  // A graph is a forest iff |E| = |V| - #components.
  std::vector<int> parent(g.node_count);
  std::iota(parent.begin(), parent.end(), 0);
  std::function<int(int)> find = [&](int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  int components = g.node_count;
  for (const auto& e : g.edges) {
    const int a = find(e.i);
    const int b = find(e.j);
    if (a == b) return false;
    parent[a] = b;
    --components;
  }
  return static_cast<int>(g.edges.size()) == g.node_count - components;
}

/// Verifies that the reverse-mode gradient of (unary_ce + pair_ce) with
/// respect to the unary and pairwise logits matches central finite
/// differences of the exact -log p(labels) computed by enumeration. Requires
/// an acyclic graph (message passing must be exact) and a feasible state
/// space. `use_stop_gradient=false` runs the negative control.
inline GradEquivReport gradient_equivalence_check(const Scene& scene, const Model& model,
                                                  GraphType graph_type, std::uint64_t seed,
                                                  bool use_stop_gradient = true,
                                                  double eps = 1e-6) {
  ad::Tape tape(&model.params);
  SceneForward fw = scene_forward(tape, scene, model, graph_type, PotentialMode::learned, seed);
  if (!is_acyclic(fw.graph))
    throw std::invalid_argument("gradient_equivalence_check requires an acyclic graph");
  for (int lbl : fw.labels.label)
    if (lbl < 0) throw std::invalid_argument("gradient_equivalence_check: unlabeled agent");

  // Exact marginals demand converged messages.
  const int iters = std::max(model.cfg.bp_iterations, graph_diameter(fw.graph) + 1);
  const auto unary = unary_logits_of(fw.candidates);
  fw.beliefs = sum_product(fw.graph, unary, fw.tables, iters);

  const auto losses = structured_losses(tape, fw.candidate_vars, fw.table_vars, fw.beliefs,
                                        fw.labels, fw.graph, scene, model.cfg.huber_delta,
                                        use_stop_gradient);
  tape.backward(tape.add(losses.unary_ce, losses.pair_ce));

  // Exact objective -log p(s*) as a function of the potential logits.
  const auto neg_log_prob = [&](const UnaryLogits& u, const PairTableMap& t) {
    const ExactJoint joint = brute_force_joint(fw.graph, u, t);
    double score = 0.0;
    for (int i = 0; i < scene.num_agents(); ++i) score += u[i][fw.labels.label[i]];
    for (const auto& e : fw.graph.edges)
      score += t.at(e).at(fw.labels.label[e.i], fw.labels.label[e.j]);
    return joint.log_partition - score;
  };

  GradEquivReport report;
  const auto record = [&](double ad_grad, double fd_grad) {
    const double rel =
        std::abs(ad_grad - fd_grad) / std::max({1.0, std::abs(ad_grad), std::abs(fd_grad)});
    report.max_rel_dev = std::max(report.max_rel_dev, rel);
    ++report.checked;
  };

  UnaryLogits u = unary;
  PairTableMap t = fw.tables;
  for (int i = 0; i < scene.num_agents(); ++i) {
    const auto& grad = tape.grad(fw.candidate_vars[i].unary_logits);
    for (int x = 0; x < model.cfg.k; ++x) {
      const double saved = u[i][x];
      u[i][x] = saved + eps;
      const double up = neg_log_prob(u, t);
      u[i][x] = saved - eps;
      const double down = neg_log_prob(u, t);
      u[i][x] = saved;
      record(grad[x], (up - down) / (2.0 * eps));
    }
  }
  for (const auto& e : fw.graph.edges) {
    const auto& grad = tape.grad(fw.table_vars.at(e).logits);
    auto& cells = t.at(e).logits;
    for (std::size_t c = 0; c < cells.size(); ++c) {
      const double saved = cells[c];
      cells[c] = saved + eps;
      const double up = neg_log_prob(u, t);
      cells[c] = saved - eps;
      const double down = neg_log_prob(u, t);
      cells[c] = saved;
      record(grad[c], (up - down) / (2.0 * eps));
    }
  }
  return report;
}

/// End-to-end gradient check over every model parameter. The reverse-mode
/// side differentiates the structured loss (regression + stop-gradient
/// cross-entropies, full pair-input path); the numeric side runs central
/// differences of the true objective, regression plus the exact joint
/// negative log-likelihood from enumeration. On acyclic graphs the two agree
/// through the whole backbone (labels and graph are frozen at the base
/// point). `max_per_param` bounds the probed elements per parameter tensor.
inline ad::FiniteDiffReport full_model_gradient_check(const Scene& scene, const Model& base_model,
                                                      GraphType graph_type, double eps = 1e-6,
                                                      int max_per_param = 8,
                                                      std::uint64_t seed = 0) {
  Model model = base_model;
  model.cfg.detach_pair_inputs = false;

  // Freeze labels and graph at the base parameters.
  ad::Tape probe(&model.params);
  const SceneForward base =
      scene_forward(probe, scene, model, graph_type, PotentialMode::learned, 0);
  if (!is_acyclic(base.graph))
    throw std::invalid_argument("full_model_gradient_check requires an acyclic graph");
  for (int lbl : base.labels.label)
    if (lbl < 0) throw std::invalid_argument("full_model_gradient_check: unlabeled agent");
  const LabelAssignment labels = base.labels;
  const InteractionGraph graph = base.graph;
  const int iterations = std::max(model.cfg.bp_iterations, graph_diameter(graph) + 1);

  const ad::LossFn loss_fn = [&](const ad::ParamStore& params, ad::GradientStore* grads) {
    Model view = model;
    ad::Tape tape(&params);
    const auto vars = predict_candidates(tape, scene, view.anchors, view.cfg, params);
    const auto candidates = extract_candidate_sets(tape, vars);
    std::map<Edge, PairTableVar> table_vars;
    PairTableMap tables;
    for (const auto& e : graph.edges) {
      const PairTableVar var =
          compute_pair_table(tape, e, vars, scene, params, /*detach_trajectory_inputs=*/false);
      table_vars.emplace(e, var);
      tables.emplace(e, extract_pair_table(tape, var));
    }
    const UnaryLogits unary = unary_logits_of(candidates);
    if (grads) {
      const Beliefs beliefs = sum_product(graph, unary, tables, iterations);
      const auto losses = structured_losses(tape, vars, table_vars, beliefs, labels, graph, scene,
                                            view.cfg.huber_delta);
      tape.backward(losses.total);
      *grads = tape.gradients();
      return tape.scalar(losses.total);
    }
    // Numeric side: regression + exact joint negative log-likelihood.
    std::vector<ad::Var> reg_terms;
    for (int i = 0; i < scene.num_agents(); ++i) {
      const auto idx = detail::valid_coord_indices(scene.agents[i].valid_mask);
      const auto gt_flat = flatten(future_positions(scene.agents[i]));
      std::vector<double> target;
      target.reserve(idx.size());
      for (int id : idx) target.push_back(gt_flat[id]);
      reg_terms.push_back(tape.huber(tape.gather(vars[i].world[labels.label[i]], idx),
                                     std::move(target), view.cfg.huber_delta));
    }
    const ExactJoint joint = brute_force_joint(graph, unary, tables);
    double label_score = 0.0;
    for (int i = 0; i < scene.num_agents(); ++i) label_score += unary[i][labels.label[i]];
    for (const auto& e : graph.edges)
      label_score += tables.at(e).at(labels.label[e.i], labels.label[e.j]);
    return tape.scalar(tape.sum(reg_terms)) + joint.log_partition - label_score;
  };
  return ad::finite_diff_check(loss_fn, model.params, eps, max_per_param, seed);
}

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------

struct TrainConfig {
  std::uint64_t seed = 1;
  int steps = 2000;
  double lr = 1e-3;
  double weight_decay = 0.0;
  GraphType graph = GraphType::dynamic;
  PotentialMode potential = PotentialMode::learned;
  // Optimization uses detached pair-potential inputs: pair losses train the
  // potential MLPs but leave candidate geometry to the regression and unary
  // terms. The full gradient path stays available for the gradient checks.
  bool detach_pair_inputs = true;
  ModelConfig model;
};

struct TrainStepLog {
  int step = 0;
  std::string scene_id;
  LossBreakdown loss;
};

struct TrainResult {
  Model model;
  std::vector<TrainStepLog> log;
};

/// Scenes are visited in a seeded shuffle, reshuffled every epoch; gradients
/// reduce in tape order, so equal seeds give identical runs.
inline TrainResult train(const std::vector<Scene>& dataset, const TrainConfig& cfg) {
  if (dataset.empty()) throw std::invalid_argument("train: empty dataset");
  ModelConfig model_cfg = cfg.model;
  model_cfg.detach_pair_inputs = cfg.detach_pair_inputs;
  TrainResult result;
  result.model = make_model(model_cfg, cfg.seed);
  ad::AdamWConfig opt{cfg.lr, 0.9, 0.999, 1e-8, cfg.weight_decay};
  ad::AdamWState state = ad::AdamWState::for_store(result.model.params);

  std::mt19937_64 rng(mix_seed(cfg.seed, 0x77A1));
  std::vector<int> order(dataset.size());
  std::iota(order.begin(), order.end(), 0);

  for (int step = 0; step < cfg.steps; ++step) {
    const int slot = step % static_cast<int>(dataset.size());
    if (slot == 0) std::shuffle(order.begin(), order.end(), rng);
    const Scene& scene = dataset[order[slot]];
    try {
      ad::Tape tape(&result.model.params);
      SceneForward fw = scene_forward(tape, scene, result.model, cfg.graph, cfg.potential,
                                      mix_seed(cfg.seed, step));
      const auto losses =
          structured_losses(tape, fw.candidate_vars, fw.table_vars, fw.beliefs, fw.labels,
                            fw.graph, scene, cfg.model.huber_delta);
      tape.backward(losses.total);
      ad::adamw_step(result.model.params, tape.gradients(), opt, state);
      result.log.push_back({step, scene.scene_id, losses.values});
    } catch (const std::runtime_error& e) {
      throw std::runtime_error("training aborted at step " + std::to_string(step) + " on scene '" +
                               scene.scene_id + "': " + e.what());
    }
  }
  // The trained model keeps the caller's inference-side configuration.
  result.model.cfg.detach_pair_inputs = cfg.model.detach_pair_inputs;
  return result;
}

inline void write_loss_log(const std::string& path, const std::vector<TrainStepLog>& log) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write loss log: " + path);
  out << "step,scene_id,reg,unary_ce,pair_ce,total\n";
  char buf[256];
  for (const auto& entry : log) {
    std::snprintf(buf, sizeof(buf), "%d,%s,%.9g,%.9g,%.9g,%.9g\n", entry.step,
                  entry.scene_id.c_str(), entry.loss.reg, entry.loss.unary_ce, entry.loss.pair_ce,
                  entry.loss.total);
    out << buf;
  }
}

}  // namespace jointpred
