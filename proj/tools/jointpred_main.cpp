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

// Experiment runner. Subcommands: gen-data, train, eval, ablate-graphs,
// conditional-eval, check-gradients. Flags beat config-file values; every
// command is deterministic given its flags and seed. Set JOINTPRED_LOG=quiet
// to silence progress lines.

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "jointpred/checkpoint.hpp"
#include "jointpred/metrics.hpp"
#include "jointpred/model.hpp"
#include "jointpred/reporting.hpp"
#include "jointpred/scenario_gen.hpp"
#include "jointpred/scene_io.hpp"
#include "jointpred/training.hpp"

namespace {

using namespace jointpred;

bool log_enabled() {
  const char* env = std::getenv("JOINTPRED_LOG");
  return env == nullptr || std::string(env) != "quiet";
}

void log_line(const std::string& msg) {
  if (log_enabled()) std::cerr << "[jointpred] " << msg << "\n";
}

struct CommonOpts {
  std::string dataset;
  std::string checkpoint;
  std::string out;
  std::string graph = "dynamic";
  std::string potential = "learned";
  std::uint64_t seed = 1;
  double miss_threshold = 2.0;
  std::string config_file;
};

void attach_config(CLI::App* cmd, std::string& path) {
  cmd->add_option("--config", path, "key=value config file; command-line flags win");
}

std::string trimmed(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  const auto b = s.find_last_not_of(" \t\r");
  return a == std::string::npos ? "" : s.substr(a, b - a + 1);
}

/// Applies a plain key=value config file to a parsed subcommand. Keys map to
/// long option names (underscores and dashes are interchangeable); unknown
/// keys are rejected; options already set on the command line keep their
/// values.
void apply_config_file(CLI::App* cmd, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CLI::FileError::Missing(path);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trimmed(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = path + ":" + std::to_string(line_no);
    if (eq == std::string::npos)
      throw CLI::ConfigError(where + ": expected key=value, got '" + line + "'");
    std::string key = trimmed(line.substr(0, eq));
    std::replace(key.begin(), key.end(), '_', '-');
    const std::string value = trimmed(line.substr(eq + 1));
    CLI::Option* opt = cmd->get_option_no_throw("--" + key);
    if (opt == nullptr || key == "config")
      throw CLI::ConfigError(where + ": unknown config key '" + key + "'");
    if (opt->count() > 0) continue;  // command-line flags win
    opt->add_result(value);
    opt->run_callback();
  }
}

MetricReport evaluate_dataset(const Model& model, const std::vector<Scene>& scenes,
                              GraphType graph, PotentialMode potential, std::uint64_t seed,
                              double miss_threshold) {
  MetricAggregator agg(miss_threshold);
  for (std::size_t idx = 0; idx < scenes.size(); ++idx) {
    const auto pred =
        predict_scene(model, scenes[idx], graph, potential, mix_seed(seed, idx));
    agg.add_scene(scenes[idx], pred.decode, pred.candidates, pred.beliefs);
  }
  return agg.report();
}

/// Conditional evaluation: clamp the AV to its best candidate (smallest ADE
/// against its ground truth), rerun inference, and score the other agents.
MetricReport conditional_evaluate(const Model& model, const std::vector<Scene>& scenes,
                                  GraphType graph, PotentialMode potential, std::uint64_t seed,
                                  double miss_threshold) {
  MetricAggregator agg(miss_threshold);
  for (std::size_t idx = 0; idx < scenes.size(); ++idx) {
    const Scene& scene = scenes[idx];
    auto pred = predict_scene(model, scene, graph, potential, mix_seed(seed, idx));
    const int av = scene.av_index();
    const auto gt = future_positions(scene.agents[av]);
    int best = 0;
    double best_ade = std::numeric_limits<double>::infinity();
    for (int j = 0; j < pred.candidates[av].k(); ++j) {
      const auto d = displacement(pred.candidates[av].trajectories[j].waypoints, gt,
                                  scene.agents[av].valid_mask);
      if (d.valid && d.ade < best_ade) {
        best = j;
        best_ade = d.ade;
      }
    }
    const auto clamped = conditional_clamp(unary_logits_of(pred.candidates), av, best);
    const Beliefs beliefs =
        sum_product(pred.graph, clamped, pred.tables, model.cfg.bp_iterations);
    const JointDecode decode =
        max_product(pred.graph, clamped, pred.tables, model.cfg.bp_iterations);
    agg.add_scene(scene, decode, pred.candidates, beliefs, /*exclude_agent=*/av);
  }
  return agg.report();
}

nlohmann::json config_echo(const CommonOpts& opts, const Model& model) {
  return {{"graph", opts.graph},
          {"potential", opts.potential},
          {"seed", opts.seed},
          {"k", model.cfg.k},
          {"miss_threshold", opts.miss_threshold},
          {"dataset", opts.dataset}};
}

/// Parses a "kind:weight,kind:weight,..." scenario mix specification.
std::vector<std::pair<ScenarioKind, double>> parse_mix(const std::string& spec) {
  std::vector<std::pair<ScenarioKind, double>> mix;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto colon = item.find(':');
    if (colon == std::string::npos)
      throw std::invalid_argument("mix entry '" + item + "' must be kind:weight");
    const double w = std::stod(item.substr(colon + 1));
    if (w < 0.0) throw std::invalid_argument("mix weight must be non-negative");
    mix.emplace_back(scenario_kind_from_name(item.substr(0, colon)), w);
  }
  if (mix.empty()) throw std::invalid_argument("empty scenario mix");
  return mix;
}

int run_gen_data(const std::string& kind, const std::string& mix_spec, int count,
                 std::uint64_t seed, int agents, const std::string& out) {
  GeneratorParams params;
  params.num_agents = agents;
  std::vector<std::pair<ScenarioKind, double>> mix;
  if (!mix_spec.empty()) {
    mix = parse_mix(mix_spec);
  } else if (kind == "mixed") {
    mix = {{ScenarioKind::intersection, 1.0},
           {ScenarioKind::merge, 1.0},
           {ScenarioKind::queue, 1.0},
           {ScenarioKind::random_mix, 1.0}};
  }
  std::vector<Scene> scenes;
  scenes.reserve(count);
  for (int i = 0; i < count; ++i) {
    const std::uint64_t scene_seed = mix_seed(seed, i);
    ScenarioKind k;
    if (mix.empty()) {
      k = scenario_kind_from_name(kind);
    } else {
      std::mt19937_64 rng(mix_seed(scene_seed, 0x317));
      std::vector<double> weights;
      for (const auto& [kk, w] : mix) weights.push_back(w);
      std::discrete_distribution<int> pick(weights.begin(), weights.end());
      k = mix[pick(rng)].first;
    }
    scenes.push_back(generate_scene(k, scene_seed, params));
  }
  write_dataset(out, scenes);
  log_line("wrote " + std::to_string(scenes.size()) + " scenes to " + out);
  return 0;
}

int run_train(const CommonOpts& opts, int steps, double lr, double weight_decay, int k,
              int bp_iterations) {
  const auto scenes = read_dataset(opts.dataset);
  TrainConfig cfg;
  cfg.seed = opts.seed;
  cfg.steps = steps;
  cfg.lr = lr;
  cfg.weight_decay = weight_decay;
  cfg.graph = graph_type_from_name(opts.graph);
  cfg.potential = potential_mode_from_name(opts.potential);
  cfg.model.k = k;
  cfg.model.bp_iterations = bp_iterations;
  cfg.model.miss_threshold_m = opts.miss_threshold;
  log_line("training on " + std::to_string(scenes.size()) + " scenes for " +
           std::to_string(steps) + " steps");
  const TrainResult result = train(scenes, cfg);
  std::filesystem::create_directories(opts.out);
  save_checkpoint(opts.out + "/checkpoint.json", result.model);
  write_loss_log(opts.out + "/loss_log.csv", result.log);
  log_line("checkpoint and loss log written to " + opts.out);
  return 0;
}

int run_eval(const CommonOpts& opts, const std::string& label) {
  const auto scenes = read_dataset(opts.dataset);
  const Model model = load_checkpoint(opts.checkpoint);
  const MetricReport report =
      evaluate_dataset(model, scenes, graph_type_from_name(opts.graph),
                       potential_mode_from_name(opts.potential), opts.seed, opts.miss_threshold);
  const std::string name = label.empty() ? opts.graph + "-" + opts.potential : label;
  std::filesystem::create_directories(opts.out);
  write_report_json(opts.out + "/report.json", {name, report}, config_echo(opts, model));
  write_series_files(opts.out + "/series", {{name, report}});
  std::cout << format_report_table({{name, report}});
  return 0;
}

int run_ablate(const CommonOpts& opts) {
  const auto scenes = read_dataset(opts.dataset);
  const Model model = load_checkpoint(opts.checkpoint);
  std::vector<LabeledReport> reports;
  for (GraphType type : all_graph_types()) {
    CommonOpts cur = opts;
    cur.graph = graph_type_name(type);
    const MetricReport report =
        evaluate_dataset(model, scenes, type, potential_mode_from_name(opts.potential), opts.seed,
                         opts.miss_threshold);
    reports.push_back({graph_type_name(type), report});
    std::filesystem::create_directories(opts.out);
    write_report_json(opts.out + "/report-" + graph_type_name(type) + ".json", reports.back(),
                      config_echo(cur, model));
    log_line(std::string("evaluated graph type ") + graph_type_name(type));
  }
  write_series_files(opts.out + "/series", reports);
  const std::string table = format_report_table(reports);
  std::ofstream(opts.out + "/table.txt") << table;
  std::cout << table;
  return 0;
}

int run_conditional(const CommonOpts& opts) {
  const auto scenes = read_dataset(opts.dataset);
  const Model model = load_checkpoint(opts.checkpoint);
  const MetricReport report = conditional_evaluate(
      model, scenes, graph_type_from_name(opts.graph), potential_mode_from_name(opts.potential),
      opts.seed, opts.miss_threshold);
  const std::string name = "conditional-" + opts.graph + "-" + opts.potential;
  std::filesystem::create_directories(opts.out);
  write_report_json(opts.out + "/report.json", {name, report}, config_echo(opts, model));
  write_series_files(opts.out + "/series", {{name, report}});
  std::cout << format_report_table({{name, report}});
  return 0;
}

int run_check_gradients(std::uint64_t seed, int k) {
  // Small perturbations keep zero-initialized heads off their symmetric point.
  Model model = make_model({.k = k}, seed);
  std::mt19937_64 rng(mix_seed(seed, 0xC4EC));
  std::uniform_real_distribution<double> noise(-0.05, 0.05);
  for (auto& p : model.params)
    for (double& v : p.value) v += noise(rng);

  GeneratorParams params;
  params.num_agents = 3;
  const Scene tree_scene = generate_scene(ScenarioKind::random_mix, mix_seed(seed, 1), params);
  const Scene pair_scene = generate_scene(ScenarioKind::intersection, mix_seed(seed, 2));

  bool ok = true;
  {
    const auto report = full_model_gradient_check(tree_scene, model, GraphType::av_star, 1e-6,
                                                  /*max_per_param=*/8, mix_seed(seed, 3));
    const bool pass = report.max_rel_err < 1e-4;
    ok = ok && pass;
    std::cout << (pass ? "PASS" : "FAIL") << " full-model finite-diff check over "
              << report.checked << " sampled parameter entries: max rel err "
              << report.max_rel_err << " (worst " << report.worst_param << ")\n";
  }
  {
    const auto report = gradient_equivalence_check(pair_scene, model, GraphType::av_star, 0, true);
    const bool pass = report.max_rel_dev < 1e-4;
    ok = ok && pass;
    std::cout << (pass ? "PASS" : "FAIL") << " exact-likelihood gradient equivalence over "
              << report.checked << " logits: max rel dev " << report.max_rel_dev << "\n";
  }
  {
    const auto report =
        gradient_equivalence_check(pair_scene, model, GraphType::av_star, 0, false);
    const bool pass = report.max_rel_dev > 1e-2;
    ok = ok && pass;
    std::cout << (pass ? "PASS" : "FAIL")
              << " negative control (stop-gradient removed) deviates: " << report.max_rel_dev
              << "\n";
  }
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"joint multi-agent trajectory prediction experiments"};
  app.require_subcommand(1);

  // gen-data
  std::string gd_kind = "intersection", gd_out = "dataset.jsonl", gd_mix;
  int gd_count = 100, gd_agents = 8;
  std::uint64_t gd_seed = 1;
  auto* gen = app.add_subcommand("gen-data", "generate a synthetic scene dataset");
  gen->add_option("--kind", gd_kind, "intersection|merge|queue|random-mix|mixed");
  gen->add_option("--mix", gd_mix, "weighted scenario mix, e.g. intersection:0.6,queue:0.2,merge:0.2");
  gen->add_option("--count", gd_count, "number of scenes")->check(CLI::PositiveNumber);
  gen->add_option("--seed", gd_seed, "generator seed");
  gen->add_option("--agents", gd_agents, "agents per random-mix scene")->check(CLI::Range(1, 40));
  gen->add_option("--out", gd_out, "output JSONL path");
  std::string gen_config;
  attach_config(gen, gen_config);

  // shared options builder
  CommonOpts train_opts, eval_opts, abl_opts, cond_opts;
  const auto add_common = [](CLI::App* cmd, CommonOpts& o, bool needs_ckpt) {
    cmd->add_option("--dataset", o.dataset, "scene dataset (JSONL)")->required();
    if (needs_ckpt)
      cmd->add_option("--checkpoint", o.checkpoint, "model checkpoint")->required();
    cmd->add_option("--out", o.out, "output directory")->required();
    cmd->add_option("--graph", o.graph,
                    "none|av-star|random-star|dynamic|fully-connected");
    cmd->add_option("--potential", o.potential, "learned|heuristic|none");
    cmd->add_option("--seed", o.seed, "run seed");
    cmd->add_option("--miss-threshold", o.miss_threshold, "FDE miss threshold (m)");
    attach_config(cmd, o.config_file);
  };

  // train
  int tr_steps = 2000, tr_k = 6, tr_bp = 3;
  double tr_lr = 1e-3, tr_wd = 0.0;
  auto* tr = app.add_subcommand("train", "train a model on a dataset");
  add_common(tr, train_opts, false);
  tr->add_option("--steps", tr_steps, "training steps")->check(CLI::PositiveNumber);
  tr->add_option("--lr", tr_lr, "learning rate");
  tr->add_option("--weight-decay", tr_wd, "decoupled weight decay");
  tr->add_option("--k", tr_k, "candidates per agent")->check(CLI::Range(2, 16));
  tr->add_option("--bp-iterations", tr_bp, "message passing iterations")->check(CLI::PositiveNumber);

  // eval
  std::string eval_label;
  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
  add_common(ev, eval_opts, true);
  ev->add_option("--label", eval_label, "row label for the report table");

  // ablate-graphs
  auto* ab = app.add_subcommand("ablate-graphs", "evaluate across every graph type");
  add_common(ab, abl_opts, true);

  // conditional-eval
  auto* cd = app.add_subcommand("conditional-eval",
                                "clamp the AV to its best candidate and score the rest");
  add_common(cd, cond_opts, true);

  // check-gradients
  std::uint64_t cg_seed = 1;
  int cg_k = 3;
  auto* cg = app.add_subcommand("check-gradients", "finite-difference and exact-likelihood checks");
  cg->add_option("--seed", cg_seed, "seed for the probe scenes and weights");
  cg->add_option("--k", cg_k, "candidates per agent")->check(CLI::Range(2, 6));
  std::string cg_config;
  attach_config(cg, cg_config);

  try {
    app.parse(argc, argv);
    if (gen->parsed() && !gen_config.empty()) apply_config_file(gen, gen_config);
    if (tr->parsed() && !train_opts.config_file.empty())
      apply_config_file(tr, train_opts.config_file);
    if (ev->parsed() && !eval_opts.config_file.empty()) apply_config_file(ev, eval_opts.config_file);
    if (ab->parsed() && !abl_opts.config_file.empty()) apply_config_file(ab, abl_opts.config_file);
    if (cd->parsed() && !cond_opts.config_file.empty())
      apply_config_file(cd, cond_opts.config_file);
    if (cg->parsed() && !cg_config.empty()) apply_config_file(cg, cg_config);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;  // usage error
  }

  try {
    if (gen->parsed()) return run_gen_data(gd_kind, gd_mix, gd_count, gd_seed, gd_agents, gd_out);
    if (tr->parsed()) return run_train(train_opts, tr_steps, tr_lr, tr_wd, tr_k, tr_bp);
    if (ev->parsed()) return run_eval(eval_opts, eval_label);
    if (ab->parsed()) return run_ablate(abl_opts);
    if (cd->parsed()) return run_conditional(cond_opts);
    if (cg->parsed()) return run_check_gradients(cg_seed, cg_k);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
