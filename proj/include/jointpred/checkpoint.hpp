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

// Checkpoint format (version 1): a JSON document carrying the model config
// and every named parameter with its shape and row-major 64-bit values.
// Doubles round-trip exactly.

#pragma once

#include <fstream>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

#include "jointpred/model.hpp"

namespace jointpred {

inline constexpr int kCheckpointVersion = 1;

inline void save_checkpoint(const std::string& path, const Model& model) {
  nlohmann::json j;
  j["format"] = "jointpred-checkpoint";
  j["version"] = kCheckpointVersion;
  j["model"] = {{"k", model.cfg.k},
                {"backbone_hidden", model.cfg.backbone_hidden},
                {"anchor_speed_vehicle", model.cfg.anchor_speed_vehicle},
                {"anchor_speed_pedestrian", model.cfg.anchor_speed_pedestrian},
                {"anchor_speed_cyclist", model.cfg.anchor_speed_cyclist},
                {"bp_iterations", model.cfg.bp_iterations},
                {"huber_delta", model.cfg.huber_delta},
                {"miss_threshold_m", model.cfg.miss_threshold_m}};
  auto& params = j["params"] = nlohmann::json::array();
  for (const auto& p : model.params)
    params.push_back({{"name", p.name}, {"rows", p.rows}, {"cols", p.cols}, {"value", p.value}});
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
  out << j.dump() << '\n';
}

inline Model load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error("malformed checkpoint " + path + ": " + e.what());
  }
  if (j.value("format", "") != "jointpred-checkpoint")
    throw std::runtime_error("not a jointpred checkpoint: " + path);
  if (j.value("version", 0) != kCheckpointVersion)
    throw std::runtime_error("unsupported checkpoint version " +
                             std::to_string(j.value("version", 0)));
  Model model;
  const auto& m = j.at("model");
  model.cfg.k = m.at("k").get<int>();
  model.cfg.backbone_hidden = m.at("backbone_hidden").get<int>();
  model.cfg.anchor_speed_vehicle = m.at("anchor_speed_vehicle").get<double>();
  model.cfg.anchor_speed_pedestrian = m.at("anchor_speed_pedestrian").get<double>();
  model.cfg.anchor_speed_cyclist = m.at("anchor_speed_cyclist").get<double>();
  model.cfg.bp_iterations = m.at("bp_iterations").get<int>();
  model.cfg.huber_delta = m.at("huber_delta").get<double>();
  model.cfg.miss_threshold_m = m.at("miss_threshold_m").get<double>();
  for (const auto& jp : j.at("params")) {
    auto& p = model.params.add(jp.at("name").get<std::string>(), jp.at("rows").get<int>(),
                               jp.at("cols").get<int>());
    p.value = jp.at("value").get<std::vector<double>>();
    if (static_cast<int>(p.value.size()) != p.rows * p.cols)
      throw std::runtime_error("checkpoint parameter '" + p.name + "' has inconsistent shape");
  }
  model.anchors = build_anchors(model.cfg.k, model.cfg);
  return model;
}

}  // namespace jointpred
