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

// Dataset files are line-delimited JSON, one scene per line. Doubles are
// emitted with shortest round-trip formatting, so parse(serialize(s)) == s
// holds bit-exactly.

#pragma once

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "jointpred/scene.hpp"

namespace jointpred {

class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline std::string serialize_scene(const Scene& scene) {
  nlohmann::json j;
  j["scene_id"] = scene.scene_id;
  j["dt"] = scene.dt;
  j["rng_seed"] = scene.rng_seed;
  auto& agents = j["agents"] = nlohmann::json::array();
  for (const auto& a : scene.agents) {
    nlohmann::json ja;
    ja["id"] = a.id;
    ja["type"] = agent_type_name(a.type);
    ja["length"] = a.length;
    ja["width"] = a.width;
    ja["is_av"] = a.is_av;
    auto& hist = ja["history"] = nlohmann::json::array();
    for (const auto& h : a.history)
      hist.push_back({h.pose.x, h.pose.y, h.pose.yaw, h.velocity});
    auto& fut = ja["future"] = nlohmann::json::array();
    for (const auto& f : a.future_gt) fut.push_back({f.x, f.y, f.yaw});
    auto& valid = ja["valid"] = nlohmann::json::array();
    for (bool v : a.valid_mask) valid.push_back(v ? 1 : 0);
    agents.push_back(std::move(ja));
  }
  return j.dump();
}

inline Scene parse_scene(const std::string& record) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(record);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("malformed scene record: ") + e.what());
  }
  Scene scene;
  try {
    scene.scene_id = j.at("scene_id").get<std::string>();
    scene.dt = j.at("dt").get<double>();
    scene.rng_seed = j.at("rng_seed").get<std::uint64_t>();
    for (const auto& ja : j.at("agents")) {
      AgentTrack a;
      a.id = ja.at("id").get<int>();
      a.type = agent_type_from_name(ja.at("type").get<std::string>());
      a.length = ja.at("length").get<double>();
      a.width = ja.at("width").get<double>();
      a.is_av = ja.at("is_av").get<bool>();
      for (const auto& h : ja.at("history")) {
        if (h.size() != 4) throw ParseError("history step must have 4 fields");
        HistoryStep step;
        step.pose.x = h[0].get<double>();
        step.pose.y = h[1].get<double>();
        step.pose.yaw = h[2].get<double>();
        step.velocity = h[3].get<double>();
        a.history.push_back(step);
      }
      for (const auto& f : ja.at("future")) {
        if (f.size() != 3) throw ParseError("future step must have 3 fields");
        Pose2 p;
        p.x = f[0].get<double>();
        p.y = f[1].get<double>();
        p.yaw = f[2].get<double>();
        a.future_gt.push_back(p);
      }
      for (const auto& v : ja.at("valid")) a.valid_mask.push_back(v.get<int>() != 0);
      scene.agents.push_back(std::move(a));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("scene record field error (scene_id='" + scene.scene_id + "'): " + e.what());
  }
  validate_scene(scene);
  return scene;
}

inline void write_dataset(const std::string& path, const std::vector<Scene>& scenes) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  for (const auto& s : scenes) out << serialize_scene(s) << '\n';
}

inline std::vector<Scene> read_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset: " + path);
  std::vector<Scene> scenes;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      scenes.push_back(parse_scene(line));
    } catch (const std::exception& e) {
      throw ParseError(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return scenes;
}

}  // namespace jointpred
