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

// Metric report emission: an aligned text table over the fixed metric column
// set, a JSON report with a config echo, and per-metric series files for
// external plotting. All output is deterministic for identical inputs.

#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "jointpred/metrics.hpp"

namespace jointpred {

struct LabeledReport {
  std::string label;
  MetricReport report;
};

inline const std::vector<std::string>& metric_column_names() {
  static const std::vector<std::string> kColumns = {
      "overlap_all", "overlap_av",    "minADE",        "minFDE",         "miss_rate",
      "map",         "pair_minSADE",  "pair_minSFDE",  "pair_sMissRate"};
  return kColumns;
}

inline double metric_value(const MetricReport& r, const std::string& column) {
  if (column == "overlap_all") return r.overlap_all;
  if (column == "overlap_av") return r.overlap_av;
  if (column == "minADE") return r.min_ade;
  if (column == "minFDE") return r.min_fde;
  if (column == "miss_rate") return r.miss_rate;
  if (column == "map") return r.map;
  if (column == "pair_minSADE") return r.pair_min_sade;
  if (column == "pair_minSFDE") return r.pair_min_sfde;
  if (column == "pair_sMissRate") return r.pair_smiss_rate;
  throw std::invalid_argument("unknown metric column: " + column);
}

inline std::string format_metric(double v) {
  if (std::isnan(v)) return "-";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

/// Aligned text table, one row per labeled report.
inline std::string format_report_table(const std::vector<LabeledReport>& reports) {
  const auto& columns = metric_column_names();
  std::size_t label_width = 5;
  for (const auto& r : reports) label_width = std::max(label_width, r.label.size());

  std::string out;
  auto pad = [&out](const std::string& s, std::size_t width) {
    out += s;
    out.append(width > s.size() ? width - s.size() : 0, ' ');
    out += "  ";
  };
  pad("model", label_width);
  for (const auto& c : columns) pad(c, std::max<std::size_t>(c.size(), 9));
  out += '\n';
  for (const auto& r : reports) {
    pad(r.label, label_width);
    for (const auto& c : columns)
      pad(format_metric(metric_value(r.report, c)), std::max<std::size_t>(c.size(), 9));
    out += '\n';
  }
  return out;
}

inline nlohmann::json report_to_json(const MetricReport& r) {
  nlohmann::json j;
  for (const auto& c : metric_column_names()) {
    const double v = metric_value(r, c);
    if (std::isnan(v))
      j[c] = nullptr;
    else
      j[c] = v;
  }
  j["counts"] = {{"scenes", r.scenes}, {"agents", r.agents}, {"pairs", r.pairs}};
  return j;
}

inline void write_report_json(const std::string& path, const LabeledReport& report,
                              const nlohmann::json& config_echo) {
  nlohmann::json j = report_to_json(report.report);
  j["label"] = report.label;
  j["config"] = config_echo;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write report: " + path);
  out << j.dump(2) << '\n';
}

/// One CSV per metric under `dir`, rows "label,value" in report order.
inline void write_series_files(const std::string& dir, const std::vector<LabeledReport>& reports) {
  std::filesystem::create_directories(dir);
  for (const auto& c : metric_column_names()) {
    std::ofstream out(dir + "/" + c + ".csv");
    if (!out) throw std::runtime_error("cannot write series file for " + c);
    out << "label,value\n";
    for (const auto& r : reports) {
      const double v = metric_value(r.report, c);
      out << r.label << ',' << (std::isnan(v) ? "" : format_metric(v)) << '\n';
    }
  }
}

}  // namespace jointpred
