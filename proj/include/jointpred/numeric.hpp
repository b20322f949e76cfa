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

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

namespace jointpred {

/// Finite stand-in for -infinity log potentials. exp(kNegInfLogit) underflows
/// to exactly 0 in double arithmetic, so clamped states carry zero mass while
/// every intermediate stays finite.
inline constexpr double kNegInfLogit = -1e9;

/// log(sum_i exp(v_i)), stabilized by the running maximum.
inline double log_sum_exp(std::span<const double> v) {
  if (v.empty()) return -std::numeric_limits<double>::infinity();
  const double m = *std::max_element(v.begin(), v.end());
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

inline double log_sum_exp(const std::vector<double>& v) {
  return log_sum_exp(std::span<const double>(v));
}

/// In-place shift so that log_sum_exp(v) == 0.
inline void normalize_logits(std::vector<double>& v) {
  const double lse = log_sum_exp(v);
  for (double& x : v) x -= lse;
}

/// In-place shift so that max(v) == 0.
inline void normalize_max(std::vector<double>& v) {
  const double m = *std::max_element(v.begin(), v.end());
  for (double& x : v) x -= m;
}

inline std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> p(logits.begin(), logits.end());
  const double lse = log_sum_exp(logits);
  for (double& x : p) x = std::exp(x - lse);
  return p;
}

inline std::vector<double> softmax(const std::vector<double>& logits) {
  return softmax(std::span<const double>(logits));
}

/// Index of the largest entry; ties resolve to the lowest index. This is the
/// single argmax convention used everywhere logits are decoded.
inline int argmax_lowest(std::span<const double> v) {
  int best = 0;
  for (int i = 1; i < static_cast<int>(v.size()); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

inline int argmax_lowest(const std::vector<double>& v) {
  return argmax_lowest(std::span<const double>(v));
}

/// splitmix64; used to derive independent per-scene seeds from a run seed.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace jointpred
