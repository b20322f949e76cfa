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

#include <cmath>
#include <stdexcept>
#include <vector>

#include "jointpred/autodiff.hpp"

namespace jointpred::ad {

struct AdamWConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
};

struct AdamWState {
  long step = 0;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;

  static AdamWState for_store(const ParamStore& store) {
    AdamWState s;
    s.m.reserve(store.count());
    s.v.reserve(store.count());
    for (const auto& p : store) {
      s.m.emplace_back(p.value.size(), 0.0);
      s.v.emplace_back(p.value.size(), 0.0);
    }
    return s;
  }
};

/// One AdamW update with decoupled weight decay and bias-corrected moments.
inline void adamw_step(ParamStore& params, const GradientStore& grads, const AdamWConfig& cfg,
                       AdamWState& state) {
  if (state.m.size() != params.count())
    throw std::invalid_argument("adamw_step: state does not match parameter store");
  ++state.step;
  const double bc1 = 1.0 - std::pow(cfg.beta1, state.step);
  const double bc2 = 1.0 - std::pow(cfg.beta2, state.step);
  for (std::size_t pi = 0; pi < params.count(); ++pi) {
    auto& p = params[pi];
    const auto& g = grads[pi];
    auto& m = state.m[pi];
    auto& v = state.v[pi];
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      if (!std::isfinite(g[i]))
        throw std::runtime_error("adamw_step: non-finite gradient in parameter '" + p.name + "'");
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
      const double m_hat = m[i] / bc1;
      const double v_hat = v[i] / bc2;
      p.value[i] -= cfg.lr * (m_hat / (std::sqrt(v_hat) + cfg.eps) +
                              cfg.weight_decay * p.value[i]);
    }
  }
}

}  // namespace jointpred::ad
