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

#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "jointpred/autodiff.hpp"
#include "jointpred/numeric.hpp"
#include "jointpred/optimizer.hpp"

using namespace jointpred;
using namespace jointpred::ad;

namespace {

ParamStore small_mlp_params(std::uint64_t seed, const std::vector<int>& dims) {
  ParamStore store;
  add_mlp_params(store, "net.", dims);
  std::mt19937_64 rng(seed);
  for (auto& p : store) init_xavier_uniform(p, rng);
  return store;
}

}  // namespace

TEST_CASE("mlp with zero weights returns zero") {
  ParamStore store;
  add_mlp_params(store, "net.", {3, 4, 2});
  Tape tape(&store);
  const Var y = mlp_forward(tape, tape.constant({1.0, -2.0, 0.5}), mlp_layer_names("net.", 2),
                            store);
  for (double v : tape.val(y)) CHECK(v == 0.0);
}

TEST_CASE("single linear layer equals direct matrix-vector product") {
  ParamStore store;
  add_mlp_params(store, "net.", {2, 3});
  store.at("net.0.w").value = {1.0, 2.0, -1.0, 0.5, 3.0, -2.0};  // 3x2 row-major
  store.at("net.0.b").value = {0.1, -0.2, 0.3};
  Tape tape(&store);
  const Var y = mlp_forward(tape, tape.constant({2.0, -1.0}), {"net.0"}, store);
  const auto& v = tape.val(y);
  CHECK(v[0] == Catch::Approx(1.0 * 2.0 + 2.0 * -1.0 + 0.1));
  CHECK(v[1] == Catch::Approx(-1.0 * 2.0 + 0.5 * -1.0 - 0.2));
  CHECK(v[2] == Catch::Approx(3.0 * 2.0 + -2.0 * -1.0 + 0.3));
}

TEST_CASE("mlp_forward flags shape mismatches by layer name") {
  ParamStore store;
  add_mlp_params(store, "net.", {3, 4});
  Tape tape(&store);
  CHECK_THROWS_WITH(mlp_forward(tape, tape.constant({1.0, 2.0}), {"net.0"}, store),
                    Catch::Matchers::ContainsSubstring("net.0"));
}

TEST_CASE("softmax cross entropy hand values and shift invariance") {
  Tape tape;
  CHECK(tape.scalar(tape.softmax_cross_entropy(tape.constant({0.0, 0.0}), 0)) ==
        Catch::Approx(std::log(2.0)));
  CHECK(tape.scalar(tape.softmax_cross_entropy(tape.constant({3.7, 3.7, 3.7, 3.7}), 2)) ==
        Catch::Approx(std::log(4.0)));

  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> dist(-4.0, 4.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> logits(6);
    for (double& l : logits) l = dist(rng);
    const int label = trial % 6;
    // naive oracle
    double denom = 0.0;
    for (double l : logits) denom += std::exp(l);
    const double expect = -std::log(std::exp(logits[label]) / denom);
    CHECK(std::abs(tape.scalar(tape.softmax_cross_entropy(tape.constant(logits), label)) -
                   expect) < 1e-12);

    std::vector<double> shifted = logits;
    for (double& l : shifted) l += 13.25;
    const double a = tape.scalar(tape.softmax_cross_entropy(tape.constant(logits), label));
    const double b = tape.scalar(tape.softmax_cross_entropy(tape.constant(shifted), label));
    CHECK(std::abs(a - b) < 1e-12);
  }
  CHECK_THROWS_AS(tape.softmax_cross_entropy(tape.constant({0.0, 0.0}), 2), std::out_of_range);
}

TEST_CASE("cross entropy tolerates -1e9 sentinel logits") {
  Tape tape;
  const Var loss = tape.softmax_cross_entropy(tape.constant({0.3, kNegInfLogit, 0.3}), 0);
  CHECK(std::isfinite(tape.scalar(loss)));
  CHECK(tape.scalar(loss) == Catch::Approx(std::log(2.0)));
  tape.backward(loss);
}

TEST_CASE("huber matches the quadratic and linear branches") {
  Tape tape;
  CHECK(tape.scalar(tape.huber(tape.constant({1.0, 2.0}), {1.0, 2.0}, 1.0)) == 0.0);
  CHECK(tape.scalar(tape.huber(tape.constant({0.5}), {0.0}, 1.0)) == Catch::Approx(0.125));
  CHECK(tape.scalar(tape.huber(tape.constant({3.0}), {0.0}, 1.0)) == Catch::Approx(2.5));
  CHECK_THROWS_AS(tape.huber(tape.constant({1.0}), {1.0, 2.0}, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(tape.huber(tape.constant({1.0}), {1.0}, 0.0), std::invalid_argument);
}

TEST_CASE("stop gradient is a forward identity that cuts the product rule") {
  ParamStore store;
  store.add("x", 1).value = {3.0};
  Tape tape(&store);
  const Var x = tape.param("x");
  CHECK(tape.val(tape.stop_gradient(x))[0] == 3.0);

  // d/dx [ sg(x) * x ] = sg(x) = 3, not 6
  const Var y = tape.mul(tape.stop_gradient(x), x);
  tape.backward(y);
  CHECK(tape.gradients()[0][0] == Catch::Approx(3.0));
}

TEST_CASE("backward on a simple quadratic") {
  ParamStore store;
  store.add("w", 1).value = {2.0};
  Tape tape(&store);
  const Var w = tape.param("w");
  tape.backward(tape.mul(w, w));
  CHECK(tape.gradients()[0][0] == Catch::Approx(4.0));
}

TEST_CASE("detached branch contributes zero gradient") {
  ParamStore store;
  store.add("w", 2).value = {1.5, -0.5};
  Tape tape(&store);
  const Var w = tape.param("w");
  const Var detached = tape.stop_gradient(tape.scale(w, 10.0));
  const Var loss = tape.sum({tape.softmax_cross_entropy(detached, 0)});
  tape.backward(loss);
  CHECK(tape.gradients()[0][0] == 0.0);
  CHECK(tape.gradients()[0][1] == 0.0);
}

TEST_CASE("two-layer mlp with cross entropy matches finite differences") {
  ParamStore store = small_mlp_params(21, {5, 8, 3});
  const LossFn loss = [&](const ParamStore& params, GradientStore* grads) {
    Tape tape(&params);
    const Var x = tape.constant({0.3, -1.2, 0.8, 2.0, -0.4});
    const Var out = mlp_forward(tape, x, mlp_layer_names("net.", 2), params);
    const Var l = tape.softmax_cross_entropy(out, 1);
    if (grads) {
      tape.backward(l);
      *grads = tape.gradients();
    }
    return tape.scalar(l);
  };
  const auto report = finite_diff_check(loss, store, 1e-6);
  CAPTURE(report.worst_param, report.analytic, report.numeric);
  CHECK(report.max_rel_err < 1e-6);
  CHECK(report.checked == static_cast<long>(store.total_elements()));
}

TEST_CASE("tape primitives pass finite-difference checks") {
  ParamStore store;
  store.add("a", 6).value = {0.5, -1.0, 2.0, 0.1, -0.7, 1.3};
  store.add("w", 2, 3).value = {1.0, -0.5, 0.25, 0.0, 2.0, -1.0};
  const LossFn loss = [&](const ParamStore& params, GradientStore* grads) {
    Tape tape(&params);
    const Var a = tape.param("a");
    const Var head = tape.slice(a, 0, 3);
    const Var tail = tape.slice(a, 3, 3);
    const Var mixed = tape.relu(tape.add(head, tape.negate(tail)));
    const Var rotated = tape.rigid(tape.concat({mixed, tape.gather(a, {5, 0, 2})}), 0.8, -0.6,
                                   0.3, -0.2);
    const Var projected = tape.matvec(tape.param("w"), 2, 3, tape.slice(rotated, 0, 3));
    const Var hub = tape.huber(tape.concat({projected, tape.slice(rotated, 3, 3)}),
                               {0.2, -0.3, 1.0, 0.0, -2.0}, 0.7);
    const Var ce = tape.softmax_cross_entropy(tape.mul(projected, projected), 1);
    const Var l = tape.sum({hub, ce});
    if (grads) {
      tape.backward(l);
      *grads = tape.gradients();
    }
    return tape.scalar(l);
  };
  const auto report = finite_diff_check(loss, store, 1e-6);
  CAPTURE(report.worst_param, report.worst_index, report.analytic, report.numeric);
  CHECK(report.max_rel_err < 1e-6);
}

TEST_CASE("finite_diff_check catches a corrupted gradient") {
  ParamStore store;
  store.add("w", 3).value = {1.0, 2.0, 3.0};
  const LossFn corrupted = [&](const ParamStore& params, GradientStore* grads) {
    Tape tape(&params);
    const Var w = tape.param("w");
    const Var l = tape.huber(w, {0.0, 0.0, 0.0}, 10.0);
    if (grads) {
      tape.backward(l);
      *grads = tape.gradients();
      for (double& g : (*grads)[0]) g *= 2.0;  // deliberate corruption
    }
    return tape.scalar(l);
  };
  const auto report = finite_diff_check(corrupted, store, 1e-6);
  CHECK(report.max_rel_err > 1e-2);
}

TEST_CASE("finite_diff_check on a linear loss is tight") {
  ParamStore store;
  store.add("w", 4).value = {1.0, -2.0, 0.5, 3.0};
  const LossFn loss = [&](const ParamStore& params, GradientStore* grads) {
    Tape tape(&params);
    const Var w = tape.param("w");
    const Var l = tape.sum({tape.gather(tape.scale(w, 2.5), {0}), tape.gather(w, {2})});
    if (grads) {
      tape.backward(l);
      *grads = tape.gradients();
    }
    return tape.scalar(l);
  };
  // central differences are exact for a linear loss; the wider step avoids
  // floating-point cancellation in the quotient
  CHECK(finite_diff_check(loss, store, 1e-4).max_rel_err < 1e-10);
}

TEST_CASE("unary stop-gradient loss has the analytic cross-entropy gradient") {
  // CE(mu + sg(mu_hat - mu), label): gradient w.r.t. mu is softmax(mu_hat) - onehot.
  ParamStore store;
  store.add("mu", 4).value = {0.2, -0.4, 1.1, 0.0};
  const std::vector<double> mu_hat = {0.5, 0.1, -0.3, 0.9};
  const int label = 2;
  Tape tape(&store);
  const Var mu = tape.param("mu");
  const Var routed = tape.add(mu, tape.stop_gradient(tape.sub(tape.constant(mu_hat), mu)));
  const Var loss = tape.softmax_cross_entropy(routed, label);

  // forward value equals CE evaluated at mu_hat directly
  Tape plain;
  CHECK(std::abs(tape.scalar(loss) -
                 plain.scalar(plain.softmax_cross_entropy(plain.constant(mu_hat), label))) <
        1e-12);

  tape.backward(loss);
  const auto probs = softmax(mu_hat);
  const auto grads = tape.gradients();
  for (int i = 0; i < 4; ++i)
    CHECK(std::abs(grads[0][i] - (probs[i] - (i == label ? 1.0 : 0.0))) < 1e-10);
}

TEST_CASE("adamw leaves parameters alone under zero gradients") {
  ParamStore store;
  store.add("w", 3).value = {1.0, -2.0, 0.5};
  const auto before = store.at("w").value;
  GradientStore grads(store);
  AdamWState state = AdamWState::for_store(store);
  adamw_step(store, grads, {.lr = 0.1, .weight_decay = 0.0}, state);
  CHECK(store.at("w").value == before);
}

TEST_CASE("adamw first step is close to lr * sign(grad)") {
  ParamStore store;
  store.add("w", 1).value = {5.0};
  GradientStore grads(store);
  grads[0][0] = 0.37;
  AdamWState state = AdamWState::for_store(store);
  const AdamWConfig cfg{.lr = 0.01};
  adamw_step(store, grads, cfg, state);
  // bias-corrected first step: m_hat = g, v_hat = g^2 -> step = lr * g / (|g| + eps)
  const double expect = 5.0 - 0.01 * 0.37 / (std::abs(0.37) + cfg.eps);
  CHECK(store.at("w").value[0] == Catch::Approx(expect).epsilon(1e-9));
}

TEST_CASE("adamw reaches the minimum of a convex quadratic") {
  // f(w) = 0.5 * sum (w - target)^2, minimum value 0
  ParamStore store;
  store.add("w", 2).value = {3.05, -1.03};
  const std::vector<double> target = {3.0, -1.0};
  AdamWState state = AdamWState::for_store(store);
  const AdamWConfig cfg{.lr = 5e-4};
  double loss = 0.0;
  for (int step = 0; step < 200; ++step) {
    GradientStore grads(store);
    loss = 0.0;
    for (int i = 0; i < 2; ++i) {
      const double e = store.at("w").value[i] - target[i];
      loss += 0.5 * e * e;
      grads[0][i] = e;
    }
    adamw_step(store, grads, cfg, state);
  }
  CHECK(loss < 1e-6);
}

TEST_CASE("adamw rejects non-finite gradients with the parameter name") {
  ParamStore store;
  store.add("spiky", 1).value = {1.0};
  GradientStore grads(store);
  grads[0][0] = std::numeric_limits<double>::quiet_NaN();
  AdamWState state = AdamWState::for_store(store);
  CHECK_THROWS_WITH(adamw_step(store, grads, {}, state),
                    Catch::Matchers::ContainsSubstring("spiky"));
}

TEST_CASE("weight decay is decoupled from the gradient step") {
  ParamStore store;
  store.add("w", 1).value = {2.0};
  GradientStore grads(store);  // zero gradient
  AdamWState state = AdamWState::for_store(store);
  adamw_step(store, grads, {.lr = 0.1, .weight_decay = 0.5}, state);
  CHECK(store.at("w").value[0] == Catch::Approx(2.0 - 0.1 * 0.5 * 2.0));
}
