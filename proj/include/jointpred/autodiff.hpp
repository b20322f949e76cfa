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

// Reverse-mode automatic differentiation over vector-valued tape nodes.
// Every primitive records its inputs by node id; backward replays the tape
// in reverse, accumulating exact gradients into parameter leaves. All values
// are 64-bit floats.

#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "jointpred/numeric.hpp"

namespace jointpred::ad {

// ---------------------------------------------------------------------------
// Parameter storage
// ---------------------------------------------------------------------------

/// A named matrix (rows x cols, row-major) or vector (cols == 1) of doubles.
struct Param {
  std::string name;
  int rows = 0;
  int cols = 1;
  std::vector<double> value;

  [[nodiscard]] int size() const { return rows * cols; }
};

/// Ordered collection of uniquely named parameters. Shapes are fixed once
/// added; iteration order is insertion order, which keeps every gradient
/// reduction and optimizer sweep deterministic.
class ParamStore {
 public:
  Param& add(const std::string& name, int rows, int cols = 1) {
    if (index_.count(name)) throw std::invalid_argument("duplicate parameter: " + name);
    index_[name] = static_cast<int>(params_.size());
    params_.push_back({name, rows, cols, std::vector<double>(rows * cols, 0.0)});
    return params_.back();
  }

  [[nodiscard]] bool has(const std::string& name) const { return index_.count(name) > 0; }

  [[nodiscard]] int index_of(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::out_of_range("unknown parameter: " + name);
    return it->second;
  }

  [[nodiscard]] const Param& at(const std::string& name) const { return params_[index_of(name)]; }
  Param& at(const std::string& name) { return params_[index_of(name)]; }

  [[nodiscard]] std::size_t count() const { return params_.size(); }
  [[nodiscard]] const Param& operator[](std::size_t i) const { return params_[i]; }
  Param& operator[](std::size_t i) { return params_[i]; }

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  [[nodiscard]] auto begin() const { return params_.begin(); }
  [[nodiscard]] auto end() const { return params_.end(); }

  [[nodiscard]] std::size_t total_elements() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.value.size();
    return n;
  }

 private:
  std::vector<Param> params_;
  std::unordered_map<std::string, int> index_;
};

/// Gradients aligned one-to-one with a ParamStore.
class GradientStore {
 public:
  GradientStore() = default;
  explicit GradientStore(const ParamStore& store) {
    grads_.reserve(store.count());
    for (const auto& p : store) grads_.emplace_back(p.value.size(), 0.0);
  }

  std::vector<double>& operator[](std::size_t i) { return grads_[i]; }
  [[nodiscard]] const std::vector<double>& operator[](std::size_t i) const { return grads_[i]; }
  [[nodiscard]] std::size_t count() const { return grads_.size(); }

  [[nodiscard]] double max_abs() const {
    double m = 0.0;
    for (const auto& g : grads_)
      for (double x : g) m = std::max(m, std::abs(x));
    return m;
  }

 private:
  std::vector<std::vector<double>> grads_;
};

/// Glorot-uniform fill: U(-a, a) with a = sqrt(6 / (fan_in + fan_out)).
inline void init_xavier_uniform(Param& p, std::mt19937_64& rng) {
  const double fan_out = p.rows;
  const double fan_in = p.cols > 1 ? p.cols : p.rows;  // vectors: treat as fan_in
  const double a = std::sqrt(6.0 / (fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-a, a);
  for (double& v : p.value) v = dist(rng);
}

// ---------------------------------------------------------------------------
// Tape
// ---------------------------------------------------------------------------

/// Handle to a tape node.
struct Var {
  int id = -1;
  int size = 0;

  [[nodiscard]] bool valid() const { return id >= 0; }
};

class Tape {
 public:
  explicit Tape(const ParamStore* params = nullptr) : params_(params) {}

  // ---- leaves ----

  Var constant(std::vector<double> v) { return push(std::move(v), nullptr); }
  Var constant(double v) { return push({v}, nullptr); }

  /// Parameter leaf; repeated requests for the same name share one node, so
  /// weight sharing accumulates gradients naturally.
  Var param(const std::string& name) {
    if (!params_) throw std::logic_error("tape has no parameter store attached");
    auto it = param_vars_.find(name);
    if (it != param_vars_.end()) return it->second;
    const int index = params_->index_of(name);
    Var v = push(std::vector<double>((*params_)[index].value), nullptr);
    param_leaves_.push_back({v.id, index});
    param_vars_[name] = v;
    return v;
  }

  // ---- primitives ----

  Var add(Var a, Var b) {
    check_same(a, b, "add");
    std::vector<double> out(a.size);
    for (int i = 0; i < a.size; ++i) out[i] = val(a)[i] + val(b)[i];
    return push(std::move(out), [a, b](Tape& t, const std::vector<double>& g) {
      t.accumulate(a, g);
      t.accumulate(b, g);
    });
  }

  Var sub(Var a, Var b) {
    check_same(a, b, "sub");
    std::vector<double> out(a.size);
    for (int i = 0; i < a.size; ++i) out[i] = val(a)[i] - val(b)[i];
    return push(std::move(out), [a, b](Tape& t, const std::vector<double>& g) {
      t.accumulate(a, g);
      auto& gb = t.grad_buf(b);
      for (int i = 0; i < b.size; ++i) gb[i] -= g[i];
    });
  }

  Var scale(Var a, double s) {
    std::vector<double> out(a.size);
    for (int i = 0; i < a.size; ++i) out[i] = s * val(a)[i];
    return push(std::move(out), [a, s](Tape& t, const std::vector<double>& g) {
      auto& ga = t.grad_buf(a);
      for (int i = 0; i < a.size; ++i) ga[i] += s * g[i];
    });
  }

  Var negate(Var a) { return scale(a, -1.0); }

  /// Elementwise product.
  Var mul(Var a, Var b) {
    check_same(a, b, "mul");
    std::vector<double> out(a.size);
    for (int i = 0; i < a.size; ++i) out[i] = val(a)[i] * val(b)[i];
    return push(std::move(out), [a, b](Tape& t, const std::vector<double>& g) {
      const auto& av = t.val(a);
      const auto& bv = t.val(b);
      auto& ga = t.grad_buf(a);
      auto& gb = t.grad_buf(b);
      for (int i = 0; i < a.size; ++i) {
        ga[i] += g[i] * bv[i];
        gb[i] += g[i] * av[i];
      }
    });
  }

  Var relu(Var a) {
    std::vector<double> out(a.size);
    for (int i = 0; i < a.size; ++i) out[i] = std::max(0.0, val(a)[i]);
    return push(std::move(out), [a](Tape& t, const std::vector<double>& g) {
      auto& ga = t.grad_buf(a);
      const auto& x = t.val(a);
      for (int i = 0; i < a.size; ++i)
        if (x[i] > 0.0) ga[i] += g[i];
    });
  }

  /// y = W x, with W a (rows x cols) row-major matrix node.
  Var matvec(Var w, int rows, int cols, Var x) {
    if (w.size != rows * cols)
      throw std::invalid_argument("matvec: weight size " + std::to_string(w.size) +
                                  " != " + std::to_string(rows) + "x" + std::to_string(cols));
    if (x.size != cols)
      throw std::invalid_argument("matvec: input size " + std::to_string(x.size) +
                                  " != cols " + std::to_string(cols));
    std::vector<double> out(rows, 0.0);
    const auto& wv = val(w);
    const auto& xv = val(x);
    for (int r = 0; r < rows; ++r) {
      double acc = 0.0;
      const double* row = wv.data() + static_cast<std::size_t>(r) * cols;
      for (int c = 0; c < cols; ++c) acc += row[c] * xv[c];
      out[r] = acc;
    }
    return push(std::move(out), [w, x, rows, cols](Tape& t, const std::vector<double>& g) {
      const auto& wv = t.val(w);
      const auto& xv = t.val(x);
      auto& gw = t.grad_buf(w);
      auto& gx = t.grad_buf(x);
      for (int r = 0; r < rows; ++r) {
        const double gr = g[r];
        if (gr == 0.0) continue;
        double* gw_row = gw.data() + static_cast<std::size_t>(r) * cols;
        const double* w_row = wv.data() + static_cast<std::size_t>(r) * cols;
        for (int c = 0; c < cols; ++c) {
          gw_row[c] += gr * xv[c];
          gx[c] += gr * w_row[c];
        }
      }
    });
  }

  Var concat(const std::vector<Var>& parts) {
    std::vector<double> out;
    int total = 0;
    for (const auto& p : parts) total += p.size;
    out.reserve(total);
    for (const auto& p : parts) {
      const auto& v = val(p);
      out.insert(out.end(), v.begin(), v.end());
    }
    return push(std::move(out), [parts](Tape& t, const std::vector<double>& g) {
      int off = 0;
      for (const auto& p : parts) {
        auto& gp = t.grad_buf(p);
        for (int i = 0; i < p.size; ++i) gp[i] += g[off + i];
        off += p.size;
      }
    });
  }

  Var slice(Var a, int offset, int len) {
    if (offset < 0 || offset + len > a.size)
      throw std::invalid_argument("slice out of range");
    std::vector<double> out(val(a).begin() + offset, val(a).begin() + offset + len);
    return push(std::move(out), [a, offset, len](Tape& t, const std::vector<double>& g) {
      auto& ga = t.grad_buf(a);
      for (int i = 0; i < len; ++i) ga[offset + i] += g[i];
    });
  }

  Var gather(Var a, std::vector<int> idx) {
    std::vector<double> out(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) {
      if (idx[i] < 0 || idx[i] >= a.size) throw std::out_of_range("gather index out of range");
      out[i] = val(a)[idx[i]];
    }
    return push(std::move(out), [a, idx = std::move(idx)](Tape& t, const std::vector<double>& g) {
      auto& ga = t.grad_buf(a);
      for (std::size_t i = 0; i < idx.size(); ++i) ga[idx[i]] += g[i];
    });
  }

  /// Rigid map over a flat [x0, y0, ...] buffer: p -> R(angle) p + t.
  Var rigid(Var pts, double cos_a, double sin_a, double tx, double ty) {
    if (pts.size % 2 != 0) throw std::invalid_argument("rigid: odd coordinate count");
    std::vector<double> out(pts.size);
    const auto& v = val(pts);
    for (int i = 0; i + 1 < pts.size; i += 2) {
      out[i] = cos_a * v[i] - sin_a * v[i + 1] + tx;
      out[i + 1] = sin_a * v[i] + cos_a * v[i + 1] + ty;
    }
    return push(std::move(out), [pts, cos_a, sin_a](Tape& t, const std::vector<double>& g) {
      auto& gp = t.grad_buf(pts);
      for (int i = 0; i + 1 < pts.size; i += 2) {
        gp[i] += cos_a * g[i] + sin_a * g[i + 1];
        gp[i + 1] += -sin_a * g[i] + cos_a * g[i + 1];
      }
    });
  }

  /// Forward identity; reverse accumulation treats the result as a constant.
  Var stop_gradient(Var a) {
    return push(std::vector<double>(val(a)), nullptr);
  }

  /// Sum of scalar nodes.
  Var sum(const std::vector<Var>& terms) {
    double acc = 0.0;
    for (const auto& v : terms) {
      if (v.size != 1) throw std::invalid_argument("sum expects scalar terms");
      acc += val(v)[0];
    }
    return push({acc}, [terms](Tape& t, const std::vector<double>& g) {
      for (const auto& v : terms) t.grad_buf(v)[0] += g[0];
    });
  }

  /// -log softmax(logits)[label], stabilized with log-sum-exp. Entries at the
  /// -1e9 sentinel contribute exactly zero mass and zero gradient.
  Var softmax_cross_entropy(Var logits, int label) {
    if (label < 0 || label >= logits.size)
      throw std::out_of_range("softmax_cross_entropy: label " + std::to_string(label) +
                              " out of range [0, " + std::to_string(logits.size) + ")");
    const auto& l = val(logits);
    const double lse = log_sum_exp(l);
    return push({lse - l[label]}, [logits, label, lse](Tape& t, const std::vector<double>& g) {
      const auto& l = t.val(logits);
      auto& gl = t.grad_buf(logits);
      for (int i = 0; i < logits.size; ++i) {
        const double p = std::exp(l[i] - lse);
        gl[i] += g[0] * (p - (i == label ? 1.0 : 0.0));
      }
    });
  }

  /// Sum over coordinates of the standard Huber penalty with threshold delta.
  Var huber(Var pred, std::vector<double> target, double delta) {
    if (static_cast<int>(target.size()) != pred.size)
      throw std::invalid_argument("huber: length mismatch " + std::to_string(pred.size) +
                                  " vs " + std::to_string(target.size()));
    if (delta <= 0.0) throw std::invalid_argument("huber: delta must be positive");
    const auto& p = val(pred);
    double acc = 0.0;
    for (int i = 0; i < pred.size; ++i) {
      const double e = p[i] - target[i];
      const double ae = std::abs(e);
      acc += ae <= delta ? 0.5 * e * e : delta * (ae - 0.5 * delta);
    }
    return push({acc}, [pred, target = std::move(target), delta](Tape& t,
                                                                 const std::vector<double>& g) {
      const auto& p = t.val(pred);
      auto& gp = t.grad_buf(pred);
      for (int i = 0; i < pred.size; ++i) {
        const double e = p[i] - target[i];
        const double d = std::abs(e) <= delta ? e : (e > 0.0 ? delta : -delta);
        gp[i] += g[0] * d;
      }
    });
  }

  // ---- access ----

  [[nodiscard]] const std::vector<double>& val(Var v) const { return nodes_[v.id].value; }

  [[nodiscard]] double scalar(Var v) const {
    if (v.size != 1) throw std::logic_error("scalar() on non-scalar node");
    return val(v)[0];
  }

  /// Gradient of the last backward()'s loss with respect to node v.
  [[nodiscard]] const std::vector<double>& grad(Var v) const {
    if (nodes_[v.id].grad.empty())
      throw std::logic_error("grad requested before backward, or node unreachable");
    return nodes_[v.id].grad;
  }

  [[nodiscard]] std::size_t node_count() const { return nodes_.size(); }

  // ---- reverse pass ----

  /// Reverse accumulation from a scalar loss. Tape order is construction
  /// order, which is already topological.
  void backward(Var loss) {
    if (loss.size != 1) throw std::invalid_argument("backward: loss must be scalar");
    if (!std::isfinite(val(loss)[0]))
      throw std::runtime_error("backward: non-finite loss value");
    for (auto& n : nodes_) {
      n.grad.assign(n.value.size(), 0.0);
    }
    nodes_[loss.id].grad[0] = 1.0;
    for (int i = loss.id; i >= 0; --i) {
      auto& n = nodes_[i];
      if (n.back && !n.grad.empty()) n.back(*this, n.grad);
    }
  }

  /// Parameter gradients from the last backward(), aligned with the store;
  /// parameters never touched by the tape get zeros.
  [[nodiscard]] GradientStore gradients() const {
    if (!params_) throw std::logic_error("tape has no parameter store attached");
    GradientStore out(*params_);
    for (const auto& [node_id, param_index] : param_leaves_) {
      const auto& g = nodes_[node_id].grad;
      if (g.empty()) continue;
      auto& dst = out[param_index];
      for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
    }
    return out;
  }

 private:
  struct Node {
    std::vector<double> value;
    std::vector<double> grad;
    std::function<void(Tape&, const std::vector<double>&)> back;
  };

  Var push(std::vector<double> value, std::function<void(Tape&, const std::vector<double>&)> back) {
    const int id = static_cast<int>(nodes_.size());
    const int size = static_cast<int>(value.size());
    nodes_.push_back({std::move(value), {}, std::move(back)});
    return {id, size};
  }

  std::vector<double>& grad_buf(Var v) { return nodes_[v.id].grad; }

  void accumulate(Var v, const std::vector<double>& g) {
    auto& dst = nodes_[v.id].grad;
    for (int i = 0; i < v.size; ++i) dst[i] += g[i];
  }

  static void check_same(Var a, Var b, const char* op) {
    if (a.size != b.size)
      throw std::invalid_argument(std::string(op) + ": size mismatch " +
                                  std::to_string(a.size) + " vs " + std::to_string(b.size));
  }

  const ParamStore* params_;
  std::vector<Node> nodes_;
  std::vector<std::pair<int, int>> param_leaves_;  // (node id, param index)
  std::unordered_map<std::string, Var> param_vars_;
};

// ---------------------------------------------------------------------------
// MLP forward
// ---------------------------------------------------------------------------

/// Applies the named layers in order: y = W x + b per layer, ReLU on all but
/// the last. Layer L reads parameters "L.w" (rows x cols) and "L.b" (rows).
inline Var mlp_forward(Tape& tape, Var input, const std::vector<std::string>& layers,
                       const ParamStore& params) {
  Var x = input;
  for (std::size_t li = 0; li < layers.size(); ++li) {
    const auto& name = layers[li];
    const Param& w = params.at(name + ".w");
    if (w.cols != x.size)
      throw std::invalid_argument("mlp_forward: layer '" + name + "' expects input " +
                                  std::to_string(w.cols) + ", got " + std::to_string(x.size));
    Var wx = tape.matvec(tape.param(name + ".w"), w.rows, w.cols, x);
    x = tape.add(wx, tape.param(name + ".b"));
    if (li + 1 < layers.size()) x = tape.relu(x);
  }
  return x;
}

/// Registers layer parameters name.w (rows=dims[i+1], cols=dims[i]) and name.b.
inline void add_mlp_params(ParamStore& store, const std::string& prefix,
                           const std::vector<int>& dims) {
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    store.add(prefix + std::to_string(i) + ".w", dims[i + 1], dims[i]);
    store.add(prefix + std::to_string(i) + ".b", dims[i + 1]);
  }
}

inline std::vector<std::string> mlp_layer_names(const std::string& prefix, int layer_count) {
  std::vector<std::string> names;
  names.reserve(layer_count);
  for (int i = 0; i < layer_count; ++i) names.push_back(prefix + std::to_string(i));
  return names;
}

// ---------------------------------------------------------------------------
// Finite-difference checking
// ---------------------------------------------------------------------------

/// Loss evaluation hook: returns the scalar loss at `params` and, when
/// `grads` is non-null, also fills reverse-mode gradients.
using LossFn = std::function<double(const ParamStore&, GradientStore*)>;

struct FiniteDiffReport {
  double max_rel_err = 0.0;
  std::string worst_param;
  int worst_index = -1;
  double analytic = 0.0;
  double numeric = 0.0;
  long checked = 0;
};

/// Central-difference check of reverse-mode gradients. Relative error uses a
/// unit floor: |ad - fd| / max(1, |ad|, |fd|). When max_per_param > 0, at most
/// that many elements per parameter tensor are probed (seeded choice);
/// otherwise every element is checked.
inline FiniteDiffReport finite_diff_check(const LossFn& loss_fn, ParamStore params, double eps,
                                          int max_per_param = -1, std::uint64_t seed = 0) {
  if (eps <= 0.0) throw std::invalid_argument("finite_diff_check: eps must be positive");
  GradientStore analytic(params);
  const double base = loss_fn(params, &analytic);
  if (!std::isfinite(base)) throw std::runtime_error("finite_diff_check: non-finite loss");

  FiniteDiffReport report;
  std::mt19937_64 rng(seed);
  for (std::size_t pi = 0; pi < params.count(); ++pi) {
    auto& p = params[pi];
    std::vector<int> indices;
    const int n = static_cast<int>(p.value.size());
    if (max_per_param <= 0 || n <= max_per_param) {
      indices.resize(n);
      for (int i = 0; i < n; ++i) indices[i] = i;
    } else {
      std::uniform_int_distribution<int> dist(0, n - 1);
      for (int i = 0; i < max_per_param; ++i) indices.push_back(dist(rng));
    }
    for (int idx : indices) {
      const double saved = p.value[idx];
      p.value[idx] = saved + eps;
      const double up = loss_fn(params, nullptr);
      p.value[idx] = saved - eps;
      const double down = loss_fn(params, nullptr);
      p.value[idx] = saved;
      if (!std::isfinite(up) || !std::isfinite(down))
        throw std::runtime_error("finite_diff_check: non-finite perturbed loss at " + p.name);
      const double fd = (up - down) / (2.0 * eps);
      const double ad = analytic[pi][idx];
      const double rel = std::abs(fd - ad) / std::max({1.0, std::abs(fd), std::abs(ad)});
      ++report.checked;
      if (rel > report.max_rel_err) {
        report.max_rel_err = rel;
        report.worst_param = p.name;
        report.worst_index = idx;
        report.analytic = ad;
        report.numeric = fd;
      }
    }
  }
  return report;
}

}  // namespace jointpred::ad
