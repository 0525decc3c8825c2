/**
 * Copyright 2026 The subgnd Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <span>
#include <vector>

#include "subgnd/rng.hpp"
#include "subgnd/tensor.hpp"

namespace subgnd::ad {

class Tape;

/// Handle to a value recorded on a Tape.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Tensor& value() const;
  const Tensor& grad() const;
  const std::vector<std::size_t>& shape() const { return value().shape; }
};

/// Records operations in execution order and replays their gradient rules in
/// reverse. Inputs of a node always precede it, so a single reverse sweep visits
/// every node exactly once. One backward per tape.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, const Tensor& out_grad)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var leaf(Tensor value, bool requires_grad = true);
  Var constant(Tensor value) { return leaf(std::move(value), false); }

  /// Appends a derived node. It requires grad iff any input does; `fn` is only kept then.
  Var record(Tensor value, std::span<const Var> inputs, BackwardFn fn);

  const Tensor& value(Var v) const;
  /// Gradient after backward(); a zero tensor of the value's shape when none flowed.
  const Tensor& grad(Var v) const;
  bool requires_grad(Var v) const;

  /// Gradient accumulator of v for use inside BackwardFn, or nullptr when v does not
  /// require grad.
  Tensor* grad_sink(Var v);

  /// Seeds d(loss)/d(loss) = 1 and sweeps the tape backwards.
  /// Throws std::logic_error for a non-scalar loss, a Var from another tape, or a
  /// second call on the same tape.
  void backward(Var loss);

  /// Folds a branch decision of a non-smooth op (relu side, max winner) into the
  /// tape's signature. Equal signatures mean the same piecewise-smooth region.
  void note_branch(std::uint64_t decision) { signature_ = splitmix64(signature_ ^ decision); }
  std::uint64_t branch_signature() const { return signature_; }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    mutable Tensor grad;  // materialized on first access
    BackwardFn backward;
    bool requires_grad = false;
  };

  void check_owned(Var v) const;

  std::deque<Node> nodes_;  // deque: value() references stay valid as the tape grows
  std::uint64_t signature_ = 0;
  bool backward_done_ = false;
};

enum class PoolMode { max, mean, sum };

// All primitives take their tape from the first operand. Shapes must agree
// exactly; the only broadcast is the row-wise bias in linear().

/// x [n x a] (or [a]) times W [a x b] plus b [b].
Var linear(Var x, Var weight, Var bias);
/// Elementwise max(0, x); the subgradient at 0 is 0.
Var relu(Var x);
Var add(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var x, double factor);
/// Sum of all elements, as a scalar.
Var sum(Var x);
/// Rows idx of x [n x h] stacked into [m x h].
Var gather_rows(Var x, std::span<const std::size_t> idx);
/// Row i of x as a vector [h].
Var row(Var x, std::size_t i);
/// out[t] = sum of message rows whose target is t; [m x h] -> [n x h].
Var segment_sum(Var messages, std::span<const std::size_t> targets, std::size_t n);
/// Column reduction [k x h] -> [h]; k == 0 gives zeros. Max ties go to the lowest row.
Var pool(Var rows, PoolMode mode);
/// Concatenation along the last axis; leading dimensions must match.
Var concat(Var a, Var b);
/// Elementwise maximum; ties route the gradient to `a`.
Var maximum(Var a, Var b);
/// x [k*m] with block j scaled by w[j], w [k].
Var block_scale(Var x, Var weights);
/// Max-shifted softmax of a vector. Throws on non-finite input.
Var softmax(Var v);
/// -log softmax(logits)[label], computed with log-sum-exp.
Var cross_entropy(Var logits, std::size_t label);
/// Inverted dropout: keeps each element with probability 1 - p and scales by 1/(1-p).
/// Identity when !training or p == 0.
Var dropout(Var x, double p, KeyedRng& rng, bool training);

struct GradCheckOptions {
  double eps = 1e-4;
  std::size_t num_coords = 0;  // 0 checks every coordinate
  std::uint64_t seed = 0;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::size_t skipped = 0;  // coordinates whose +-eps probe crossed a kink
};

using LossFn = std::function<Var(Tape&, const std::vector<Var>& params)>;

/// Compares tape gradients with central differences (f(p+eps) - f(p-eps)) / 2eps.
/// Relative error is |analytic - numeric| / max(|analytic|, |numeric|, 1e-6).
/// Coordinates where the probes land in a different branch region (relu sign,
/// max winner) than the base point are skipped and reported.
GradCheckResult grad_check(const LossFn& f, const std::vector<Tensor>& params, const GradCheckOptions& options = {});

}  // namespace subgnd::ad
