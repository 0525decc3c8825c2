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

#include "subgnd/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

namespace subgnd::ad {

namespace {

bool matches(const Tensor& grad, const Tensor& value) {
  return grad.shape == value.shape && grad.data.size() == value.data.size();
}

}  // namespace

const Tensor& Var::value() const { return tape->value(*this); }
const Tensor& Var::grad() const { return tape->grad(*this); }

Var Tape::leaf(Tensor value, bool requires_grad) {
  nodes_.push_back(Node{std::move(value), Tensor{}, nullptr, requires_grad});
  return Var{this, nodes_.size() - 1};
}

Var Tape::record(Tensor value, std::span<const Var> inputs, BackwardFn fn) {
  bool needs = false;
  for (Var v : inputs) {
    check_owned(v);
    needs = needs || nodes_[v.id].requires_grad;
  }
  nodes_.push_back(Node{std::move(value), Tensor{}, needs ? std::move(fn) : nullptr, needs});
  return Var{this, nodes_.size() - 1};
}

void Tape::check_owned(Var v) const {
  if (v.tape != this || v.id >= nodes_.size()) throw std::logic_error("Var does not belong to this tape");
}

const Tensor& Tape::value(Var v) const {
  check_owned(v);
  return nodes_[v.id].value;
}

const Tensor& Tape::grad(Var v) const {
  check_owned(v);
  const Node& node = nodes_[v.id];
  if (!matches(node.grad, node.value)) node.grad = Tensor(node.value.shape);
  return node.grad;
}

bool Tape::requires_grad(Var v) const {
  check_owned(v);
  return nodes_[v.id].requires_grad;
}

Tensor* Tape::grad_sink(Var v) {
  Node& node = nodes_[v.id];
  if (!node.requires_grad) return nullptr;
  if (!matches(node.grad, node.value)) node.grad = Tensor(node.value.shape);
  return &node.grad;
}

void Tape::backward(Var loss) {
  if (loss.tape != this || loss.id >= nodes_.size()) throw std::logic_error("backward: loss is not on this tape");
  if (backward_done_) throw std::logic_error("backward: tape already consumed; build a new tape");
  if (nodes_[loss.id].value.size() != 1 || nodes_[loss.id].value.rank() > 1)
    throw std::logic_error("backward: loss must be a scalar, got shape " +
                           shape_string(nodes_[loss.id].value.shape));
  backward_done_ = true;
  if (!nodes_[loss.id].requires_grad) return;
  grad_sink(loss)->data[0] = 1.0;
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    Node& node = nodes_[i];
    if (!node.backward || !matches(node.grad, node.value)) continue;
    node.backward(*this, node.grad);
  }
}

namespace {

[[noreturn]] void shape_error(const char* op, const Tensor& a, const Tensor& b) {
  throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_string(a.shape) + " vs " +
                              shape_string(b.shape));
}

void require_same(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape != b.shape) shape_error(op, a, b);
}

}  // namespace

Var linear(Var x, Var weight, Var bias) {
  Tape& t = *x.tape;
  const Tensor& xv = x.value();
  const Tensor& wv = weight.value();
  const Tensor& bv = bias.value();
  if (wv.rank() != 2 || bv.rank() != 1 || bv.shape[0] != wv.shape[1] || xv.rank() < 1 || xv.rank() > 2 ||
      xv.cols() != wv.shape[0])
    throw std::invalid_argument("linear: shape mismatch x" + shape_string(xv.shape) + " W" +
                                shape_string(wv.shape) + " b" + shape_string(bv.shape));
  const std::size_t n = xv.rows(), a = wv.shape[0], b = wv.shape[1];
  Tensor out(xv.rank() == 2 ? std::vector<std::size_t>{n, b} : std::vector<std::size_t>{b});
  for (std::size_t i = 0; i < n; ++i) {
    double* o = out.data.data() + i * b;
    std::copy(bv.data.begin(), bv.data.end(), o);
    const double* xi = xv.data.data() + i * a;
    for (std::size_t k = 0; k < a; ++k) {
      const double xik = xi[k];
      if (xik == 0.0) continue;
      const double* wk = wv.data.data() + k * b;
      for (std::size_t j = 0; j < b; ++j) o[j] += xik * wk[j];
    }
  }
  const Var inputs[] = {x, weight, bias};
  return t.record(std::move(out), inputs, [x, weight, bias, n, a, b](Tape& tape, const Tensor& g) {
    const Tensor& xv = tape.value(x);
    const Tensor& wv = tape.value(weight);
    if (Tensor* gx = tape.grad_sink(x)) {
      for (std::size_t i = 0; i < n; ++i) {
        const double* gi = g.data.data() + i * b;
        double* dxi = gx->data.data() + i * a;
        for (std::size_t k = 0; k < a; ++k) {
          const double* wk = wv.data.data() + k * b;
          double acc = 0.0;
          for (std::size_t j = 0; j < b; ++j) acc += gi[j] * wk[j];
          dxi[k] += acc;
        }
      }
    }
    if (Tensor* gw = tape.grad_sink(weight)) {
      for (std::size_t i = 0; i < n; ++i) {
        const double* gi = g.data.data() + i * b;
        const double* xi = xv.data.data() + i * a;
        for (std::size_t k = 0; k < a; ++k) {
          const double xik = xi[k];
          if (xik == 0.0) continue;
          double* dwk = gw->data.data() + k * b;
          for (std::size_t j = 0; j < b; ++j) dwk[j] += xik * gi[j];
        }
      }
    }
    if (Tensor* gb = tape.grad_sink(bias)) {
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < b; ++j) gb->data[j] += g.data[i * b + j];
    }
  });
}

Var relu(Var x) {
  Tape& t = *x.tape;
  Tensor out = x.value();
  std::uint64_t mask_hash = 0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const bool on = out.data[i] > 0.0;
    if (!on) out.data[i] = 0.0;
    mask_hash = splitmix64(mask_hash ^ (2 * i + on));
  }
  t.note_branch(mask_hash);
  const Var inputs[] = {x};
  return t.record(std::move(out), inputs, [x](Tape& tape, const Tensor& g) {
    const Tensor& xv = tape.value(x);
    Tensor* gx = tape.grad_sink(x);
    for (std::size_t i = 0; i < g.size(); ++i)
      if (xv.data[i] > 0.0) gx->data[i] += g.data[i];
  });
}

Var add(Var a, Var b) {
  require_same("add", a.value(), b.value());
  Tensor out = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] += bv.data[i];
  const Var inputs[] = {a, b};
  return a.tape->record(std::move(out), inputs, [a, b](Tape& tape, const Tensor& g) {
    for (Var v : {a, b}) {
      if (Tensor* gv = tape.grad_sink(v))
        for (std::size_t i = 0; i < g.size(); ++i) gv->data[i] += g.data[i];
    }
  });
}

Var mul(Var a, Var b) {
  require_same("mul", a.value(), b.value());
  Tensor out = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] *= bv.data[i];
  const Var inputs[] = {a, b};
  return a.tape->record(std::move(out), inputs, [a, b](Tape& tape, const Tensor& g) {
    const Tensor& av = tape.value(a);
    const Tensor& bv = tape.value(b);
    if (Tensor* ga = tape.grad_sink(a))
      for (std::size_t i = 0; i < g.size(); ++i) ga->data[i] += g.data[i] * bv.data[i];
    if (Tensor* gb = tape.grad_sink(b))
      for (std::size_t i = 0; i < g.size(); ++i) gb->data[i] += g.data[i] * av.data[i];
  });
}

Var scale(Var x, double factor) {
  Tensor out = x.value();
  for (double& v : out.data) v *= factor;
  const Var inputs[] = {x};
  return x.tape->record(std::move(out), inputs, [x, factor](Tape& tape, const Tensor& g) {
    Tensor* gx = tape.grad_sink(x);
    for (std::size_t i = 0; i < g.size(); ++i) gx->data[i] += factor * g.data[i];
  });
}

Var sum(Var x) {
  const Tensor& xv = x.value();
  const double total = std::accumulate(xv.data.begin(), xv.data.end(), 0.0);
  const Var inputs[] = {x};
  return x.tape->record(Tensor::scalar(total), inputs, [x](Tape& tape, const Tensor& g) {
    Tensor* gx = tape.grad_sink(x);
    for (double& v : gx->data) v += g.data[0];
  });
}

Var gather_rows(Var x, std::span<const std::size_t> idx) {
  const Tensor& xv = x.value();
  if (xv.rank() != 2) throw std::invalid_argument("gather_rows: expected a matrix");
  const std::size_t h = xv.cols();
  Tensor out({idx.size(), h});
  for (std::size_t r = 0; r < idx.size(); ++r) {
    if (idx[r] >= xv.rows()) throw std::out_of_range("gather_rows: row index out of range");
    std::copy_n(xv.data.begin() + static_cast<std::ptrdiff_t>(idx[r] * h), h,
                out.data.begin() + static_cast<std::ptrdiff_t>(r * h));
  }
  const Var inputs[] = {x};
  return x.tape->record(std::move(out), inputs,
                        [x, rows = std::vector<std::size_t>(idx.begin(), idx.end()), h](Tape& tape, const Tensor& g) {
                          Tensor* gx = tape.grad_sink(x);
                          for (std::size_t r = 0; r < rows.size(); ++r)
                            for (std::size_t j = 0; j < h; ++j) gx->data[rows[r] * h + j] += g.data[r * h + j];
                        });
}

Var row(Var x, std::size_t i) {
  const Tensor& xv = x.value();
  if (xv.rank() != 2) throw std::invalid_argument("row: expected a matrix");
  if (i >= xv.rows()) throw std::out_of_range("row: index out of range");
  const std::size_t h = xv.cols();
  const auto r = xv.row(i);
  Tensor out({h}, std::vector<double>(r.begin(), r.end()));
  const Var inputs[] = {x};
  return x.tape->record(std::move(out), inputs, [x, i, h](Tape& tape, const Tensor& g) {
    Tensor* gx = tape.grad_sink(x);
    for (std::size_t j = 0; j < h; ++j) gx->data[i * h + j] += g.data[j];
  });
}

Var segment_sum(Var messages, std::span<const std::size_t> targets, std::size_t n) {
  const Tensor& mv = messages.value();
  if (mv.rank() != 2 || mv.rows() != targets.size())
    throw std::invalid_argument("segment_sum: need one target per message row");
  const std::size_t h = mv.cols();
  Tensor out({n, h});
  for (std::size_t r = 0; r < targets.size(); ++r) {
    if (targets[r] >= n) throw std::out_of_range("segment_sum: target out of range");
    double* o = out.data.data() + targets[r] * h;
    const double* m = mv.data.data() + r * h;
    for (std::size_t j = 0; j < h; ++j) o[j] += m[j];
  }
  const Var inputs[] = {messages};
  return messages.tape->record(
      std::move(out), inputs,
      [messages, tgt = std::vector<std::size_t>(targets.begin(), targets.end()), h](Tape& tape, const Tensor& g) {
        Tensor* gm = tape.grad_sink(messages);
        for (std::size_t r = 0; r < tgt.size(); ++r)
          for (std::size_t j = 0; j < h; ++j) gm->data[r * h + j] += g.data[tgt[r] * h + j];
      });
}

Var pool(Var rows, PoolMode mode) {
  Tape& t = *rows.tape;
  const Tensor& rv = rows.value();
  if (rv.rank() != 2) throw std::invalid_argument("pool: expected a matrix");
  const std::size_t k = rv.rows(), h = rv.cols();
  Tensor out({h});
  std::vector<std::size_t> argmax;
  if (k > 0) {
    switch (mode) {
      case PoolMode::max: {
        argmax.assign(h, 0);
        for (std::size_t j = 0; j < h; ++j) out.data[j] = rv.data[j];
        for (std::size_t r = 1; r < k; ++r)
          for (std::size_t j = 0; j < h; ++j)
            if (rv.data[r * h + j] > out.data[j]) {
              out.data[j] = rv.data[r * h + j];
              argmax[j] = r;
            }
        std::uint64_t sig = 0x9001;
        for (std::size_t j = 0; j < h; ++j) sig = splitmix64(sig ^ (argmax[j] * 131 + j));
        t.note_branch(sig);
        break;
      }
      case PoolMode::mean:
      case PoolMode::sum: {
        for (std::size_t r = 0; r < k; ++r)
          for (std::size_t j = 0; j < h; ++j) out.data[j] += rv.data[r * h + j];
        if (mode == PoolMode::mean)
          for (double& v : out.data) v /= static_cast<double>(k);
        break;
      }
    }
  }
  const Var inputs[] = {rows};
  return t.record(std::move(out), inputs, [rows, mode, k, h, argmax = std::move(argmax)](Tape& tape, const Tensor& g) {
    if (k == 0) return;
    Tensor* gr = tape.grad_sink(rows);
    if (mode == PoolMode::max) {
      for (std::size_t j = 0; j < h; ++j) gr->data[argmax[j] * h + j] += g.data[j];
      return;
    }
    const double w = mode == PoolMode::mean ? 1.0 / static_cast<double>(k) : 1.0;
    for (std::size_t r = 0; r < k; ++r)
      for (std::size_t j = 0; j < h; ++j) gr->data[r * h + j] += w * g.data[j];
  });
}

Var concat(Var a, Var b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  // An empty operand is the identity.
  if (bv.size() == 0 && bv.rank() == 1 && av.rank() == 1) return scale(a, 1.0);
  if (av.rank() != bv.rank() || av.rank() == 0 || av.rank() > 2 || av.rows() != bv.rows())
    shape_error("concat", av, bv);
  const std::size_t n = av.rows(), p = av.cols(), q = bv.cols();
  Tensor out(av.rank() == 2 ? std::vector<std::size_t>{n, p + q} : std::vector<std::size_t>{p + q});
  for (std::size_t i = 0; i < n; ++i) {
    std::copy_n(av.data.begin() + static_cast<std::ptrdiff_t>(i * p), p,
                out.data.begin() + static_cast<std::ptrdiff_t>(i * (p + q)));
    std::copy_n(bv.data.begin() + static_cast<std::ptrdiff_t>(i * q), q,
                out.data.begin() + static_cast<std::ptrdiff_t>(i * (p + q) + p));
  }
  const Var inputs[] = {a, b};
  return a.tape->record(std::move(out), inputs, [a, b, n, p, q](Tape& tape, const Tensor& g) {
    if (Tensor* ga = tape.grad_sink(a))
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < p; ++j) ga->data[i * p + j] += g.data[i * (p + q) + j];
    if (Tensor* gb = tape.grad_sink(b))
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < q; ++j) gb->data[i * q + j] += g.data[i * (p + q) + p + j];
  });
}

Var maximum(Var a, Var b) {
  require_same("maximum", a.value(), b.value());
  Tape& t = *a.tape;
  Tensor out = a.value();
  const Tensor& bv = b.value();
  std::vector<bool> took_b(out.size(), false);
  std::uint64_t sig = 0x3a7;
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (bv.data[i] > out.data[i]) {
      out.data[i] = bv.data[i];
      took_b[i] = true;
    }
    sig = splitmix64(sig ^ (2 * i + took_b[i]));
  }
  t.note_branch(sig);
  const Var inputs[] = {a, b};
  return t.record(std::move(out), inputs, [a, b, took_b = std::move(took_b)](Tape& tape, const Tensor& g) {
    Tensor* ga = tape.grad_sink(a);
    Tensor* gb = tape.grad_sink(b);
    for (std::size_t i = 0; i < g.size(); ++i) {
      Tensor* dst = took_b[i] ? gb : ga;
      if (dst) dst->data[i] += g.data[i];
    }
  });
}

Var block_scale(Var x, Var weights) {
  const Tensor& xv = x.value();
  const Tensor& wv = weights.value();
  if (xv.rank() != 1 || wv.rank() != 1 || wv.size() == 0 || xv.size() % wv.size() != 0)
    shape_error("block_scale", xv, wv);
  const std::size_t blocks = wv.size(), width = xv.size() / blocks;
  Tensor out = xv;
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] *= wv.data[i / width];
  const Var inputs[] = {x, weights};
  return x.tape->record(std::move(out), inputs, [x, weights, blocks, width](Tape& tape, const Tensor& g) {
    const Tensor& xv = tape.value(x);
    const Tensor& wv = tape.value(weights);
    if (Tensor* gx = tape.grad_sink(x))
      for (std::size_t i = 0; i < g.size(); ++i) gx->data[i] += g.data[i] * wv.data[i / width];
    if (Tensor* gw = tape.grad_sink(weights))
      for (std::size_t blk = 0; blk < blocks; ++blk) {
        double acc = 0.0;
        for (std::size_t i = blk * width; i < (blk + 1) * width; ++i) acc += g.data[i] * xv.data[i];
        gw->data[blk] += acc;
      }
  });
}

Var softmax(Var v) {
  const Tensor& vv = v.value();
  if (vv.rank() != 1 || vv.size() == 0) throw std::invalid_argument("softmax: expected a nonempty vector");
  for (double x : vv.data)
    if (!std::isfinite(x)) throw std::domain_error("softmax: non-finite input");
  const double m = *std::max_element(vv.data.begin(), vv.data.end());
  Tensor out = vv;
  double z = 0.0;
  for (double& x : out.data) z += (x = std::exp(x - m));
  for (double& x : out.data) x /= z;
  const Var inputs[] = {v};
  return v.tape->record(out, inputs, [v, probs = out.data](Tape& tape, const Tensor& g) {
    // J = diag(p) - p p^T
    double dot = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) dot += g.data[i] * probs[i];
    Tensor* gv = tape.grad_sink(v);
    for (std::size_t i = 0; i < probs.size(); ++i) gv->data[i] += probs[i] * (g.data[i] - dot);
  });
}

Var cross_entropy(Var logits, std::size_t label) {
  const Tensor& lv = logits.value();
  if (lv.rank() != 1 || lv.size() == 0) throw std::invalid_argument("cross_entropy: expected a logit vector");
  if (label >= lv.size())
    throw std::out_of_range("cross_entropy: label " + std::to_string(label) + " >= " + std::to_string(lv.size()));
  const double m = *std::max_element(lv.data.begin(), lv.data.end());
  std::vector<double> probs(lv.size());
  double z = 0.0;
  for (std::size_t i = 0; i < lv.size(); ++i) z += (probs[i] = std::exp(lv.data[i] - m));
  for (double& p : probs) p /= z;
  const double loss = std::log(z) + m - lv.data[label];
  const Var inputs[] = {logits};
  return logits.tape->record(Tensor::scalar(loss), inputs,
                             [logits, label, probs = std::move(probs)](Tape& tape, const Tensor& g) {
                               Tensor* gl = tape.grad_sink(logits);
                               for (std::size_t i = 0; i < probs.size(); ++i)
                                 gl->data[i] += g.data[0] * (probs[i] - (i == label ? 1.0 : 0.0));
                             });
}

Var dropout(Var x, double p, KeyedRng& rng, bool training) {
  if (!(p >= 0.0 && p < 1.0)) throw std::invalid_argument("dropout: p must lie in [0, 1)");
  if (!training || p == 0.0) return x;
  const double keep_scale = 1.0 / (1.0 - p);
  Tensor out = x.value();
  std::vector<double> mask(out.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    mask[i] = rng.uniform() < p ? 0.0 : keep_scale;
    out.data[i] *= mask[i];
  }
  const Var inputs[] = {x};
  return x.tape->record(std::move(out), inputs, [x, mask = std::move(mask)](Tape& tape, const Tensor& g) {
    Tensor* gx = tape.grad_sink(x);
    for (std::size_t i = 0; i < g.size(); ++i) gx->data[i] += mask[i] * g.data[i];
  });
}

namespace {

struct Probe {
  double loss;
  std::uint64_t signature;
};

Probe evaluate(const LossFn& f, const std::vector<Tensor>& params) {
  Tape tape;
  std::vector<Var> leaves;
  leaves.reserve(params.size());
  for (const Tensor& p : params) leaves.push_back(tape.leaf(p, false));
  const Var loss = f(tape, leaves);
  return {loss.value().data.at(0), tape.branch_signature()};
}

}  // namespace

GradCheckResult grad_check(const LossFn& f, const std::vector<Tensor>& params, const GradCheckOptions& options) {
  Tape tape;
  std::vector<Var> leaves;
  leaves.reserve(params.size());
  for (const Tensor& p : params) leaves.push_back(tape.leaf(p, true));
  const Var loss = f(tape, leaves);
  const std::uint64_t base_signature = tape.branch_signature();
  tape.backward(loss);

  // (tensor, element) of every coordinate, shuffled when sampling a subset.
  std::vector<std::pair<std::size_t, std::size_t>> coords;
  for (std::size_t t = 0; t < params.size(); ++t)
    for (std::size_t i = 0; i < params[t].size(); ++i) coords.emplace_back(t, i);
  const std::size_t want = options.num_coords ? std::min(options.num_coords, coords.size()) : coords.size();
  if (want < coords.size()) {
    KeyedRng rng{options.seed, 0x67c0ULL};
    for (std::size_t i = coords.size(); i > 1; --i) std::swap(coords[i - 1], coords[rng.below(i)]);
  }

  GradCheckResult result;
  std::vector<Tensor> probe = params;
  for (const auto& [t, i] : coords) {
    if (result.checked == want) break;
    const double original = params[t].data[i];
    probe[t].data[i] = original + options.eps;
    const Probe plus = evaluate(f, probe);
    probe[t].data[i] = original - options.eps;
    const Probe minus = evaluate(f, probe);
    probe[t].data[i] = original;
    if (plus.signature != base_signature || minus.signature != base_signature) {
      ++result.skipped;
      continue;
    }
    const double numeric = (plus.loss - minus.loss) / (2.0 * options.eps);
    const double analytic = leaves[t].grad().data[i];
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
    result.max_rel_error = std::max(result.max_rel_error, std::abs(analytic - numeric) / denom);
    ++result.checked;
  }
  return result;
}

}  // namespace subgnd::ad
