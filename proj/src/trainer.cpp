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

#include "subgnd/trainer.hpp"

#include <algorithm>
#include <exception>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "subgnd/error.hpp"
#include "text_io.hpp"

namespace subgnd {

void TrainConfig::validate() const {
  if (!(lr > 0.0) || !(alpha_lr > 0.0)) throw std::invalid_argument("train: lr and alpha_lr must be > 0");
  if (!(weight_decay >= 0.0)) throw std::invalid_argument("train: weight_decay must be >= 0");
  if (max_epochs < 1 || patience < 1) throw std::invalid_argument("train: max_epochs and patience must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");
}

AdamState::AdamState(const ModelParams& params) {
  for (const Tensor& t : params.tensors) {
    m.emplace_back(t.shape);
    v.emplace_back(t.shape);
  }
}

void adam_step(ModelParams& params, const std::vector<Tensor>& grads, AdamState& state, const TrainConfig& config) {
  if (grads.size() != params.size()) throw std::invalid_argument("adam_step: gradient count mismatch");
  for (const Tensor& g : grads)
    for (double x : g.data)
      if (!std::isfinite(x)) throw std::domain_error("adam_step: non-finite gradient");

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bias1 = 1.0 - std::pow(config.beta1, t);
  const double bias2 = 1.0 - std::pow(config.beta2, t);
  for (std::size_t p = 0; p < params.size(); ++p) {
    const bool is_alpha = params.layout.scaling_logits == p;
    const double lr = is_alpha ? config.alpha_lr : config.lr;
    const double decay = is_alpha ? 0.0 : config.lr * config.weight_decay;
    auto& w = params.tensors[p].data;
    auto& m = state.m[p].data;
    auto& v = state.v[p].data;
    const auto& g = grads[p].data;
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * g[i];
      v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * g[i] * g[i];
      const double m_hat = m[i] / bias1;
      const double v_hat = v[i] / bias2;
      w[i] -= lr * m_hat / (std::sqrt(v_hat) + config.adam_eps) + decay * w[i];
    }
  }
}

namespace {

KeyedRng dropout_stream(const TrainConfig& train, std::size_t epoch, NodeId ego, std::size_t k) {
  return KeyedRng{train.seed, 0xd40u, epoch, ego, k};
}

void accumulate(SampleGradient& acc, const SampleGradient& g) {
  acc.loss += g.loss;
  if (acc.grads.empty()) {
    acc.grads = g.grads;
    return;
  }
  for (std::size_t p = 0; p < acc.grads.size(); ++p) {
    auto& dst = acc.grads[p].data;
    const auto& src = g.grads[p].data;
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
  }
}

SampleGradient zero_gradient(const ModelParams& params) {
  SampleGradient g;
  for (const Tensor& t : params.tensors) g.grads.emplace_back(t.shape);
  return g;
}

}  // namespace

SampleGradient batch_gradient_serial(const ModelParams& params, const ModelConfig& config, const TrainConfig& train,
                                     const SubgraphCorpus& corpus, std::span<const NodeId> egos, std::size_t epoch) {
  SampleGradient acc = zero_gradient(params);
  for (NodeId ego : egos) {
    for (std::size_t k = 0; k < 2; ++k) {
      auto rng = dropout_stream(train, epoch, ego, k);
      accumulate(acc, sample_gradient(corpus[ego][k], params, config, Mode::train, rng));
    }
  }
  return acc;
}

SampleGradient batch_gradient_parallel(const ModelParams& params, const ModelConfig& config,
                                       const TrainConfig& train, const SubgraphCorpus& corpus,
                                       std::span<const NodeId> egos, std::size_t epoch, int workers) {
  const auto count = static_cast<std::int64_t>(egos.size() * 2);
  std::vector<SampleGradient> parts(static_cast<std::size_t>(count));
  std::vector<std::exception_ptr> errors(parts.size());
#pragma omp parallel for schedule(dynamic, 1) num_threads(workers)
  for (std::int64_t s = 0; s < count; ++s) {
    const NodeId ego = egos[static_cast<std::size_t>(s / 2)];
    const auto k = static_cast<std::size_t>(s % 2);
    try {
      auto rng = dropout_stream(train, epoch, ego, k);
      parts[static_cast<std::size_t>(s)] = sample_gradient(corpus[ego][k], params, config, Mode::train, rng);
    } catch (...) {
      errors[static_cast<std::size_t>(s)] = std::current_exception();
    }
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  // Single writer, fixed order: matches the serial reference bit for bit.
  SampleGradient acc = zero_gradient(params);
  for (const auto& part : parts) accumulate(acc, part);
  return acc;
}

double train_epoch(ModelParams& params, AdamState& state, const ModelConfig& config, const TrainConfig& train,
                   const SubgraphCorpus& corpus, std::span<const NodeId> train_nodes, const EpochContext& ctx) {
  if (train_nodes.empty()) throw std::invalid_argument("train_epoch: empty training set");
  std::vector<NodeId> order(train_nodes.begin(), train_nodes.end());
  KeyedRng rng{train.seed, 0x5f1eu, ctx.epoch};
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);

  double total_loss = 0.0;
  for (std::size_t start = 0; start < order.size(); start += train.batch_size) {
    const std::span<const NodeId> batch(order.data() + start, std::min(train.batch_size, order.size() - start));
    SampleGradient g;
    try {
      g = ctx.workers > 1 ? batch_gradient_parallel(params, config, train, corpus, batch, ctx.epoch, ctx.workers)
                          : batch_gradient_serial(params, config, train, corpus, batch, ctx.epoch);
      if (!std::isfinite(g.loss)) throw std::domain_error("non-finite training loss");
      adam_step(params, g.grads, state, train);
    } catch (const std::domain_error& e) {
      throw DivergenceError(e.what(), ctx.epoch);
    }
    total_loss += g.loss;
    if (ctx.on_step) ctx.on_step(params);
  }
  return total_loss / static_cast<double>(2 * order.size());
}

double evaluate(const Predictor& predictor, const SubgraphCorpus& corpus, std::span<const NodeId> nodes,
                int workers) {
  if (nodes.empty()) throw std::invalid_argument("evaluate: empty split");
  const auto n = static_cast<std::int64_t>(nodes.size());
  std::vector<char> correct(nodes.size(), 0);
  // Exceptions may not cross the OpenMP region boundary.
  std::vector<std::string> errors(nodes.size());
#pragma omp parallel for schedule(dynamic, 8) num_threads(std::max(1, workers)) if (workers > 1)
  for (std::int64_t i = 0; i < n; ++i) {
    try {
      const auto& pair = corpus[nodes[static_cast<std::size_t>(i)]];
      Tensor avg = predictor(pair[0]);
      const Tensor second = predictor(pair[1]);
      for (std::size_t c = 0; c < avg.size(); ++c) avg.data[c] = 0.5 * (avg.data[c] + second.data[c]);
      const auto best = static_cast<int>(std::max_element(avg.data.begin(), avg.data.end()) - avg.data.begin());
      correct[static_cast<std::size_t>(i)] = best == pair[0].label;
    } catch (const std::exception& e) {
      errors[static_cast<std::size_t>(i)] = e.what();
    }
  }
  for (const auto& e : errors)
    if (!e.empty()) throw std::runtime_error("evaluate: " + e);
  const auto hits = std::count(correct.begin(), correct.end(), 1);
  return static_cast<double>(hits) / static_cast<double>(nodes.size());
}

double evaluate(const ModelParams& params, const ModelConfig& config, const SubgraphCorpus& corpus,
                std::span<const NodeId> nodes, int workers) {
  return evaluate([&](const InducedSubgraph& sub) { return predict(sub, params, config); }, corpus, nodes, workers);
}

FitResult fit(const GraphStore& graph, const SplitAssignment& split, const WalkConfig& walk, ModelConfig model,
              const TrainConfig& train, const FitOptions& options) {
  train.validate();
  model.input_dim = graph.feature_dim();
  model.num_classes = graph.num_classes();
  model.validate();
  if (split.train.empty()) throw std::invalid_argument("fit: empty training split");

  SubgraphCorpus owned;
  if (!options.corpus) owned = sample_dataset(graph, walk, options.workers);
  const SubgraphCorpus& corpus = options.corpus ? *options.corpus : owned;
  const std::span<const NodeId> monitor = split.val.empty() ? split.train : split.val;

  FitResult result;
  result.model = model;
  ModelParams params = init_params(model, train.seed);
  AdamState state(params);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  double best_val = -1.0;
  std::size_t since_best = 0;
  result.params = params;

  for (std::size_t epoch = 1; epoch <= train.max_epochs; ++epoch) {
    const EpochContext ctx{epoch, options.workers, options.on_step};
    EpochMetrics m;
    m.epoch = epoch;
    m.train_loss = train_epoch(params, state, model, train, corpus, split.train, ctx);
    try {
      m.val_acc = evaluate(params, model, corpus, monitor, options.workers);
      m.test_acc = split.test.empty() ? nan : evaluate(params, model, corpus, split.test, options.workers);
    } catch (const std::runtime_error& e) {
      throw DivergenceError(e.what(), epoch);
    }
    if (params.layout.scaling_logits) {
      const auto a = params.alphas();
      std::copy(a.begin(), a.end(), m.alphas.begin());
    } else {
      m.alphas.fill(nan);
    }
    result.trace.push_back(m);

    if (m.val_acc > best_val) {
      best_val = m.val_acc;
      result.best_epoch = epoch;
      result.params = params;
      since_best = 0;
    } else if (++since_best >= train.patience) {
      break;
    }
  }

  result.train_acc = evaluate(result.params, model, corpus, split.train, options.workers);
  result.val_acc = best_val;
  result.test_acc = split.test.empty() ? nan : evaluate(result.params, model, corpus, split.test, options.workers);
  if (result.params.layout.scaling_logits) result.alphas = result.params.alphas();
  return result;
}

ExperimentResult run_experiment(const GraphStore& graph, const SplitAssignment& split, const WalkConfig& walk,
                                const ModelConfig& model, const TrainConfig& train, std::size_t num_runs,
                                int workers) {
  if (num_runs < 1) throw std::invalid_argument("run_experiment: num_runs must be >= 1");
  ExperimentResult out;
  for (std::size_t r = 0; r < num_runs; ++r) {
    WalkConfig w = walk;
    w.seed = walk.seed + r;
    TrainConfig t = train;
    t.seed = train.seed + r;
    FitOptions opts;
    opts.workers = workers;
    out.runs.push_back(fit(graph, split, w, model, t, opts));
    out.test_accs.push_back(out.runs.back().test_acc);
  }
  const double n = static_cast<double>(num_runs);
  out.mean = std::accumulate(out.test_accs.begin(), out.test_accs.end(), 0.0) / n;
  double ss = 0.0;
  for (double a : out.test_accs) ss += (a - out.mean) * (a - out.mean);
  out.stddev = std::sqrt(ss / n);
  return out;
}

void SearchSpace::validate() const {
  if (hidden_size.empty() || num_layers.empty() || eps.empty() || rw_hops.empty() || alter_pool.empty())
    throw std::invalid_argument("search: every choice list must be nonempty");
  if (budget < 1) throw std::invalid_argument("search: budget must be >= 1");
  if (!(lr[0] > 0.0 && lr[0] <= lr[1]) || !(weight_decay[0] > 0.0 && weight_decay[0] <= weight_decay[1]))
    throw std::invalid_argument("search: log-uniform ranges need 0 < min <= max");
  if (!(dropout[0] >= 0.0 && dropout[0] <= dropout[1] && dropout[1] < 1.0))
    throw std::invalid_argument("search: dropout range must lie in [0, 1)");
}

Trial draw_trial(const SearchSpace& space, std::uint64_t seed, std::size_t index) {
  KeyedRng rng{seed, 0x7e1a1u, index};
  const auto log_uniform = [&](const std::array<double, 2>& r) {
    return std::exp(std::log(r[0]) + rng.uniform() * (std::log(r[1]) - std::log(r[0])));
  };
  const auto pick = [&](const auto& choices) { return choices[rng.below(choices.size())]; };
  Trial t;
  t.index = index;
  t.lr = log_uniform(space.lr);
  t.weight_decay = log_uniform(space.weight_decay);
  t.dropout = space.dropout[0] + rng.uniform() * (space.dropout[1] - space.dropout[0]);
  t.hidden_size = pick(space.hidden_size);
  t.num_layers = pick(space.num_layers);
  t.eps = pick(space.eps);
  t.rw_hops = pick(space.rw_hops);
  t.alter_pool = pick(space.alter_pool);
  return t;
}

SearchResult random_search(const GraphStore& graph, const SplitAssignment& split, const WalkConfig& walk,
                           const ModelConfig& model, const TrainConfig& train, const SearchSpace& space,
                           std::uint64_t seed, int workers) {
  space.validate();
  SearchResult result;
  for (std::size_t i = 0; i < space.budget; ++i) result.trials.push_back(draw_trial(space, seed, i));

  const auto count = static_cast<std::int64_t>(space.budget);
#pragma omp parallel for schedule(dynamic, 1) num_threads(std::max(1, workers)) if (workers > 1)
  for (std::int64_t i = 0; i < count; ++i) {
    Trial& trial = result.trials[static_cast<std::size_t>(i)];
    WalkConfig w = walk;
    w.rw_hops = trial.rw_hops;
    ModelConfig m = model;
    m.hidden_size = trial.hidden_size;
    m.num_layers = trial.num_layers;
    m.eps = trial.eps;
    m.alter_pool = trial.alter_pool;
    m.dropout = trial.dropout;
    TrainConfig t = train;
    t.lr = trial.lr;
    t.weight_decay = trial.weight_decay;
    t.max_epochs = space.max_epochs;
    try {
      const FitResult r = fit(graph, split, w, m, t);
      trial.val_acc = r.val_acc;
      trial.test_acc = r.test_acc;
    } catch (const std::exception& e) {
      trial.status = std::string("failed: ") + e.what();
      trial.val_acc = -1.0;
    }
  }

  for (std::size_t i = 1; i < result.trials.size(); ++i)
    if (result.trials[i].val_acc > result.trials[result.best].val_acc) result.best = i;
  return result;
}

void write_metrics_csv(const std::vector<EpochMetrics>& trace, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "epoch,train_loss,val_acc,test_acc,alpha1,alpha2,alpha3,alpha4\n";
  for (const auto& m : trace) {
    out << m.epoch << ',' << detail::format_real(m.train_loss) << ',' << detail::format_real(m.val_acc) << ','
        << detail::format_real(m.test_acc);
    for (double a : m.alphas) out << ',' << detail::format_real(a);
    out << '\n';
  }
}

void write_trials_csv(const std::vector<Trial>& trials, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "trial,lr,weight_decay,dropout,hidden_size,num_layers,eps,rw_hops,alter_pool,val_acc,test_acc,status\n";
  for (const auto& t : trials) {
    std::string status = t.status;
    std::replace(status.begin(), status.end(), ',', ';');
    out << t.index << ',' << detail::format_real(t.lr) << ',' << detail::format_real(t.weight_decay) << ','
        << detail::format_real(t.dropout) << ',' << t.hidden_size << ',' << t.num_layers << ','
        << detail::format_real(t.eps) << ',' << t.rw_hops << ',' << to_string(t.alter_pool) << ','
        << detail::format_real(t.val_acc) << ',' << detail::format_real(t.test_acc) << ',' << status << '\n';
  }
}

}  // namespace subgnd
