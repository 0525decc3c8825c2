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

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "subgnd/graph.hpp"
#include "subgnd/model.hpp"
#include "subgnd/sampler.hpp"

namespace subgnd {

struct TrainConfig {
  double lr = 0.01;
  double alpha_lr = 0.01;  // scaling logits get their own rate and no weight decay
  double weight_decay = 5e-4;
  std::size_t max_epochs = 150;
  std::size_t patience = 25;  // epochs without a strictly better validation accuracy
  std::size_t batch_size = 64;  // egos per optimizer step; each contributes both samples
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;
  std::size_t num_runs = 10;

  void validate() const;
};

struct AdamState {
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  std::size_t step = 0;

  explicit AdamState(const ModelParams& params);
};

/// One bias-corrected Adam update. Decoupled weight decay (lr * weight_decay * w)
/// applies to every tensor except the scaling logits, which move with alpha_lr.
/// Throws std::domain_error (leaving params untouched) on a non-finite gradient.
void adam_step(ModelParams& params, const std::vector<Tensor>& grads, AdamState& state, const TrainConfig& config);

using StepHook = std::function<void(const ModelParams&)>;

struct EpochContext {
  std::size_t epoch = 1;
  int workers = 1;
  StepHook on_step;  // called after every optimizer step
};

/// Gradient of a batch of egos: per-sample backward passes over both samples of
/// each ego, summed in (ego, sample) order. The OpenMP path gives the same bits.
SampleGradient batch_gradient_serial(const ModelParams& params, const ModelConfig& config, const TrainConfig& train,
                                     const SubgraphCorpus& corpus, std::span<const NodeId> egos, std::size_t epoch);
SampleGradient batch_gradient_parallel(const ModelParams& params, const ModelConfig& config,
                                       const TrainConfig& train, const SubgraphCorpus& corpus,
                                       std::span<const NodeId> egos, std::size_t epoch, int workers);

/// Shuffles the train egos, steps once per mini-batch, returns the mean per-sample loss.
double train_epoch(ModelParams& params, AdamState& state, const ModelConfig& config, const TrainConfig& train,
                   const SubgraphCorpus& corpus, std::span<const NodeId> train_nodes, const EpochContext& ctx);

using Predictor = std::function<Tensor(const InducedSubgraph&)>;

/// Averages the two samples' logits per ego and takes the argmax (lowest class
/// on ties). Throws std::invalid_argument for an empty node set.
double evaluate(const Predictor& predictor, const SubgraphCorpus& corpus, std::span<const NodeId> nodes,
                int workers = 1);
double evaluate(const ModelParams& params, const ModelConfig& config, const SubgraphCorpus& corpus,
                std::span<const NodeId> nodes, int workers = 1);

struct EpochMetrics {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_acc = 0.0;
  double test_acc = 0.0;  // NaN when the test split is empty
  std::array<double, 4> alphas{};  // NaN for the base model
};

struct FitResult {
  ModelParams params;  // parameters of the best validation epoch
  ModelConfig model;   // config with input_dim / num_classes resolved from the graph
  std::vector<EpochMetrics> trace;
  std::size_t best_epoch = 0;
  double train_acc = 0.0;
  double val_acc = 0.0;
  double test_acc = 0.0;
  std::vector<double> alphas;  // empty for the base model
};

struct FitOptions {
  int workers = 1;
  StepHook on_step;
  const SubgraphCorpus* corpus = nullptr;  // reuse a pre-sampled corpus instead of sampling
};

/// Samples the corpus once, then trains with early stopping on validation accuracy
/// (train accuracy when the validation split is empty). Throws DivergenceError.
FitResult fit(const GraphStore& graph, const SplitAssignment& split, const WalkConfig& walk, ModelConfig model,
              const TrainConfig& train, const FitOptions& options = {});

struct ExperimentResult {
  double mean = 0.0;
  double stddev = 0.0;  // population standard deviation
  std::vector<double> test_accs;
  std::vector<FitResult> runs;
};

/// num_runs fits with train and walk seeds offset by the run index.
ExperimentResult run_experiment(const GraphStore& graph, const SplitAssignment& split, const WalkConfig& walk,
                                const ModelConfig& model, const TrainConfig& train, std::size_t num_runs,
                                int workers = 1);

struct SearchSpace {
  std::array<double, 2> lr{1e-4, 1e-1};            // log-uniform
  std::array<double, 2> weight_decay{1e-6, 1e-2};  // log-uniform
  std::array<double, 2> dropout{0.0, 0.7};         // uniform
  std::vector<std::size_t> hidden_size{32, 64, 128};
  std::vector<std::size_t> num_layers{1, 2, 3};
  std::vector<double> eps{-1.0, 0.0, 1.0};
  std::vector<std::size_t> rw_hops{16, 32, 64, 128, 256};
  std::vector<ad::PoolMode> alter_pool{ad::PoolMode::max, ad::PoolMode::mean, ad::PoolMode::sum};
  std::size_t budget = 150;
  std::size_t max_epochs = 150;  // per trial

  void validate() const;
};

struct Trial {
  std::size_t index = 0;
  double lr = 0.0;
  double weight_decay = 0.0;
  double dropout = 0.0;
  std::size_t hidden_size = 0;
  std::size_t num_layers = 0;
  double eps = 0.0;
  std::size_t rw_hops = 0;
  ad::PoolMode alter_pool = ad::PoolMode::mean;
  double val_acc = -1.0;
  double test_acc = -1.0;
  std::string status = "ok";
};

struct SearchResult {
  std::vector<Trial> trials;
  std::size_t best = 0;  // highest validation accuracy, lowest index on ties
};

/// Draws the i-th trial's hyperparameters from the stream (seed, i).
Trial draw_trial(const SearchSpace& space, std::uint64_t seed, std::size_t index);

/// Seeded uniform random search. Each trial is one fit; failed trials are logged
/// with their error and skipped. Trials run in parallel when workers > 1.
SearchResult random_search(const GraphStore& graph, const SplitAssignment& split, const WalkConfig& walk,
                           const ModelConfig& model, const TrainConfig& train, const SearchSpace& space,
                           std::uint64_t seed, int workers = 1);

void write_metrics_csv(const std::vector<EpochMetrics>& trace, const std::filesystem::path& path);
void write_trials_csv(const std::vector<Trial>& trials, const std::filesystem::path& path);

}  // namespace subgnd
