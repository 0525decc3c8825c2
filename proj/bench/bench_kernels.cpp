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

// Serial reference vs OpenMP path for the two parallel kernels.
// Arg 0 selects the serial reference; any other arg is the worker count.

#include <benchmark/benchmark.h>

#include <numeric>
#include <vector>

#include "subgnd/graph.hpp"
#include "subgnd/model.hpp"
#include "subgnd/sampler.hpp"
#include "subgnd/trainer.hpp"

namespace {

using namespace subgnd;

const GraphStore& bench_graph() {
  static const GraphStore g = [] {
    SyntheticSpec s;
    s.num_nodes = 1000;
    s.intra_prob = 0.03;
    s.inter_prob = 0.005;
    s.seed = 1;
    return synth_graph(s);
  }();
  return g;
}

void BM_SampleDataset(benchmark::State& state) {
  const GraphStore& g = bench_graph();
  const WalkConfig walk;
  const int workers = static_cast<int>(state.range(0));
  for (auto _ : state) {
    auto corpus = workers == 0 ? sample_dataset_serial(g, walk) : sample_dataset_parallel(g, walk, workers);
    benchmark::DoNotOptimize(corpus);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(g.num_nodes()));
}
BENCHMARK(BM_SampleDataset)->Arg(0)->Arg(1)->Arg(2)->Arg(4)->UseRealTime()->Unit(benchmark::kMillisecond);

void BM_BatchGradient(benchmark::State& state) {
  const GraphStore& g = bench_graph();
  static const SubgraphCorpus corpus = sample_dataset(g, WalkConfig{});
  ModelConfig model;
  model.input_dim = g.feature_dim();
  model.num_classes = g.num_classes();
  const ModelParams params = init_params(model, 0);
  const TrainConfig train;
  std::vector<NodeId> batch(train.batch_size);
  std::iota(batch.begin(), batch.end(), 0);
  const int workers = static_cast<int>(state.range(0));
  for (auto _ : state) {
    auto grad = workers == 0 ? batch_gradient_serial(params, model, train, corpus, batch, 1)
                             : batch_gradient_parallel(params, model, train, corpus, batch, 1, workers);
    benchmark::DoNotOptimize(grad);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(batch.size()));
}
BENCHMARK(BM_BatchGradient)->Arg(0)->Arg(1)->Arg(2)->Arg(4)->UseRealTime()->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
