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

#include <doctest.h>

#include <algorithm>
#include <set>

#include "subgnd/sampler.hpp"
#include "test_util.hpp"

using namespace subgnd;
using subgnd::testing::random_graph;

namespace {

GraphStore directed_path(std::size_t n) {
  std::vector<Edge> edges;
  for (NodeId i = 0; i + 1 < n; ++i) edges.emplace_back(i, i + 1);
  return GraphStore(n, edges, Tensor({n, 1}), std::vector<int>(n, 0), 1);
}

std::vector<Edge> brute_force_induce(const GraphStore& g, const std::vector<NodeId>& nodes) {
  std::vector<Edge> out;
  for (const auto& e : g.edges()) {
    const bool a = std::find(nodes.begin(), nodes.end(), e.first) != nodes.end();
    const bool b = std::find(nodes.begin(), nodes.end(), e.second) != nodes.end();
    if (a && b) out.push_back(e);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<NodeId> random_subset(KeyedRng& rng, std::size_t n, std::size_t k) {
  std::vector<NodeId> all(n);
  for (NodeId i = 0; i < n; ++i) all[i] = i;
  for (std::size_t i = 0; i < k; ++i) std::swap(all[i], all[i + rng.below(n - i)]);
  all.resize(k);
  return all;
}

}  // namespace

TEST_CASE("rwr_walk trivial cases") {
  KeyedRng rng{1};
  for (int t = 0; t < 100; ++t) {
    const GraphStore g = random_graph(rng, 2 + rng.below(60), rng.below(400));
    const auto seed = static_cast<NodeId>(rng.below(g.num_nodes()));
    WalkConfig always_restart;
    always_restart.restart_probability = 1.0;
    CHECK(rwr_walk(g, seed, always_restart, rng) == std::vector<NodeId>{seed});
    WalkConfig one_hop;
    one_hop.rw_hops = 1;
    CHECK(rwr_walk(g, seed, one_hop, rng) == std::vector<NodeId>{seed});
  }
}

TEST_CASE("rwr_walk on a directed path is deterministic") {
  const GraphStore g = directed_path(4);
  WalkConfig cfg;
  cfg.restart_probability = 0.0;
  cfg.rw_hops = 3;
  cfg.max_steps = 1000;
  for (std::uint64_t s = 0; s < 50; ++s) {
    KeyedRng rng{s};
    CHECK(rwr_walk(g, 0, cfg, rng) == std::vector<NodeId>{0, 1, 2});
  }
}

TEST_CASE("rwr_walk restarts at dead ends") {
  // 0 -> 1 -> 2 (2 has no out-neighbor); the walker must come back and stay bounded.
  const GraphStore g = directed_path(3);
  WalkConfig cfg;
  cfg.restart_probability = 0.0;
  cfg.rw_hops = 10;
  KeyedRng rng{5};
  CHECK(rwr_walk(g, 0, cfg, rng) == std::vector<NodeId>{0, 1, 2});
  CHECK(rwr_walk(g, 2, cfg, rng) == std::vector<NodeId>{2});
}

TEST_CASE("rwr_walk direction") {
  const GraphStore g = directed_path(3);
  WalkConfig cfg;
  cfg.restart_probability = 0.0;
  cfg.rw_hops = 3;
  KeyedRng rng{5};
  cfg.direction = WalkDirection::in;
  CHECK(rwr_walk(g, 2, cfg, rng) == std::vector<NodeId>{2, 1, 0});
  CHECK(rwr_walk(g, 0, cfg, rng) == std::vector<NodeId>{0});
  cfg.direction = WalkDirection::both;
  cfg.rw_hops = 2;
  const auto both = rwr_walk(g, 1, cfg, rng);
  CHECK(both.size() == 2);
  CHECK(both[0] == 1);
}

TEST_CASE("rwr_walk rejects a bad seed node") {
  const GraphStore g = directed_path(3);
  KeyedRng rng{0};
  CHECK_THROWS_AS(rwr_walk(g, 3, WalkConfig{}, rng), std::out_of_range);
}

TEST_CASE("WalkConfig validation") {
  WalkConfig c;
  c.restart_probability = 1.5;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = {};
  c.rw_hops = 0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = {};
  c.rw_hops = 8;
  c.max_steps = 4;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c.max_steps = 0;
  CHECK(c.step_cap() == 128);
}

TEST_CASE("induce_edges examples") {
  const GraphStore tri(3, {{0, 1}, {1, 2}, {2, 0}}, Tensor({3, 1}), {0, 0, 0}, 1);
  CHECK(induce_edges(tri, {0, 1}) == std::vector<Edge>{{0, 1}});
  auto all = induce_edges(tri, {0, 1, 2});
  std::sort(all.begin(), all.end());
  CHECK(all == tri.edges());
}

TEST_CASE("induce_edges matches brute force") {
  KeyedRng rng{2};
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = 1 + rng.below(200);
    const GraphStore g = random_graph(rng, n, rng.below(4 * n + 1));
    const auto nodes = random_subset(rng, n, 1 + rng.below(n));
    auto got = induce_edges(g, nodes);
    std::sort(got.begin(), got.end());
    REQUIRE(got == brute_force_induce(g, nodes));
  }
}

TEST_CASE("bidirectionalize") {
  CHECK(bidirectionalize({{0, 1}}) == std::vector<Edge>{{0, 1}, {1, 0}});
  CHECK(bidirectionalize({{0, 1}, {1, 0}}) == std::vector<Edge>{{0, 1}, {1, 0}});
  CHECK(bidirectionalize({{2, 2}}) == std::vector<Edge>{{2, 2}});
  CHECK(bidirectionalize({}).empty());
}

TEST_CASE("anonymize relabels by visit order") {
  Tensor x({10, 2});
  for (std::size_t i = 0; i < x.size(); ++i) x.data[i] = double(i);
  std::vector<int> labels(10, 0);
  labels[5] = 1;
  const GraphStore g(10, {{2, 9}, {7, 7}}, x, labels, 2);

  const InducedSubgraph s = anonymize(g, {5, 2, 9}, {{2, 9}});
  CHECK(s.orig_ids == std::vector<NodeId>{5, 2, 9});
  CHECK(s.local_edges == std::vector<Edge>{{1, 2}});
  CHECK(s.ego_local == 0);
  CHECK(s.label == 1);
  CHECK(s.features.at(1, 0) == x.at(2, 0));
  CHECK(s.features.at(1, 1) == x.at(2, 1));

  CHECK(anonymize(g, {7}, {{7, 7}}).local_edges == std::vector<Edge>{{0, 0}});
  CHECK_THROWS_AS(anonymize(g, {5, 2}, {{2, 9}}), std::invalid_argument);
}

TEST_CASE("sample_subgraph dead ends get a self-loop") {
  const GraphStore g(3, {{0, 1}}, Tensor({3, 1}), {0, 1, 1}, 2);
  KeyedRng rng{0};
  const InducedSubgraph iso = sample_subgraph(g, 2, WalkConfig{}, rng);
  CHECK(iso.orig_ids == std::vector<NodeId>{2});
  CHECK(iso.local_edges == std::vector<Edge>{{0, 0}});
  CHECK(iso.label == 1);

  WalkConfig restart;
  restart.restart_probability = 1.0;
  const InducedSubgraph s = sample_subgraph(g, 0, restart, rng);
  CHECK(s.orig_ids == std::vector<NodeId>{0});
  CHECK(s.local_edges == std::vector<Edge>{{0, 0}});
}

TEST_CASE("sample_subgraph is deterministic per stream") {
  KeyedRng gen{3};
  const GraphStore g = random_graph(gen, 40, 200);
  WalkConfig cfg;
  cfg.rw_hops = 8;
  KeyedRng a{11, 4}, b{11, 4};
  CHECK(sample_subgraph(g, 4, cfg, a) == sample_subgraph(g, 4, cfg, b));
}

TEST_CASE("subgraph invariants hold over 10k samples") {
  KeyedRng gen{4};
  std::size_t count = 0;
  while (count < 10000) {
    const std::size_t n = 1 + gen.below(80);
    const GraphStore g = random_graph(gen, n, gen.below(5 * n + 1));
    WalkConfig cfg;
    cfg.rw_hops = 1 + gen.below(20);
    cfg.restart_probability = gen.uniform();
    cfg.direction = static_cast<WalkDirection>(gen.below(3));
    cfg.seed = gen();
    const SubgraphCorpus corpus = sample_dataset(g, cfg);
    for (NodeId v = 0; v < n; ++v) {
      for (const auto& sub : corpus[v]) {
        REQUIRE(check_invariants(sub, cfg.rw_hops) == "");
        REQUIRE(sub.orig_ids[0] == v);
        REQUIRE(sub.label == g.label(v));
        ++count;
      }
    }
  }
}

TEST_CASE("sample_dataset cardinality and seeding") {
  KeyedRng gen{6};
  const GraphStore g = random_graph(gen, 4, 10);
  WalkConfig cfg;
  cfg.rw_hops = 3;
  const SubgraphCorpus c = sample_dataset(g, cfg);
  REQUIRE(c.size() == 4);
  for (NodeId v = 0; v < 4; ++v)
    for (const auto& s : c[v]) CHECK(s.label == g.label(v));
  CHECK(sample_dataset(g, cfg) == c);

  SyntheticSpec spec;
  spec.num_nodes = 100;
  const GraphStore pp = synth_graph(spec);
  WalkConfig a;
  a.rw_hops = 32;
  WalkConfig b = a;
  b.seed = 1;
  const SubgraphCorpus ca = sample_dataset(pp, a), cb = sample_dataset(pp, b);
  std::size_t differing = 0;
  for (NodeId v = 0; v < 100; ++v) {
    for (int k = 0; k < 2; ++k) {
      CHECK(ca[v][k].size() >= 1);
      CHECK(ca[v][k].size() <= 32);
      differing += !(ca[v][k] == cb[v][k]);
    }
  }
  CHECK(differing > 150);
}

TEST_CASE("parallel corpus equals the serial reference") {
  SyntheticSpec spec;
  spec.num_nodes = 150;
  spec.seed = 8;
  const GraphStore g = synth_graph(spec);
  WalkConfig cfg;
  cfg.rw_hops = 16;
  cfg.seed = 21;
  const SubgraphCorpus serial = sample_dataset_serial(g, cfg);
  for (int workers : {2, 4, 7}) CHECK(sample_dataset_parallel(g, cfg, workers) == serial);
}

TEST_CASE("corpus file round-trips exactly") {
  SyntheticSpec spec;
  spec.num_nodes = 40;
  const GraphStore g = synth_graph(spec);
  WalkConfig cfg;
  cfg.rw_hops = 6;
  const SubgraphCorpus c = sample_dataset(g, cfg);
  TempDir dir;
  write_corpus(c, g.feature_dim(), dir / "corpus.txt");
  CHECK(read_corpus(dir / "corpus.txt") == c);
}
