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

#include <cmath>
#include <numeric>

#include "subgnd/model.hpp"
#include "test_util.hpp"

using namespace subgnd;
using ad::PoolMode;
using ad::Tape;
using ad::Var;

namespace {

ModelConfig small_config(ModelVariant variant, std::size_t d = 3) {
  ModelConfig c;
  c.variant = variant;
  c.input_dim = d;
  c.hidden_size = 4;
  c.num_layers = 2;
  c.num_classes = 3;
  return c;
}

InducedSubgraph make_sub(std::vector<NodeId> ids, std::vector<Edge> edges, Tensor features, int label = 0) {
  InducedSubgraph s;
  s.orig_ids = std::move(ids);
  s.local_edges = bidirectionalize(edges);
  s.features = std::move(features);
  s.label = label;
  return s;
}

InducedSubgraph random_sub(KeyedRng& rng, std::size_t n, std::size_t d) {
  std::vector<NodeId> ids(n);
  std::iota(ids.begin(), ids.end(), 0);
  std::vector<Edge> edges;
  for (NodeId v = 1; v < n; ++v) edges.emplace_back(static_cast<NodeId>(rng.below(v)), v);  // connected tree
  for (std::size_t e = 0; e < n; ++e)
    edges.emplace_back(static_cast<NodeId>(rng.below(n)), static_cast<NodeId>(rng.below(n)));
  Tensor x({n, d});
  for (auto& v : x.data) v = 2.0 * rng.uniform() - 1.0;
  return make_sub(ids, edges, x, static_cast<int>(rng.below(3)));
}

/// Subgraph of the conflict fixture seen from `ego` inside its two-node star.
InducedSubgraph star_view(const GraphStore& g, NodeId ego) {
  const NodeId other = ego ^ 1u;
  return anonymize(g, {ego, other}, bidirectionalize(induce_edges(g, {ego, other})));
}

}  // namespace

TEST_CASE("ModelConfig validation") {
  ModelConfig c = small_config(ModelVariant::subgnd);
  CHECK_NOTHROW(c.validate());
  c.num_classes = 1;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = small_config(ModelVariant::subgnd);
  c.dropout = 1.0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = small_config(ModelVariant::subgnd);
  c.num_layers = 0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  CHECK(small_config(ModelVariant::subgnd).trunk_width() == 8);
  CHECK(small_config(ModelVariant::subgnd).readout_width() == 16);
  CHECK(small_config(ModelVariant::base).readout_width() == 4);
}

TEST_CASE("init_params") {
  ModelConfig c = small_config(ModelVariant::subgnd, 4);
  c.hidden_size = 8;
  const ModelParams p = init_params(c, 3);
  CHECK(init_params(c, 3) == p);
  CHECK_FALSE(init_params(c, 4) == p);
  CHECK(p.alphas() == std::vector<double>{0.25, 0.25, 0.25, 0.25});

  const Tensor& proj = p.tensors[p.layout.proj_weight];
  CHECK(proj.shape == std::vector<std::size_t>{4, 8});
  const double bound = std::sqrt(6.0 / 12.0);
  for (double w : proj.data) CHECK(std::abs(w) <= bound);
  for (double b : p.tensors[p.layout.proj_bias].data) CHECK(b == 0.0);

  CHECK(p.names.front() == "input_proj.weight");
  CHECK(p.tensors[p.layout.head_hidden_weight].shape == std::vector<std::size_t>{32, 8});
  CHECK(p.tensors[p.layout.gin_weights[1][0]].shape == std::vector<std::size_t>{16, 16});
  CHECK_THROWS_AS(init_params(small_config(ModelVariant::base), 0).alphas(), std::logic_error);
}

TEST_CASE("zero_pad") {
  Tape t;
  Var h = t.leaf(Tensor::matrix(2, 2, {1, 2, 3, 4}));
  CHECK(zero_pad(h, 0).value() == Tensor::matrix(2, 4, {1, 2, 0, 0, 0, 0, 3, 4}));
  CHECK(zero_pad(t.leaf(Tensor::matrix(1, 2, {5, 6})), 0).value() == Tensor::matrix(1, 4, {5, 6, 0, 0}));
  const Tensor same = zero_pad(t.leaf(Tensor::matrix(2, 1, {7, 7})), 0).value();
  CHECK(same.row(0)[0] != same.row(1)[0]);
  CHECK_THROWS_AS(zero_pad(h, 2), std::out_of_range);
}

TEST_CASE("gin_layer hand values") {
  Tape t;
  Var h = t.leaf(Tensor::matrix(2, 1, {1, 2}));
  const Var mlp[] = {t.leaf(Tensor::matrix(1, 1, {1})), t.leaf(Tensor::vector({0}))};
  const std::vector<Edge> one_way{{1, 0}};
  CHECK(gin_layer(h, one_way, 0.0, mlp).value() == Tensor::matrix(2, 1, {3, 2}));
  const std::vector<Edge> both{{0, 1}, {1, 0}};
  CHECK(gin_layer(h, both, -1.0, mlp).value() == Tensor::matrix(2, 1, {2, 1}));
  CHECK(gin_layer(h, {}, 0.0, mlp).value() == h.value());
  const std::vector<Edge> loops{{0, 0}, {1, 1}};
  CHECK(gin_layer(h, loops, 0.0, mlp).value() == Tensor::matrix(2, 1, {2, 4}));
  const std::vector<Edge> bad{{0, 2}};
  CHECK_THROWS_AS(gin_layer(h, bad, 0.0, mlp), std::out_of_range);
}

TEST_CASE("layer_maxpool") {
  Tape t;
  const Var layers[] = {t.leaf(Tensor::matrix(2, 1, {1, 5})), t.leaf(Tensor::matrix(2, 1, {3, 2}))};
  CHECK(layer_maxpool(layers).value() == Tensor::matrix(2, 1, {3, 5}));
  CHECK(layer_maxpool(std::span(layers, 1)).value() == layers[0].value());

  KeyedRng rng{1};
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<Tensor> ps;
    for (int l = 0; l < 3; ++l) {
      Tensor x({3, 2});
      for (auto& v : x.data) v = rng.uniform();
      ps.push_back(x);
    }
    const auto res = ad::grad_check(
        [](Tape&, const std::vector<Var>& v) {
          const Var w = v[0].tape->constant(Tensor::matrix(3, 2, {1, -2, 3, 0.5, -1, 2}));
          return ad::sum(ad::mul(layer_maxpool(v), w));
        },
        ps);
    CHECK(res.max_rel_error < 1e-6);
  }
}

TEST_CASE("ego_alter_concat") {
  Tape t;
  Var h = t.leaf(Tensor::matrix(3, 2, {1, 2, 3, 4, 5, 6}));
  CHECK(ego_alter_concat(h, 0, PoolMode::max).value() == Tensor::vector({1, 2, 5, 6}));
  CHECK(ego_alter_concat(h, 0, PoolMode::mean).value() == Tensor::vector({1, 2, 4, 5}));
  CHECK(ego_alter_concat(h, 0, PoolMode::sum).value() == Tensor::vector({1, 2, 8, 10}));
  CHECK(ego_alter_concat(t.leaf(Tensor::matrix(1, 2, {7, 8})), 0, PoolMode::mean).value() ==
        Tensor::vector({7, 8, 0, 0}));
  CHECK_THROWS_AS(ego_alter_concat(h, 3, PoolMode::max), std::out_of_range);
}

TEST_CASE("adaptive_scale") {
  Tape t;
  Var h = t.leaf(Tensor::vector({4, 8, 12, 16}));
  CHECK(adaptive_scale(h, t.leaf(Tensor::vector({0, 0, 0, 0}))).value() == Tensor::vector({1, 2, 3, 4}));

  Var h8 = t.leaf(Tensor::vector({1, 2, 3, 4, 5, 6, 7, 8}));
  const Tensor a = adaptive_scale(h8, t.leaf(Tensor::vector({0.1, -0.3, 0.7, 0.2}))).value();
  const Tensor b = adaptive_scale(h8, t.leaf(Tensor::vector({5.1, 4.7, 5.7, 5.2}))).value();
  for (std::size_t i = 0; i < 8; ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-12));
  CHECK_THROWS_AS(adaptive_scale(t.leaf(Tensor::vector({1, 2, 3})), t.leaf(Tensor::vector({0, 0, 0, 0}))),
                  std::invalid_argument);
}

TEST_CASE("forward on a singleton") {
  for (ModelVariant v : {ModelVariant::subgnd, ModelVariant::base}) {
    const ModelConfig c = small_config(v);
    const ModelParams p = init_params(c, 0);
    const InducedSubgraph s = make_sub({9}, {{0, 0}}, Tensor::matrix(1, 3, {0.3, -0.2, 1.0}));
    const Tensor logits = predict(s, p, c);
    CHECK(logits.shape == std::vector<std::size_t>{3});
    for (double x : logits.data) CHECK(std::isfinite(x));
    CHECK(predict(s, p, c) == logits);
  }
}

TEST_CASE("forward rejects mismatched inputs") {
  const ModelConfig c = small_config(ModelVariant::subgnd);
  const ModelParams p = init_params(c, 0);
  const InducedSubgraph s = make_sub({0}, {{0, 0}}, Tensor::matrix(1, 2, {1, 2}));
  CHECK_THROWS_AS(forward(s, p, c), std::invalid_argument);
  const ModelConfig b = small_config(ModelVariant::base);
  const InducedSubgraph ok = make_sub({0}, {{0, 0}}, Tensor::matrix(1, 3, {1, 2, 3}));
  CHECK_THROWS_AS(forward(ok, init_params(b, 0), b), std::invalid_argument);
}

TEST_CASE("dropout only acts in train mode") {
  ModelConfig c = small_config(ModelVariant::subgnd);
  c.dropout = 0.5;
  const ModelParams p = init_params(c, 0);
  KeyedRng rng{2};
  const InducedSubgraph s = random_sub(rng, 5, 3);
  CHECK(forward(s, p, c, Mode::eval, 1) == forward(s, p, c, Mode::eval, 2));
  CHECK_FALSE(forward(s, p, c, Mode::train, 1) == forward(s, p, c, Mode::train, 2));
  CHECK(forward(s, p, c, Mode::train, 1) == forward(s, p, c, Mode::train, 1));
}

TEST_CASE("alter permutation invariance") {
  KeyedRng rng{3};
  for (PoolMode mode : {PoolMode::max, PoolMode::mean, PoolMode::sum}) {
    for (int trial = 0; trial < 20; ++trial) {
      ModelConfig c = small_config(ModelVariant::subgnd);
      c.alter_pool = mode;
      c.eps = -1.0 + static_cast<double>(trial % 3);
      const ModelParams p = init_params(c, static_cast<std::uint64_t>(trial));
      const std::size_t n = 2 + rng.below(6);
      const InducedSubgraph s = random_sub(rng, n, 3);

      std::vector<NodeId> perm(n);
      std::iota(perm.begin(), perm.end(), 0);
      for (std::size_t i = n - 1; i > 1; --i) std::swap(perm[i], perm[1 + rng.below(i)]);
      InducedSubgraph q = s;
      std::vector<Edge> edges;
      for (const auto& [a, b] : s.local_edges) edges.emplace_back(perm[a], perm[b]);
      q.local_edges = bidirectionalize(edges);
      for (std::size_t i = 0; i < n; ++i) {
        q.orig_ids[perm[i]] = s.orig_ids[i];
        std::copy(s.features.row(i).begin(), s.features.row(i).end(), q.features.row(perm[i]).begin());
      }
      const Tensor a = forward(s, p, c), b = forward(q, p, c);
      for (std::size_t k = 0; k < a.size(); ++k) CHECK(a[k] == doctest::Approx(b[k]).epsilon(1e-12));
    }
  }
}

TEST_CASE("conflict separation") {
  const GraphStore g = synth_conflict_fixture(1, 3, 0);
  // A.hub (feature a, label 0) and A.leaf (feature b, label 1) see the same two-node star.
  const InducedSubgraph hub = star_view(g, 0), leaf = star_view(g, 1);
  REQUIRE(hub.label != leaf.label);
  std::size_t separated = 0;
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    for (PoolMode mode : {PoolMode::mean, PoolMode::sum}) {
      ModelConfig base = small_config(ModelVariant::base);
      base.alter_pool = mode;
      base.eps = static_cast<double>(seed % 3) - 1.0;
      const ModelParams bp = init_params(base, seed);
      CHECK(base_forward(hub, bp, base) == base_forward(leaf, bp, base));

      ModelConfig sg = small_config(ModelVariant::subgnd);
      sg.hidden_size = 16;  // at width 4 an all-dead ReLU head is common enough to collapse both logits
      sg.alter_pool = mode;
      const ModelParams sp = init_params(sg, seed);
      separated += !(forward(hub, sp, sg) == forward(leaf, sp, sg));
    }
  }
  CHECK(separated == 50);
}

TEST_CASE("base_forward on a singleton pools its only row") {
  const ModelConfig c = small_config(ModelVariant::base);
  const ModelParams p = init_params(c, 5);
  const InducedSubgraph s = make_sub({0}, {{0, 0}}, Tensor::matrix(1, 3, {0.1, 0.2, 0.3}));
  ModelConfig mx = c;
  mx.alter_pool = PoolMode::max;
  CHECK(base_forward(s, p, c) == base_forward(s, p, mx));
}

TEST_CASE("end-to-end gradient check") {
  KeyedRng rng{4};
  for (ModelVariant v : {ModelVariant::subgnd, ModelVariant::base}) {
    for (int trial = 0; trial < 5; ++trial) {
      ModelConfig c = small_config(v);
      c.eps = static_cast<double>(trial % 3) - 1.0;
      c.alter_pool = static_cast<PoolMode>(trial % 3);
      ModelParams p = init_params(c, static_cast<std::uint64_t>(trial));
      if (p.layout.scaling_logits)
        for (auto& x : p.tensors[*p.layout.scaling_logits].data) x = rng.uniform() - 0.5;
      const InducedSubgraph s = random_sub(rng, 5, 3);
      ad::GradCheckOptions opt;
      opt.num_coords = 50;
      opt.seed = static_cast<std::uint64_t>(trial);
      const auto res = check_model_gradients(s, p, c, opt);
      CHECK(res.max_rel_error < 1e-3);
      CHECK(res.checked > 25);
    }
  }
}

TEST_CASE("sample_gradient matches the gradient check point") {
  const ModelConfig c = small_config(ModelVariant::subgnd);
  const ModelParams p = init_params(c, 1);
  KeyedRng rng{5};
  const InducedSubgraph s = random_sub(rng, 4, 3);
  KeyedRng drop{0};
  const SampleGradient g = sample_gradient(s, p, c, Mode::eval, drop);
  REQUIRE(g.grads.size() == p.size());
  for (std::size_t i = 0; i < p.size(); ++i) CHECK(g.grads[i].shape == p.tensors[i].shape);
  CHECK(g.loss > 0.0);
}

TEST_CASE("checkpoint round-trip") {
  for (ModelVariant v : {ModelVariant::subgnd, ModelVariant::base}) {
    ModelConfig c = small_config(v);
    c.eps = -1.0;
    c.dropout = 0.25;
    c.alter_pool = PoolMode::sum;
    const ModelParams p = init_params(c, 9);
    TempDir dir;
    write_checkpoint(dir / "m.ckpt", c, p);
    const auto [c2, p2] = read_checkpoint(dir / "m.ckpt");
    CHECK(c2 == c);
    CHECK(p2 == p);
    KeyedRng rng{6};
    const InducedSubgraph s = random_sub(rng, 4, 3);
    CHECK(predict(s, p2, c2) == predict(s, p, c));
  }
  TempDir dir;
  dir.write("bad.ckpt", "not a checkpoint\n");
  CHECK_THROWS(read_checkpoint(dir / "bad.ckpt"));
}

TEST_CASE("variant and pool names") {
  CHECK(parse_variant(to_string(ModelVariant::base)) == ModelVariant::base);
  CHECK(parse_pool_mode(to_string(PoolMode::max)) == PoolMode::max);
  CHECK_THROWS_AS(parse_variant("gcn"), std::invalid_argument);
  CHECK_THROWS_AS(parse_pool_mode("median"), std::invalid_argument);
}
