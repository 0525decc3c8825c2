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

#include <filesystem>
#include <string>
#include <vector>

#include "subgnd/graph.hpp"
#include "subgnd/model.hpp"
#include "subgnd/sampler.hpp"
#include "subgnd/trainer.hpp"

namespace subgnd {

struct DataConfig {
  std::string edges;
  std::string features;
  std::string labels;
  std::size_t num_classes = 0;  // 0 infers max(label) + 1
  std::array<double, 3> split{0.48, 0.32, 0.20};
  std::uint64_t split_seed = 0;
};

struct GradCheckConfig {
  std::size_t instances = 5;
  std::size_t coords = 50;
  std::size_t subgraph_nodes = 5;
  double eps = 1e-4;
  double tolerance = 1e-3;
  std::uint64_t seed = 0;
};

struct RunSection {
  std::string out = "out";
  int workers = 1;
  std::string checkpoint;  // eval input
  std::string eval_split = "test";
};

/// Every setting of a run. Dataset paths are the only fields without a default.
struct RunConfig {
  DataConfig data;
  WalkConfig walk;
  ModelConfig model;
  TrainConfig train;
  SearchSpace search;
  std::uint64_t search_seed = 0;
  SyntheticSpec synth;
  std::size_t synth_pairs = 0;  // conflict fixture pairs; 0 derives from synth.num_nodes
  GradCheckConfig gradcheck;
  RunSection run;

  /// Applies one "section.key" assignment. Throws ConfigError naming the key when
  /// it is unknown or its value does not parse.
  void set(const std::string& key, const std::string& value);

  /// Applies every "section.key = value" line of a file ('#' starts a comment).
  void load_file(const std::filesystem::path& path);

  /// All keys in canonical order.
  static std::vector<std::string> keys();
  std::string get(const std::string& key) const;

  /// Fully resolved config text; loading it reproduces this config exactly.
  std::string manifest() const;
};

}  // namespace subgnd
