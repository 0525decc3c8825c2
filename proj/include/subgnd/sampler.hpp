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
#include <vector>

#include "subgnd/graph.hpp"
#include "subgnd/rng.hpp"
#include "subgnd/tensor.hpp"

namespace subgnd {

enum class WalkDirection { out, in, both };

struct WalkConfig {
  double restart_probability = 0.8;
  std::size_t rw_hops = 32;  // max distinct nodes per seed, seed included
  WalkDirection direction = WalkDirection::out;
  std::size_t max_steps = 0;  // 0 means 16 * rw_hops
  std::uint64_t seed = 0;

  std::size_t step_cap() const { return max_steps ? max_steps : 16 * rw_hops; }
  /// Throws std::invalid_argument when a field is out of range.
  void validate() const;
};

/// Anonymized sample for one ego. Local index = first-visit order; the ego is 0.
struct InducedSubgraph {
  std::vector<NodeId> orig_ids;
  std::vector<Edge> local_edges;  // symmetric, sorted, unique
  Tensor features;                // |orig_ids| x d
  int label = 0;

  static constexpr std::size_t ego_local = 0;
  std::size_t size() const { return orig_ids.size(); }
  bool operator==(const InducedSubgraph&) const = default;
};

/// Both samples of every node, indexed by global node id.
using SubgraphCorpus = std::vector<std::array<InducedSubgraph, 2>>;

/// Random walk with restart from seed_node. Returns distinct nodes in first-visit
/// order, seed first. Stops at rw_hops distinct nodes or step_cap() steps. A walker
/// on a node with no eligible neighbor restarts; a seed with none returns {seed}.
std::vector<NodeId> rwr_walk(const GraphStore& graph, NodeId seed_node, const WalkConfig& config, KeyedRng& rng);

/// Edges of the global graph with both endpoints in nodes, ordered by the
/// position of the source in nodes, then by target id.
std::vector<Edge> induce_edges(const GraphStore& graph, const std::vector<NodeId>& nodes);

/// Adds the reverse of every edge; output is sorted and unique.
std::vector<Edge> bidirectionalize(const std::vector<Edge>& edges);

/// Relabels nodes by position, copies their feature rows and the ego label.
/// Throws std::invalid_argument if an edge endpoint is not in nodes.
InducedSubgraph anonymize(const GraphStore& graph, const std::vector<NodeId>& nodes, const std::vector<Edge>& edges);

/// walk -> induce -> bidirectionalize -> anonymize. A singleton or an ego without
/// incident local edges gets the self-loop (0, 0).
InducedSubgraph sample_subgraph(const GraphStore& graph, NodeId v, const WalkConfig& config, KeyedRng& rng);

/// Stream for sample k of node v; the corpus depends only on (graph, config).
inline KeyedRng sample_stream(const WalkConfig& config, NodeId v, std::uint64_t k) {
  return KeyedRng{config.seed, v, k};
}

/// Serial reference: two samples per node.
SubgraphCorpus sample_dataset_serial(const GraphStore& graph, const WalkConfig& config);

/// OpenMP kernel over seed nodes. Produces exactly the serial corpus.
SubgraphCorpus sample_dataset_parallel(const GraphStore& graph, const WalkConfig& config, int workers);

/// Dispatches to the serial reference when workers <= 1.
SubgraphCorpus sample_dataset(const GraphStore& graph, const WalkConfig& config, int workers = 1);

/// Corpus cache format: "num_subgraphs d", then per subgraph "ego_orig_id label n m",
/// n lines "orig_id f_1 .. f_d", m lines "src dst". Round-trips exactly.
void write_corpus(const SubgraphCorpus& corpus, std::size_t feature_dim, const std::filesystem::path& path);
SubgraphCorpus read_corpus(const std::filesystem::path& path);

/// Checks the InducedSubgraph invariants; returns an empty string when they hold.
std::string check_invariants(const InducedSubgraph& sub, std::size_t rw_hops);

}  // namespace subgnd
