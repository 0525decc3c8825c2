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
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "subgnd/tensor.hpp"

namespace subgnd {

using NodeId = std::uint32_t;
using Edge = std::pair<NodeId, NodeId>;

/// Compressed sparse row adjacency. Targets of each row are sorted ascending.
struct Csr {
  std::vector<std::size_t> offsets;  // num_nodes + 1
  std::vector<NodeId> targets;

  std::span<const NodeId> neighbors(NodeId u) const {
    return {targets.data() + offsets[u], offsets[u + 1] - offsets[u]};
  }
  std::size_t degree(NodeId u) const { return offsets[u + 1] - offsets[u]; }

  /// Builds from (row, col) pairs. Pairs must be sorted and unique per row.
  static Csr build(std::size_t num_nodes, std::span<const Edge> edges, bool transpose);

  bool operator==(const Csr&) const = default;
};

/// Immutable directed graph with node features and labels. Safe for concurrent reads.
class GraphStore {
 public:
  GraphStore() = default;

  /// Validates and indexes the graph. Duplicate edges are dropped; self-loops kept.
  /// Throws std::invalid_argument on an unknown node id, a features/labels row-count
  /// mismatch, or a label outside [0, num_classes).
  GraphStore(std::size_t num_nodes, std::vector<Edge> edges, Tensor features, std::vector<int> labels,
             std::size_t num_classes);

  std::size_t num_nodes() const { return num_nodes_; }
  std::size_t num_edges() const { return edges_.size(); }
  std::size_t feature_dim() const { return features_.cols(); }
  std::size_t num_classes() const { return num_classes_; }

  /// Sorted, deduplicated directed edges.
  const std::vector<Edge>& edges() const { return edges_; }
  const Csr& out_csr() const { return out_; }
  const Csr& in_csr() const { return in_; }
  const Tensor& features() const { return features_; }
  const std::vector<int>& labels() const { return labels_; }
  int label(NodeId v) const { return labels_[v]; }

  bool operator==(const GraphStore&) const = default;

 private:
  std::size_t num_nodes_ = 0;
  std::vector<Edge> edges_;
  Csr out_;
  Csr in_;
  Tensor features_;
  std::vector<int> labels_;
  std::size_t num_classes_ = 0;
};

/// Reads the three-file dataset format: tab-separated edge list ('#' comments),
/// headerless feature CSV (row order defines node ids) and one label per line.
/// When num_classes is not given it is max(label) + 1.
/// Throws ParseError (with line number) on malformed lines or unknown node ids.
GraphStore ingest_graph(const std::filesystem::path& edge_path, const std::filesystem::path& feature_path,
                        const std::filesystem::path& label_path,
                        std::optional<std::size_t> num_classes = std::nullopt);

/// Writes the graph back in the format ingest_graph reads. Reals use shortest
/// round-trip formatting, so ingest(write(g)) == g.
void write_graph(const GraphStore& graph, const std::filesystem::path& edge_path,
                 const std::filesystem::path& feature_path, const std::filesystem::path& label_path);

struct SplitAssignment {
  std::vector<NodeId> train;
  std::vector<NodeId> val;
  std::vector<NodeId> test;

  bool operator==(const SplitAssignment&) const = default;
};

/// Deterministic random partition. val and test get floor(n * fraction);
/// the remainder goes to train. Fractions must be nonnegative and sum to 1.
SplitAssignment make_split(std::size_t num_nodes, std::array<double, 3> fractions, std::uint64_t seed);

enum class SyntheticKind { planted_partition, heterophilic_bipartite, conflict_fixture };

struct SyntheticSpec {
  SyntheticKind kind = SyntheticKind::planted_partition;
  std::size_t num_nodes = 200;
  std::size_t num_classes = 2;
  double intra_prob = 0.3;
  double inter_prob = 0.02;
  std::size_t feature_dim = 8;
  double noise_std = 1.0;
  std::uint64_t seed = 0;
};

/// Stochastic block graph: class of node i is i mod num_classes; each unordered
/// pair is linked in both directions with intra_prob (same class) or inter_prob.
/// Features are a per-class mean vector drawn from N(0, I) plus N(0, noise_std^2) noise.
/// For conflict_fixture, num_nodes / 4 pairs are generated (see synth_conflict_fixture).
GraphStore synth_graph(const SyntheticSpec& spec);

/// Label-conflict fixture. Each pair contributes two single-leaf stars
/// A = (hub a, leaf b) and B = (hub b, leaf a), linked in both directions, with
/// a != b. Nodes are listed hub first: [A.hub, A.leaf, B.hub, B.leaf].
/// A node's label is the type of its own feature vector: 0 for a, 1 for b, so the
/// pair's labels are [0, 1, 1, 0]. Every component holds the same feature multiset
/// and structure, so pooling over all nodes of a component cannot tell its two
/// egos apart, while the ego's own row can.
GraphStore synth_conflict_fixture(std::size_t num_pairs, std::size_t feature_dim, std::uint64_t seed);

}  // namespace subgnd
