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

#include "subgnd/sampler.hpp"

#include <algorithm>
#include <exception>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include "subgnd/error.hpp"
#include "text_io.hpp"

namespace subgnd {

void WalkConfig::validate() const {
  if (!(restart_probability >= 0.0 && restart_probability <= 1.0))
    throw std::invalid_argument("walk: restart_probability must lie in [0, 1]");
  if (rw_hops < 1) throw std::invalid_argument("walk: rw_hops must be >= 1");
  if (step_cap() < rw_hops) throw std::invalid_argument("walk: max_steps must be >= rw_hops");
}

namespace {

// Neighbors of u in the walk direction. For `both`, out-neighbors precede in-neighbors
// and a reciprocal edge is counted twice.
struct NeighborView {
  const GraphStore& g;
  WalkDirection dir;

  std::size_t degree(NodeId u) const {
    switch (dir) {
      case WalkDirection::out: return g.out_csr().degree(u);
      case WalkDirection::in: return g.in_csr().degree(u);
      case WalkDirection::both: return g.out_csr().degree(u) + g.in_csr().degree(u);
    }
    return 0;
  }
  NodeId pick(NodeId u, std::size_t i) const {
    switch (dir) {
      case WalkDirection::out: return g.out_csr().neighbors(u)[i];
      case WalkDirection::in: return g.in_csr().neighbors(u)[i];
      case WalkDirection::both: {
        const std::size_t out_deg = g.out_csr().degree(u);
        return i < out_deg ? g.out_csr().neighbors(u)[i] : g.in_csr().neighbors(u)[i - out_deg];
      }
    }
    return u;
  }
};

}  // namespace

std::vector<NodeId> rwr_walk(const GraphStore& graph, NodeId seed_node, const WalkConfig& config, KeyedRng& rng) {
  if (seed_node >= graph.num_nodes())
    throw std::out_of_range("rwr_walk: seed node " + std::to_string(seed_node) + " out of range");
  const NeighborView nbrs{graph, config.direction};
  std::vector<NodeId> visited{seed_node};
  if (nbrs.degree(seed_node) == 0) return visited;

  std::unordered_set<NodeId> seen{seed_node};
  const std::size_t cap = config.step_cap();
  NodeId cur = seed_node;
  for (std::size_t step = 0; step < cap && visited.size() < config.rw_hops; ++step) {
    if (rng.uniform() < config.restart_probability) {
      cur = seed_node;
      continue;
    }
    const std::size_t deg = nbrs.degree(cur);
    if (deg == 0) {
      cur = seed_node;
      continue;
    }
    cur = nbrs.pick(cur, rng.below(deg));
    if (seen.insert(cur).second) visited.push_back(cur);
  }
  return visited;
}

std::vector<Edge> induce_edges(const GraphStore& graph, const std::vector<NodeId>& nodes) {
  std::unordered_set<NodeId> members(nodes.begin(), nodes.end());
  std::vector<Edge> out;
  for (NodeId u : nodes) {
    for (NodeId w : graph.out_csr().neighbors(u)) {
      if (members.contains(w)) out.emplace_back(u, w);
    }
  }
  return out;
}

std::vector<Edge> bidirectionalize(const std::vector<Edge>& edges) {
  std::vector<Edge> out;
  out.reserve(2 * edges.size());
  for (const auto& [u, v] : edges) {
    out.emplace_back(u, v);
    out.emplace_back(v, u);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

InducedSubgraph anonymize(const GraphStore& graph, const std::vector<NodeId>& nodes, const std::vector<Edge>& edges) {
  std::unordered_map<NodeId, NodeId> local;
  local.reserve(nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) local.emplace(nodes[i], static_cast<NodeId>(i));

  InducedSubgraph sub;
  sub.orig_ids = nodes;
  sub.local_edges.reserve(edges.size());
  for (const auto& [u, v] : edges) {
    const auto iu = local.find(u);
    const auto iv = local.find(v);
    if (iu == local.end() || iv == local.end())
      throw std::invalid_argument("anonymize: edge endpoint not in node set");
    sub.local_edges.emplace_back(iu->second, iv->second);
  }
  std::sort(sub.local_edges.begin(), sub.local_edges.end());
  sub.local_edges.erase(std::unique(sub.local_edges.begin(), sub.local_edges.end()), sub.local_edges.end());

  const std::size_t d = graph.feature_dim();
  sub.features = Tensor({nodes.size(), d});
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const auto src = graph.features().row(nodes[i]);
    std::copy(src.begin(), src.end(), sub.features.row(i).begin());
  }
  sub.label = nodes.empty() ? 0 : graph.label(nodes.front());
  return sub;
}

InducedSubgraph sample_subgraph(const GraphStore& graph, NodeId v, const WalkConfig& config, KeyedRng& rng) {
  const auto nodes = rwr_walk(graph, v, config, rng);
  auto sub = anonymize(graph, nodes, bidirectionalize(induce_edges(graph, nodes)));
  const bool ego_linked = std::any_of(sub.local_edges.begin(), sub.local_edges.end(),
                                      [](const Edge& e) { return e.first == 0; });
  if (sub.size() == 1 || !ego_linked) {
    const Edge loop{0, 0};
    const auto pos = std::lower_bound(sub.local_edges.begin(), sub.local_edges.end(), loop);
    if (pos == sub.local_edges.end() || *pos != loop) sub.local_edges.insert(pos, loop);
  }
  return sub;
}

SubgraphCorpus sample_dataset_serial(const GraphStore& graph, const WalkConfig& config) {
  config.validate();
  SubgraphCorpus corpus(graph.num_nodes());
  for (std::size_t v = 0; v < graph.num_nodes(); ++v) {
    for (std::uint64_t k = 0; k < 2; ++k) {
      auto rng = sample_stream(config, static_cast<NodeId>(v), k);
      corpus[v][k] = sample_subgraph(graph, static_cast<NodeId>(v), config, rng);
    }
  }
  return corpus;
}

SubgraphCorpus sample_dataset_parallel(const GraphStore& graph, const WalkConfig& config, int workers) {
  config.validate();
  const auto n = static_cast<std::int64_t>(graph.num_nodes());
  SubgraphCorpus corpus(graph.num_nodes());
  std::vector<std::exception_ptr> errors(corpus.size());
#pragma omp parallel for schedule(dynamic, 16) num_threads(workers)
  for (std::int64_t v = 0; v < n; ++v) {
    try {
      for (std::uint64_t k = 0; k < 2; ++k) {
        auto rng = sample_stream(config, static_cast<NodeId>(v), k);
        corpus[static_cast<std::size_t>(v)][k] = sample_subgraph(graph, static_cast<NodeId>(v), config, rng);
      }
    } catch (...) {
      errors[static_cast<std::size_t>(v)] = std::current_exception();
    }
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  return corpus;
}

SubgraphCorpus sample_dataset(const GraphStore& graph, const WalkConfig& config, int workers) {
  return workers <= 1 ? sample_dataset_serial(graph, config) : sample_dataset_parallel(graph, config, workers);
}

void write_corpus(const SubgraphCorpus& corpus, std::size_t feature_dim, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << corpus.size() * 2 << ' ' << feature_dim << '\n';
  std::string line;
  for (const auto& pair : corpus) {
    for (const auto& sub : pair) {
      out << sub.orig_ids.front() << ' ' << sub.label << ' ' << sub.size() << ' ' << sub.local_edges.size() << '\n';
      for (std::size_t i = 0; i < sub.size(); ++i) {
        line = std::to_string(sub.orig_ids[i]);
        for (double v : sub.features.row(i)) {
          line += ' ';
          line += detail::format_real(v);
        }
        out << line << '\n';
      }
      for (const auto& [s, d] : sub.local_edges) out << s << ' ' << d << '\n';
    }
  }
}

SubgraphCorpus read_corpus(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  const std::string fname = path.string();
  std::size_t line_no = 0;
  std::string line;
  const auto next_fields = [&](std::size_t expected) {
    if (!std::getline(in, line)) throw ParseError(fname, line_no + 1, "unexpected end of file");
    ++line_no;
    auto fields = detail::split_ws(detail::trim(line));
    if (fields.size() != expected)
      throw ParseError(fname, line_no,
                       "expected " + std::to_string(expected) + " fields, found " + std::to_string(fields.size()));
    return fields;
  };
  const auto to_uint = [&](std::string_view s) {
    const auto v = detail::parse_number<std::uint64_t>(s);
    if (!v) throw ParseError(fname, line_no, "malformed integer '" + std::string(s) + "'");
    return *v;
  };

  const auto header = next_fields(2);
  const std::size_t count = to_uint(header[0]);
  const std::size_t d = to_uint(header[1]);
  if (count % 2 != 0) throw ParseError(fname, 1, "subgraph count must be even (two samples per node)");

  SubgraphCorpus corpus(count / 2);
  for (std::size_t s = 0; s < count; ++s) {
    const auto head = next_fields(4);
    InducedSubgraph sub;
    const auto ego = static_cast<NodeId>(to_uint(head[0]));
    sub.label = static_cast<int>(to_uint(head[1]));
    const std::size_t n = to_uint(head[2]);
    const std::size_t m = to_uint(head[3]);
    sub.features = Tensor({n, d});
    for (std::size_t i = 0; i < n; ++i) {
      const auto fields = next_fields(d + 1);
      sub.orig_ids.push_back(static_cast<NodeId>(to_uint(fields[0])));
      for (std::size_t k = 0; k < d; ++k) {
        const auto v = detail::parse_number<double>(fields[k + 1]);
        if (!v) throw ParseError(fname, line_no, "malformed real");
        sub.features.at(i, k) = *v;
      }
    }
    if (n == 0 || sub.orig_ids.front() != ego) throw ParseError(fname, line_no, "ego must be the first node");
    for (std::size_t e = 0; e < m; ++e) {
      const auto fields = next_fields(2);
      const auto a = to_uint(fields[0]);
      const auto b = to_uint(fields[1]);
      if (a >= n || b >= n) throw ParseError(fname, line_no, "local edge endpoint out of range");
      sub.local_edges.emplace_back(static_cast<NodeId>(a), static_cast<NodeId>(b));
    }
    corpus[s / 2][s % 2] = std::move(sub);
  }
  return corpus;
}

std::string check_invariants(const InducedSubgraph& sub, std::size_t rw_hops) {
  if (sub.orig_ids.empty()) return "empty node list";
  if (sub.size() > rw_hops) return "more than rw_hops nodes";
  std::unordered_set<NodeId> ids(sub.orig_ids.begin(), sub.orig_ids.end());
  if (ids.size() != sub.size()) return "duplicate orig_ids";
  if (sub.features.rows() != sub.size()) return "feature rows != node count";
  if (!std::is_sorted(sub.local_edges.begin(), sub.local_edges.end())) return "edges not sorted";
  bool ego_linked = false;
  for (const auto& [u, v] : sub.local_edges) {
    if (u >= sub.size() || v >= sub.size()) return "edge endpoint out of range";
    if (!std::binary_search(sub.local_edges.begin(), sub.local_edges.end(), Edge{v, u})) return "edges not symmetric";
    ego_linked = ego_linked || u == 0;
  }
  if (!ego_linked) return "ego has no incident edge";
  if (sub.size() == 1 && sub.local_edges != std::vector<Edge>{{0, 0}}) return "singleton without self-loop";
  return {};
}

}  // namespace subgnd
