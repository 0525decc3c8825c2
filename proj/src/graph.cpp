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

#include "subgnd/graph.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

#include "subgnd/error.hpp"
#include "subgnd/rng.hpp"
#include "text_io.hpp"

namespace subgnd {

Csr Csr::build(std::size_t num_nodes, std::span<const Edge> edges, bool transpose) {
  Csr csr;
  csr.offsets.assign(num_nodes + 1, 0);
  for (const auto& [s, d] : edges) ++csr.offsets[(transpose ? d : s) + 1];
  std::partial_sum(csr.offsets.begin(), csr.offsets.end(), csr.offsets.begin());
  csr.targets.resize(edges.size());
  std::vector<std::size_t> cursor(csr.offsets.begin(), csr.offsets.end() - 1);
  for (const auto& [s, d] : edges) {
    const NodeId row = transpose ? d : s;
    csr.targets[cursor[row]++] = transpose ? s : d;
  }
  for (std::size_t u = 0; u < num_nodes; ++u) {
    std::sort(csr.targets.begin() + static_cast<std::ptrdiff_t>(csr.offsets[u]),
              csr.targets.begin() + static_cast<std::ptrdiff_t>(csr.offsets[u + 1]));
  }
  return csr;
}

GraphStore::GraphStore(std::size_t num_nodes, std::vector<Edge> edges, Tensor features, std::vector<int> labels,
                       std::size_t num_classes)
    : num_nodes_(num_nodes),
      edges_(std::move(edges)),
      features_(std::move(features)),
      labels_(std::move(labels)),
      num_classes_(num_classes) {
  if (features_.rank() != 2 || features_.rows() != num_nodes_)
    throw std::invalid_argument("GraphStore: feature matrix must have num_nodes rows");
  if (labels_.size() != num_nodes_) throw std::invalid_argument("GraphStore: labels length != num_nodes");
  for (int y : labels_) {
    if (y < 0 || static_cast<std::size_t>(y) >= num_classes_)
      throw std::invalid_argument("GraphStore: label " + std::to_string(y) + " outside [0, " +
                                  std::to_string(num_classes_) + ")");
  }
  for (const auto& [s, d] : edges_) {
    if (s >= num_nodes_ || d >= num_nodes_)
      throw std::invalid_argument("GraphStore: unknown node id in edge (" + std::to_string(s) + ", " +
                                  std::to_string(d) + ")");
  }
  std::sort(edges_.begin(), edges_.end());
  edges_.erase(std::unique(edges_.begin(), edges_.end()), edges_.end());
  out_ = Csr::build(num_nodes_, edges_, false);
  in_ = Csr::build(num_nodes_, edges_, true);
}

namespace {

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
  }
  while (!lines.empty() && detail::trim(lines.back()).empty()) lines.pop_back();
  return lines;
}

}  // namespace

GraphStore ingest_graph(const std::filesystem::path& edge_path, const std::filesystem::path& feature_path,
                        const std::filesystem::path& label_path, std::optional<std::size_t> num_classes) {
  const std::string fname = feature_path.string();
  const auto feature_lines = read_lines(feature_path);
  const std::size_t n = feature_lines.size();
  std::size_t width = 0;
  std::vector<double> values;
  for (std::size_t i = 0; i < n; ++i) {
    const auto fields = detail::split(feature_lines[i], ',');
    if (i == 0) width = fields.size();
    if (fields.size() != width)
      throw ParseError(fname, i + 1,
                       "feature row has " + std::to_string(fields.size()) + " values, expected " +
                           std::to_string(width));
    for (auto f : fields) {
      const auto v = detail::parse_number<double>(f);
      if (!v) throw ParseError(fname, i + 1, "malformed real '" + std::string(f) + "'");
      values.push_back(*v);
    }
  }
  if (n == 0) throw ParseError(fname, 1, "empty feature file");

  const std::string lname = label_path.string();
  const auto label_lines = read_lines(label_path);
  if (label_lines.size() != n)
    throw ParseError(lname, std::min(label_lines.size(), n) + 1,
                     "expected " + std::to_string(n) + " labels, found " + std::to_string(label_lines.size()));
  std::vector<int> labels(n);
  int max_label = -1;
  for (std::size_t i = 0; i < n; ++i) {
    const auto v = detail::parse_number<int>(detail::trim(label_lines[i]));
    if (!v || *v < 0) throw ParseError(lname, i + 1, "malformed label '" + label_lines[i] + "'");
    if (num_classes && static_cast<std::size_t>(*v) >= *num_classes)
      throw ParseError(lname, i + 1,
                       "label " + std::to_string(*v) + " out of declared class range [0, " +
                           std::to_string(*num_classes) + ")");
    labels[i] = *v;
    max_label = std::max(max_label, *v);
  }

  const std::string ename = edge_path.string();
  const auto edge_lines = read_lines(edge_path);
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < edge_lines.size(); ++i) {
    const auto line = detail::trim(edge_lines[i]);
    if (line.empty() || line.front() == '#') continue;
    const auto fields = detail::split_ws(line);
    if (fields.size() != 2) throw ParseError(ename, i + 1, "expected 'src<TAB>dst'");
    const auto s = detail::parse_number<std::uint64_t>(fields[0]);
    const auto d = detail::parse_number<std::uint64_t>(fields[1]);
    if (!s || !d) throw ParseError(ename, i + 1, "malformed node id");
    if (*s >= n || *d >= n)
      throw ParseError(ename, i + 1, "unknown node id " + std::to_string(*s >= n ? *s : *d));
    edges.emplace_back(static_cast<NodeId>(*s), static_cast<NodeId>(*d));
  }

  const std::size_t classes = num_classes.value_or(static_cast<std::size_t>(max_label + 1));
  return GraphStore(n, std::move(edges), Tensor({n, width}, std::move(values)), std::move(labels), classes);
}

void write_graph(const GraphStore& graph, const std::filesystem::path& edge_path,
                 const std::filesystem::path& feature_path, const std::filesystem::path& label_path) {
  std::ofstream edges(edge_path);
  std::ofstream feats(feature_path);
  std::ofstream labels(label_path);
  if (!edges || !feats || !labels) throw std::runtime_error("cannot write dataset files");
  for (const auto& [s, d] : graph.edges()) edges << s << '\t' << d << '\n';
  const Tensor& x = graph.features();
  for (std::size_t i = 0; i < graph.num_nodes(); ++i) {
    std::string line;
    for (std::size_t j = 0; j < x.cols(); ++j) {
      if (j) line += ',';
      line += detail::format_real(x.at(i, j));
    }
    feats << line << '\n';
    labels << graph.label(static_cast<NodeId>(i)) << '\n';
  }
}

SplitAssignment make_split(std::size_t num_nodes, std::array<double, 3> fractions, std::uint64_t seed) {
  for (double f : fractions) {
    if (!(f >= 0.0)) throw std::invalid_argument("make_split: fractions must be nonnegative");
  }
  if (std::abs(fractions[0] + fractions[1] + fractions[2] - 1.0) > 1e-9)
    throw std::invalid_argument("make_split: fractions must sum to 1");

  const auto share = [num_nodes](double f) {
    return static_cast<std::size_t>(std::floor(static_cast<double>(num_nodes) * f + 1e-9));
  };
  const std::size_t n_val = share(fractions[1]);
  const std::size_t n_test = share(fractions[2]);
  const std::size_t n_train = num_nodes - n_val - n_test;

  std::vector<NodeId> perm(num_nodes);
  std::iota(perm.begin(), perm.end(), NodeId{0});
  KeyedRng rng{seed, 0x5b117ULL};
  for (std::size_t i = num_nodes; i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);

  SplitAssignment split;
  const auto first = perm.begin();
  split.train.assign(first, first + static_cast<std::ptrdiff_t>(n_train));
  split.val.assign(first + static_cast<std::ptrdiff_t>(n_train),
                   first + static_cast<std::ptrdiff_t>(n_train + n_val));
  split.test.assign(first + static_cast<std::ptrdiff_t>(n_train + n_val), perm.end());
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.val.begin(), split.val.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

namespace {

void validate(const SyntheticSpec& spec) {
  const auto prob_ok = [](double p) { return p >= 0.0 && p <= 1.0; };
  if (!prob_ok(spec.intra_prob) || !prob_ok(spec.inter_prob))
    throw std::invalid_argument("synth: probabilities must lie in [0, 1]");
  if (spec.feature_dim < 1) throw std::invalid_argument("synth: feature_dim must be >= 1");
  if (spec.num_classes < 2) throw std::invalid_argument("synth: num_classes must be >= 2");
  if (!(spec.noise_std >= 0.0)) throw std::invalid_argument("synth: noise_std must be >= 0");
}

}  // namespace

GraphStore synth_graph(const SyntheticSpec& spec) {
  validate(spec);
  if (spec.kind == SyntheticKind::conflict_fixture)
    return synth_conflict_fixture(std::max<std::size_t>(1, spec.num_nodes / 4), spec.feature_dim, spec.seed);

  const std::size_t n = spec.num_nodes;
  const std::size_t c = spec.num_classes;
  const std::size_t d = spec.feature_dim;
  std::mt19937_64 gen(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = static_cast<int>(i % c);

  std::vector<Edge> edges;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double p = labels[i] == labels[j] ? spec.intra_prob : spec.inter_prob;
      if (unit(gen) < p) {
        edges.emplace_back(static_cast<NodeId>(i), static_cast<NodeId>(j));
        edges.emplace_back(static_cast<NodeId>(j), static_cast<NodeId>(i));
      }
    }
  }

  Tensor means({c, d});
  for (double& m : means.data) m = normal(gen);
  Tensor x({n, d});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < d; ++k) {
      const double noise = spec.noise_std > 0.0 ? spec.noise_std * normal(gen) : 0.0;
      x.at(i, k) = means.at(static_cast<std::size_t>(labels[i]), k) + noise;
    }
  }
  return GraphStore(n, std::move(edges), std::move(x), std::move(labels), c);
}

GraphStore synth_conflict_fixture(std::size_t num_pairs, std::size_t feature_dim, std::uint64_t seed) {
  if (num_pairs < 1) throw std::invalid_argument("conflict fixture: num_pairs must be >= 1");
  if (feature_dim < 1) throw std::invalid_argument("conflict fixture: feature_dim must be >= 1");
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  // Type prototypes; each pair jitters them so pairs are not copies of each other.
  std::vector<double> proto_a(feature_dim), proto_b(feature_dim);
  for (auto& v : proto_a) v = normal(gen);
  for (auto& v : proto_b) v = normal(gen);

  const std::size_t n = 4 * num_pairs;
  Tensor x({n, feature_dim});
  std::vector<int> labels(n);
  std::vector<Edge> edges;
  std::vector<double> a(feature_dim), b(feature_dim);
  for (std::size_t p = 0; p < num_pairs; ++p) {
    bool distinct = false;
    while (!distinct) {
      for (std::size_t k = 0; k < feature_dim; ++k) a[k] = proto_a[k] + 0.5 * normal(gen);
      for (std::size_t k = 0; k < feature_dim; ++k) b[k] = proto_b[k] + 0.5 * normal(gen);
      distinct = a != b;
    }
    const std::size_t base = 4 * p;
    // A: hub a, leaf b.  B: hub b, leaf a.
    const std::array<const std::vector<double>*, 4> rows{&a, &b, &b, &a};
    const std::array<int, 4> types{0, 1, 1, 0};
    for (std::size_t r = 0; r < 4; ++r) {
      std::copy(rows[r]->begin(), rows[r]->end(), x.row(base + r).begin());
      labels[base + r] = types[r];
    }
    for (std::size_t hub : {base, base + 2}) {
      edges.emplace_back(static_cast<NodeId>(hub), static_cast<NodeId>(hub + 1));
      edges.emplace_back(static_cast<NodeId>(hub + 1), static_cast<NodeId>(hub));
    }
  }
  return GraphStore(n, std::move(edges), std::move(x), std::move(labels), 2);
}

}  // namespace subgnd
