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

#include "subgnd/config.hpp"

#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "subgnd/error.hpp"
#include "text_io.hpp"

namespace subgnd {

namespace {

template <typename T>
T parse_scalar(const std::string& key, const std::string& value) {
  if constexpr (std::is_same_v<T, std::string>) {
    return value;
  } else {
    const auto v = detail::parse_number<T>(value);
    if (!v) throw ConfigError("invalid value '" + value + "' for config key '" + key + "'");
    return *v;
  }
}

template <typename T>
std::string show(const T& v) {
  if constexpr (std::is_same_v<T, std::string>) {
    return v;
  } else if constexpr (std::is_floating_point_v<T>) {
    return detail::format_real(v);
  } else {
    return std::to_string(v);
  }
}

template <typename T>
std::vector<T> parse_list(const std::string& key, const std::string& value) {
  std::vector<T> out;
  for (auto field : detail::split(value, ',')) out.push_back(parse_scalar<T>(key, std::string(field)));
  return out;
}

template <typename C>
std::string show_list(const C& values) {
  std::string out;
  for (const auto& v : values) {
    if (!out.empty()) out += ',';
    out += show(v);
  }
  return out;
}

struct Field {
  std::function<void(RunConfig&, const std::string& key, const std::string& value)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <typename T, typename Access>
Field scalar(Access access) {
  return {[access](RunConfig& c, const std::string& k, const std::string& v) { access(c) = parse_scalar<T>(k, v); },
          [access](const RunConfig& c) { return show(access(const_cast<RunConfig&>(c))); }};
}

template <typename T, typename Access>
Field list(Access access) {
  return {[access](RunConfig& c, const std::string& k, const std::string& v) {
            auto parsed = parse_list<T>(k, v);
            auto& dst = access(c);
            if constexpr (requires { dst.size(); dst.resize(0); }) {
              if (parsed.empty()) throw ConfigError("empty list for config key '" + k + "'");
              dst.assign(parsed.begin(), parsed.end());
            } else {
              if (parsed.size() != dst.size())
                throw ConfigError("config key '" + k + "' expects " + std::to_string(dst.size()) + " values");
              std::copy(parsed.begin(), parsed.end(), dst.begin());
            }
          },
          [access](const RunConfig& c) { return show_list(access(const_cast<RunConfig&>(c))); }};
}

template <typename E>
Field enumerated(std::function<E&(RunConfig&)> access, std::function<E(const std::string&)> parse,
                 std::function<std::string(E)> print) {
  return {[=](RunConfig& c, const std::string& k, const std::string& v) {
            try {
              access(c) = parse(v);
            } catch (const std::invalid_argument& e) {
              throw ConfigError(std::string(e.what()) + " for config key '" + k + "'");
            }
          },
          [=](const RunConfig& c) { return print(access(const_cast<RunConfig&>(c))); }};
}

WalkDirection parse_direction(const std::string& s) {
  if (s == "out") return WalkDirection::out;
  if (s == "in") return WalkDirection::in;
  if (s == "both") return WalkDirection::both;
  throw std::invalid_argument("unknown walk direction '" + s + "'");
}

std::string show_direction(WalkDirection d) {
  switch (d) {
    case WalkDirection::out: return "out";
    case WalkDirection::in: return "in";
    case WalkDirection::both: return "both";
  }
  return "out";
}

SyntheticKind parse_kind(const std::string& s) {
  if (s == "planted_partition") return SyntheticKind::planted_partition;
  if (s == "heterophilic_bipartite") return SyntheticKind::heterophilic_bipartite;
  if (s == "conflict_fixture") return SyntheticKind::conflict_fixture;
  throw std::invalid_argument("unknown synthetic kind '" + s + "'");
}

std::string show_kind(SyntheticKind k) {
  switch (k) {
    case SyntheticKind::planted_partition: return "planted_partition";
    case SyntheticKind::heterophilic_bipartite: return "heterophilic_bipartite";
    case SyntheticKind::conflict_fixture: return "conflict_fixture";
  }
  return "planted_partition";
}

Field pool_list() {
  return {[](RunConfig& c, const std::string& k, const std::string& v) {
            std::vector<ad::PoolMode> modes;
            for (auto f : detail::split(v, ',')) {
              try {
                modes.push_back(parse_pool_mode(std::string(f)));
              } catch (const std::invalid_argument& e) {
                throw ConfigError(std::string(e.what()) + " for config key '" + k + "'");
              }
            }
            c.search.alter_pool = modes;
          },
          [](const RunConfig& c) {
            std::string out;
            for (auto m : c.search.alter_pool) out += (out.empty() ? "" : ",") + to_string(m);
            return out;
          }};
}

#define ACCESS(expr) [](RunConfig& c) -> auto& { return expr; }

// Ordered: manifests list keys in this order.
const std::vector<std::pair<std::string, Field>>& registry() {
  static const std::vector<std::pair<std::string, Field>> fields = {
      {"data.edges", scalar<std::string>(ACCESS(c.data.edges))},
      {"data.features", scalar<std::string>(ACCESS(c.data.features))},
      {"data.labels", scalar<std::string>(ACCESS(c.data.labels))},
      {"data.num_classes", scalar<std::size_t>(ACCESS(c.data.num_classes))},
      {"data.split", list<double>(ACCESS(c.data.split))},
      {"data.split_seed", scalar<std::uint64_t>(ACCESS(c.data.split_seed))},
      {"walk.restart_probability", scalar<double>(ACCESS(c.walk.restart_probability))},
      {"walk.rw_hops", scalar<std::size_t>(ACCESS(c.walk.rw_hops))},
      {"walk.direction", enumerated<WalkDirection>(ACCESS(c.walk.direction), parse_direction, show_direction)},
      {"walk.max_steps", scalar<std::size_t>(ACCESS(c.walk.max_steps))},
      {"walk.seed", scalar<std::uint64_t>(ACCESS(c.walk.seed))},
      {"model.variant", enumerated<ModelVariant>(ACCESS(c.model.variant), parse_variant,
                                                 [](ModelVariant v) { return to_string(v); })},
      {"model.hidden_size", scalar<std::size_t>(ACCESS(c.model.hidden_size))},
      {"model.num_layers", scalar<std::size_t>(ACCESS(c.model.num_layers))},
      {"model.eps", scalar<double>(ACCESS(c.model.eps))},
      {"model.alter_pool", enumerated<ad::PoolMode>(ACCESS(c.model.alter_pool), parse_pool_mode,
                                                    [](ad::PoolMode m) { return to_string(m); })},
      {"model.dropout", scalar<double>(ACCESS(c.model.dropout))},
      {"model.mlp_depth", scalar<std::size_t>(ACCESS(c.model.mlp_depth))},
      {"train.lr", scalar<double>(ACCESS(c.train.lr))},
      {"train.alpha_lr", scalar<double>(ACCESS(c.train.alpha_lr))},
      {"train.weight_decay", scalar<double>(ACCESS(c.train.weight_decay))},
      {"train.max_epochs", scalar<std::size_t>(ACCESS(c.train.max_epochs))},
      {"train.patience", scalar<std::size_t>(ACCESS(c.train.patience))},
      {"train.batch_size", scalar<std::size_t>(ACCESS(c.train.batch_size))},
      {"train.beta1", scalar<double>(ACCESS(c.train.beta1))},
      {"train.beta2", scalar<double>(ACCESS(c.train.beta2))},
      {"train.adam_eps", scalar<double>(ACCESS(c.train.adam_eps))},
      {"train.seed", scalar<std::uint64_t>(ACCESS(c.train.seed))},
      {"train.num_runs", scalar<std::size_t>(ACCESS(c.train.num_runs))},
      {"search.lr", list<double>(ACCESS(c.search.lr))},
      {"search.weight_decay", list<double>(ACCESS(c.search.weight_decay))},
      {"search.dropout", list<double>(ACCESS(c.search.dropout))},
      {"search.hidden_size", list<std::size_t>(ACCESS(c.search.hidden_size))},
      {"search.num_layers", list<std::size_t>(ACCESS(c.search.num_layers))},
      {"search.eps", list<double>(ACCESS(c.search.eps))},
      {"search.rw_hops", list<std::size_t>(ACCESS(c.search.rw_hops))},
      {"search.alter_pool", pool_list()},
      {"search.budget", scalar<std::size_t>(ACCESS(c.search.budget))},
      {"search.max_epochs", scalar<std::size_t>(ACCESS(c.search.max_epochs))},
      {"search.seed", scalar<std::uint64_t>(ACCESS(c.search_seed))},
      {"synth.kind", enumerated<SyntheticKind>(ACCESS(c.synth.kind), parse_kind, show_kind)},
      {"synth.num_nodes", scalar<std::size_t>(ACCESS(c.synth.num_nodes))},
      {"synth.num_classes", scalar<std::size_t>(ACCESS(c.synth.num_classes))},
      {"synth.intra_prob", scalar<double>(ACCESS(c.synth.intra_prob))},
      {"synth.inter_prob", scalar<double>(ACCESS(c.synth.inter_prob))},
      {"synth.feature_dim", scalar<std::size_t>(ACCESS(c.synth.feature_dim))},
      {"synth.noise_std", scalar<double>(ACCESS(c.synth.noise_std))},
      {"synth.seed", scalar<std::uint64_t>(ACCESS(c.synth.seed))},
      {"synth.pairs", scalar<std::size_t>(ACCESS(c.synth_pairs))},
      {"gradcheck.instances", scalar<std::size_t>(ACCESS(c.gradcheck.instances))},
      {"gradcheck.coords", scalar<std::size_t>(ACCESS(c.gradcheck.coords))},
      {"gradcheck.subgraph_nodes", scalar<std::size_t>(ACCESS(c.gradcheck.subgraph_nodes))},
      {"gradcheck.eps", scalar<double>(ACCESS(c.gradcheck.eps))},
      {"gradcheck.tolerance", scalar<double>(ACCESS(c.gradcheck.tolerance))},
      {"gradcheck.seed", scalar<std::uint64_t>(ACCESS(c.gradcheck.seed))},
      {"run.out", scalar<std::string>(ACCESS(c.run.out))},
      {"run.workers", scalar<int>(ACCESS(c.run.workers))},
      {"run.checkpoint", scalar<std::string>(ACCESS(c.run.checkpoint))},
      {"run.eval_split", scalar<std::string>(ACCESS(c.run.eval_split))},
  };
  return fields;
}

#undef ACCESS

const Field& find(const std::string& key) {
  for (const auto& [k, f] : registry())
    if (k == key) return f;
  throw ConfigError("unknown config key '" + key + "'");
}

}  // namespace

void RunConfig::set(const std::string& key, const std::string& value) { find(key).set(*this, key, value); }

std::string RunConfig::get(const std::string& key) const { return find(key).get(*this); }

std::vector<std::string> RunConfig::keys() {
  std::vector<std::string> out;
  for (const auto& [k, f] : registry()) out.push_back(k);
  return out;
}

void RunConfig::load_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::size_t line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    const auto hash = line.find('#');
    const auto body = detail::trim(std::string_view(line).substr(0, hash));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string_view::npos)
      throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": expected 'section.key = value'");
    set(std::string(detail::trim(body.substr(0, eq))), std::string(detail::trim(body.substr(eq + 1))));
  }
}

std::string RunConfig::manifest() const {
  std::ostringstream out;
  for (const auto& [k, f] : registry()) out << k << " = " << f.get(*this) << '\n';
  return out.str();
}

}  // namespace subgnd
