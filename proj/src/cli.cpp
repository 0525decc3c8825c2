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

#include "subgnd/cli.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>

#include "subgnd/config.hpp"
#include "subgnd/error.hpp"
#include "text_io.hpp"

namespace subgnd {

namespace fs = std::filesystem;

namespace {

struct Invocation {
  std::string config_file;
  std::vector<std::string> overrides;  // "key=value"
  std::map<std::string, std::string> flags;  // key -> value from subcommand flags
};

void write_manifest(const RunConfig& cfg, const std::string& command) {
  fs::create_directories(cfg.run.out);
  std::ofstream out(fs::path(cfg.run.out) / "run.manifest");
  out << "# subgnd " << command << "\n" << cfg.manifest();
}

GraphStore load_graph(const RunConfig& cfg) {
  if (cfg.data.edges.empty() || cfg.data.features.empty() || cfg.data.labels.empty())
    throw ConfigError("data.edges, data.features and data.labels must be set (or use --data DIR)");
  std::optional<std::size_t> classes;
  if (cfg.data.num_classes) classes = cfg.data.num_classes;
  return ingest_graph(cfg.data.edges, cfg.data.features, cfg.data.labels, classes);
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

int cmd_ingest(const RunConfig& cfg, std::ostream& out) {
  const GraphStore g = load_graph(cfg);
  std::vector<std::size_t> per_class(g.num_classes(), 0);
  for (int y : g.labels()) ++per_class[static_cast<std::size_t>(y)];
  std::size_t dead_ends = 0;
  for (NodeId v = 0; v < g.num_nodes(); ++v) dead_ends += g.out_csr().degree(v) == 0;
  out << "nodes " << g.num_nodes() << " edges " << g.num_edges() << " feature_dim " << g.feature_dim()
      << " classes " << g.num_classes() << " out_dead_ends " << dead_ends << "\n";
  for (std::size_t c = 0; c < per_class.size(); ++c) out << "class " << c << ": " << per_class[c] << "\n";
  return kExitOk;
}

int cmd_synth(RunConfig cfg, std::ostream& out) {
  const GraphStore g = cfg.synth.kind == SyntheticKind::conflict_fixture && cfg.synth_pairs > 0
                           ? synth_conflict_fixture(cfg.synth_pairs, cfg.synth.feature_dim, cfg.synth.seed)
                           : synth_graph(cfg.synth);
  const fs::path dir = cfg.run.out;
  fs::create_directories(dir);
  write_graph(g, dir / "edges.tsv", dir / "features.csv", dir / "labels.txt");
  cfg.data.edges = (dir / "edges.tsv").string();
  cfg.data.features = (dir / "features.csv").string();
  cfg.data.labels = (dir / "labels.txt").string();
  write_manifest(cfg, "synth");
  out << "wrote " << g.num_nodes() << " nodes, " << g.num_edges() << " edges to " << dir.string() << "\n";
  return kExitOk;
}

int cmd_sample(const RunConfig& cfg, std::ostream& out) {
  const GraphStore g = load_graph(cfg);
  const auto corpus = sample_dataset(g, cfg.walk, cfg.run.workers);
  write_manifest(cfg, "sample");
  const fs::path dir = cfg.run.out;
  write_corpus(corpus, g.feature_dim(), dir / "corpus.txt");
  std::map<std::size_t, std::size_t> histogram;
  for (const auto& pair : corpus)
    for (const auto& sub : pair) ++histogram[sub.size()];
  std::ofstream hist(dir / "size_histogram.csv");
  hist << "size,count\n";
  out << "subgraphs " << 2 * corpus.size() << "\nsize histogram:\n";
  for (const auto& [size, count] : histogram) {
    hist << size << ',' << count << '\n';
    out << "  " << size << ": " << count << "\n";
  }
  return kExitOk;
}

SplitAssignment split_of(const RunConfig& cfg, const GraphStore& g) {
  return make_split(g.num_nodes(), cfg.data.split, cfg.data.split_seed);
}

int cmd_train(const RunConfig& cfg, std::ostream& out) {
  const GraphStore g = load_graph(cfg);
  const SplitAssignment split = split_of(cfg, g);
  write_manifest(cfg, "train");
  const fs::path dir = cfg.run.out;
  const std::size_t runs = std::max<std::size_t>(1, cfg.train.num_runs);
  std::vector<double> tests;
  for (std::size_t r = 0; r < runs; ++r) {
    WalkConfig walk = cfg.walk;
    walk.seed += r;
    TrainConfig train = cfg.train;
    train.seed += r;
    FitOptions opts;
    opts.workers = cfg.run.workers;
    const FitResult res = fit(g, split, walk, cfg.model, train, opts);
    const std::string suffix = runs == 1 ? "" : "_run" + std::to_string(r);
    write_metrics_csv(res.trace, dir / ("metrics" + suffix + ".csv"));
    write_checkpoint(dir / ("model" + suffix + ".ckpt"), res.model, res.params);
    out << "run " << r << " best_epoch " << res.best_epoch << " train_acc " << fmt(res.train_acc) << " val_acc "
        << fmt(res.val_acc) << " test_acc " << fmt(res.test_acc);
    if (!res.alphas.empty()) {
      out << " alpha";
      for (double a : res.alphas) out << ' ' << fmt(a);
    }
    out << "\n";
    tests.push_back(res.test_acc);
  }
  if (runs > 1) {
    double mean = 0.0, ss = 0.0;
    for (double t : tests) mean += t / static_cast<double>(runs);
    for (double t : tests) ss += (t - mean) * (t - mean);
    out << "test_acc mean " << fmt(mean) << " std " << fmt(std::sqrt(ss / static_cast<double>(runs))) << "\n";
  }
  return kExitOk;
}

int cmd_eval(const RunConfig& cfg, std::ostream& out) {
  if (cfg.run.checkpoint.empty()) throw ConfigError("run.checkpoint must be set (or use --checkpoint FILE)");
  const GraphStore g = load_graph(cfg);
  const auto [model, params] = read_checkpoint(cfg.run.checkpoint);
  const SplitAssignment split = split_of(cfg, g);
  std::vector<NodeId> nodes;
  if (cfg.run.eval_split == "train") nodes = split.train;
  else if (cfg.run.eval_split == "val") nodes = split.val;
  else if (cfg.run.eval_split == "test") nodes = split.test;
  else if (cfg.run.eval_split == "all") {
    nodes.resize(g.num_nodes());
    std::iota(nodes.begin(), nodes.end(), NodeId{0});
  } else {
    throw ConfigError("invalid value '" + cfg.run.eval_split + "' for config key 'run.eval_split'");
  }
  write_manifest(cfg, "eval");
  const auto corpus = sample_dataset(g, cfg.walk, cfg.run.workers);
  const double acc = evaluate(params, model, corpus, nodes, cfg.run.workers);
  out << cfg.run.eval_split << "_acc " << fmt(acc) << "\n";
  return kExitOk;
}

int cmd_search(const RunConfig& cfg, std::ostream& out) {
  const GraphStore g = load_graph(cfg);
  const SplitAssignment split = split_of(cfg, g);
  write_manifest(cfg, "search");
  const SearchResult res = random_search(g, split, cfg.walk, cfg.model, cfg.train, cfg.search, cfg.search_seed,
                                         cfg.run.workers);
  write_trials_csv(res.trials, fs::path(cfg.run.out) / "trials.csv");
  const Trial& best = res.trials[res.best];
  out << "best trial " << best.index << " val_acc " << fmt(best.val_acc) << " test_acc " << fmt(best.test_acc)
      << " lr " << best.lr << " weight_decay " << best.weight_decay << " dropout " << fmt(best.dropout)
      << " hidden_size " << best.hidden_size << " num_layers " << best.num_layers << " eps " << best.eps
      << " rw_hops " << best.rw_hops << " alter_pool " << to_string(best.alter_pool) << "\n";
  return kExitOk;
}

int cmd_gradcheck(const RunConfig& cfg, std::ostream& out) {
  GraphStore g;
  if (!cfg.data.edges.empty()) {
    g = load_graph(cfg);
  } else {
    SyntheticSpec spec;
    spec.num_nodes = 40;
    spec.feature_dim = 6;
    spec.seed = cfg.gradcheck.seed;
    g = synth_graph(spec);
  }
  write_manifest(cfg, "gradcheck");
  ModelConfig model = cfg.model;
  model.input_dim = g.feature_dim();
  model.num_classes = g.num_classes();
  WalkConfig walk = cfg.walk;
  walk.rw_hops = cfg.gradcheck.subgraph_nodes;
  walk.max_steps = 0;
  double worst = 0.0;
  for (std::size_t i = 0; i < cfg.gradcheck.instances; ++i) {
    const auto start = std::chrono::steady_clock::now();
    KeyedRng pick{cfg.gradcheck.seed, 0xc4eu, i};
    const auto v = static_cast<NodeId>(pick.below(g.num_nodes()));
    auto rng = sample_stream(walk, v, i);
    const InducedSubgraph sub = sample_subgraph(g, v, walk, rng);
    const ModelParams params = init_params(model, cfg.gradcheck.seed + i);
    ad::GradCheckOptions opts;
    opts.eps = cfg.gradcheck.eps;
    opts.num_coords = cfg.gradcheck.coords;
    opts.seed = cfg.gradcheck.seed + i;
    const auto res = check_model_gradients(sub, params, model, opts);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    out << "instance " << i << " node " << v << " size " << sub.size() << " checked " << res.checked << " skipped "
        << res.skipped << " max_rel_err " << res.max_rel_error << " seconds " << fmt(secs) << "\n";
    worst = std::max(worst, res.max_rel_error);
  }
  const bool pass = worst < cfg.gradcheck.tolerance;
  out << "max_rel_err " << worst << (pass ? " PASS" : " FAIL") << "\n";
  return pass ? kExitOk : kExitRuntime;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"subgnd: node classification as ego-subgraph classification"};
  app.require_subcommand(1);
  Invocation inv;
  int workers = 0;
  std::string out_dir;

  const auto common = [&](CLI::App* sub) {
    sub->add_option("--config,-c", inv.config_file, "Config file of 'section.key = value' lines");
    sub->add_option("--set,-s", inv.overrides, "Override one key: section.key=value (repeatable)");
    sub->add_option("--workers,-j", workers, "Worker threads (1 is the reference)");
    sub->add_option("--out,-o", out_dir, "Output directory");
  };
  const auto flag = [&](CLI::App* sub, const std::string& name, const std::string& key, const std::string& help) {
    sub->add_option_function<std::string>(
        name, [&inv, key](const std::string& v) { inv.flags[key] = v; }, help);
  };
  std::string data_dir;
  const auto data_flag = [&](CLI::App* sub) {
    sub->add_option("--data,-d", data_dir, "Directory holding edges.tsv, features.csv, labels.txt");
  };

  auto* ingest = app.add_subcommand("ingest", "Validate a dataset and print graph statistics");
  auto* synth = app.add_subcommand("synth", "Write a synthetic dataset");
  auto* sample = app.add_subcommand("sample", "Sample the dual subgraph corpus");
  auto* train = app.add_subcommand("train", "Train, writing metrics CSV and checkpoint");
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint");
  auto* search = app.add_subcommand("search", "Random hyperparameter search");
  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of the model gradients");
  for (auto* s : {ingest, synth, sample, train, eval, search, gradcheck}) common(s);
  for (auto* s : {ingest, sample, train, eval, search, gradcheck}) data_flag(s);

  flag(synth, "--kind", "synth.kind", "planted_partition | heterophilic_bipartite | conflict_fixture");
  flag(synth, "--pairs", "synth.pairs", "Conflict fixture pairs");
  flag(synth, "--nodes", "synth.num_nodes", "Node count");
  flag(synth, "--classes", "synth.num_classes", "Class count");
  flag(synth, "--intra", "synth.intra_prob", "Same-class link probability");
  flag(synth, "--inter", "synth.inter_prob", "Cross-class link probability");
  flag(synth, "--dim", "synth.feature_dim", "Feature dimension");
  flag(synth, "--noise", "synth.noise_std", "Feature noise standard deviation");
  flag(synth, "--seed", "synth.seed", "Generator seed");
  for (auto* s : {train, search, eval}) flag(s, "--variant", "model.variant", "subgnd | base");
  for (auto* s : {train, search}) flag(s, "--runs", "train.num_runs", "Independent runs");
  flag(eval, "--checkpoint", "run.checkpoint", "Checkpoint file");
  flag(eval, "--split", "run.eval_split", "train | val | test | all");
  flag(search, "--budget", "search.budget", "Trial count");

  std::vector<std::string> argv(args.rbegin(), args.rend());
  try {
    app.parse(argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  }

  RunConfig cfg;
  std::string command;
  try {
    for (auto* s : app.get_subcommands()) command = s->get_name();
    if (!inv.config_file.empty()) cfg.load_file(inv.config_file);
    for (const auto& kv : inv.overrides) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw ConfigError("--set expects section.key=value, got '" + kv + "'");
      cfg.set(std::string(detail::trim(kv.substr(0, eq))), std::string(detail::trim(kv.substr(eq + 1))));
    }
    if (!data_dir.empty()) {
      cfg.data.edges = (fs::path(data_dir) / "edges.tsv").string();
      cfg.data.features = (fs::path(data_dir) / "features.csv").string();
      cfg.data.labels = (fs::path(data_dir) / "labels.txt").string();
    }
    for (const auto& [k, v] : inv.flags) cfg.set(k, v);
    if (command == "synth" && inv.flags.contains("synth.pairs") && !inv.flags.contains("synth.kind"))
      cfg.synth.kind = SyntheticKind::conflict_fixture;
    if (workers > 0) cfg.run.workers = workers;
    if (!out_dir.empty()) cfg.run.out = out_dir;
    cfg.walk.validate();
    cfg.train.validate();
    cfg.search.validate();
    if (cfg.run.workers < 1) throw ConfigError("run.workers must be >= 1");
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  }

  try {
    if (command == "ingest") return cmd_ingest(cfg, out);
    if (command == "synth") return cmd_synth(cfg, out);
    if (command == "sample") return cmd_sample(cfg, out);
    if (command == "train") return cmd_train(cfg, out);
    if (command == "eval") return cmd_eval(cfg, out);
    if (command == "search") return cmd_search(cfg, out);
    return cmd_gradcheck(cfg, out);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

}  // namespace subgnd
