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

#include "subgnd/model.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "subgnd/error.hpp"
#include "text_io.hpp"

namespace subgnd {

void ModelConfig::validate() const {
  if (input_dim < 1) throw std::invalid_argument("model: input_dim must be >= 1");
  if (hidden_size < 1) throw std::invalid_argument("model: hidden_size must be >= 1");
  if (num_layers < 1) throw std::invalid_argument("model: num_layers must be >= 1");
  if (num_classes < 2) throw std::invalid_argument("model: num_classes must be >= 2");
  if (mlp_depth < 1) throw std::invalid_argument("model: mlp_depth must be >= 1");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw std::invalid_argument("model: dropout must lie in [0, 1)");
}

std::vector<double> ModelParams::alphas() const {
  if (!layout.scaling_logits) throw std::logic_error("alphas: model has no scaling logits");
  const Tensor& logits = tensors[*layout.scaling_logits];
  const double m = *std::max_element(logits.data.begin(), logits.data.end());
  std::vector<double> a(logits.size());
  double z = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) z += (a[i] = std::exp(logits.data[i] - m));
  for (double& v : a) v /= z;
  return a;
}

ParamLayout make_layout(const ModelConfig& config) {
  ParamLayout layout;
  std::size_t next = 0;
  layout.proj_weight = next;
  layout.proj_bias = next + 1;
  next += 2;
  layout.gin_weights.resize(config.num_layers);
  for (auto& layer : layout.gin_weights) {
    for (std::size_t k = 0; k < config.mlp_depth; ++k) {
      layer.push_back(next);
      next += 2;
    }
  }
  if (config.variant == ModelVariant::subgnd) layout.scaling_logits = next++;
  layout.head_hidden_weight = next;
  layout.head_out_weight = next + 2;
  return layout;
}

ModelParams init_params(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  ModelParams params;
  params.layout = make_layout(config);
  const std::size_t h = config.hidden_size;
  const std::size_t trunk = config.trunk_width();

  const auto add_linear = [&](const std::string& name, std::size_t fan_in, std::size_t fan_out) {
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    Tensor w({fan_in, fan_out});
    KeyedRng rng{seed, params.tensors.size()};
    for (double& v : w.data) v = (2.0 * rng.uniform() - 1.0) * bound;
    params.names.push_back(name + ".weight");
    params.tensors.push_back(std::move(w));
    params.names.push_back(name + ".bias");
    params.tensors.emplace_back(std::vector<std::size_t>{fan_out});
  };

  add_linear("input_proj", config.input_dim, h);
  for (std::size_t l = 0; l < config.num_layers; ++l)
    for (std::size_t k = 0; k < config.mlp_depth; ++k)
      add_linear("gin." + std::to_string(l) + ".mlp." + std::to_string(k), trunk, trunk);
  if (config.variant == ModelVariant::subgnd) {
    params.names.emplace_back("scaling_logits");
    params.tensors.emplace_back(std::vector<std::size_t>{4});
  }
  add_linear("head.0", config.readout_width(), h);
  add_linear("head.1", h, config.num_classes);
  return params;
}

ad::Var zero_pad(ad::Var nodes, std::size_t ego_local) {
  const Tensor& hv = nodes.value();
  if (hv.rank() != 2) throw std::invalid_argument("zero_pad: expected a matrix");
  const std::size_t n = hv.rows(), h = hv.cols();
  if (ego_local >= n) throw std::out_of_range("zero_pad: ego index out of range");
  Tensor out({n, 2 * h});
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t offset = i == ego_local ? 0 : h;
    std::copy_n(hv.data.begin() + static_cast<std::ptrdiff_t>(i * h), h,
                out.data.begin() + static_cast<std::ptrdiff_t>(i * 2 * h + offset));
  }
  const ad::Var inputs[] = {nodes};
  return nodes.tape->record(std::move(out), inputs, [nodes, ego_local, n, h](ad::Tape& tape, const Tensor& g) {
    Tensor* gn = tape.grad_sink(nodes);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t offset = i == ego_local ? 0 : h;
      for (std::size_t j = 0; j < h; ++j) gn->data[i * h + j] += g.data[i * 2 * h + offset + j];
    }
  });
}

ad::Var gin_layer(ad::Var h, std::span<const Edge> local_edges, double eps, std::span<const ad::Var> mlp) {
  const std::size_t n = h.value().rows();
  if (mlp.empty() || mlp.size() % 2 != 0) throw std::invalid_argument("gin_layer: mlp needs weight/bias pairs");
  std::vector<std::size_t> src(local_edges.size()), dst(local_edges.size());
  for (std::size_t e = 0; e < local_edges.size(); ++e) {
    src[e] = local_edges[e].first;
    dst[e] = local_edges[e].second;
    if (src[e] >= n || dst[e] >= n) throw std::out_of_range("gin_layer: edge endpoint out of range");
  }
  const ad::Var neighbors = ad::segment_sum(ad::gather_rows(h, src), dst, n);
  ad::Var x = ad::add(ad::scale(h, 1.0 + eps), neighbors);
  for (std::size_t k = 0; k < mlp.size(); k += 2) {
    if (k > 0) x = ad::relu(x);
    x = ad::linear(x, mlp[k], mlp[k + 1]);
  }
  return x;
}

ad::Var layer_maxpool(std::span<const ad::Var> layers) {
  if (layers.empty()) throw std::invalid_argument("layer_maxpool: need at least one layer");
  ad::Var acc = layers[0];
  for (std::size_t l = 1; l < layers.size(); ++l) acc = ad::maximum(acc, layers[l]);
  return acc;
}

ad::Var ego_alter_concat(ad::Var h_final, std::size_t ego_local, ad::PoolMode mode) {
  const std::size_t n = h_final.value().rows();
  if (h_final.value().rank() != 2) throw std::invalid_argument("ego_alter_concat: expected a matrix");
  if (ego_local >= n) throw std::out_of_range("ego_alter_concat: ego index out of range");
  std::vector<std::size_t> alters;
  alters.reserve(n - 1);
  for (std::size_t i = 0; i < n; ++i)
    if (i != ego_local) alters.push_back(i);
  const ad::Var alter_pool = ad::pool(ad::gather_rows(h_final, alters), mode);
  return ad::concat(ad::row(h_final, ego_local), alter_pool);
}

ad::Var adaptive_scale(ad::Var h_sub, ad::Var scaling_logits) {
  if (scaling_logits.value().size() != 4 || h_sub.value().rank() != 1 || h_sub.value().size() % 4 != 0)
    throw std::invalid_argument("adaptive_scale: need a [4H] vector and 4 logits");
  return ad::block_scale(h_sub, ad::softmax(scaling_logits));
}

namespace {

std::vector<ad::Var> mlp_of(std::span<const ad::Var> params, const std::vector<std::size_t>& weights) {
  std::vector<ad::Var> mlp;
  for (std::size_t w : weights) {
    mlp.push_back(params[w]);
    mlp.push_back(params[w + 1]);
  }
  return mlp;
}

ad::Var head(std::span<const ad::Var> params, const ParamLayout& layout, ad::Var readout) {
  const std::size_t w1 = layout.head_hidden_weight, w2 = layout.head_out_weight;
  const ad::Var hidden = ad::relu(ad::linear(readout, params[w1], params[w1 + 1]));
  return ad::linear(hidden, params[w2], params[w2 + 1]);
}

}  // namespace

ad::Var forward_on_tape(ad::Tape& tape, std::span<const ad::Var> params, const ParamLayout& layout,
                        const InducedSubgraph& sub, const ModelConfig& config, Mode mode, KeyedRng& dropout_rng) {
  if (sub.features.rank() != 2 || sub.features.cols() != config.input_dim)
    throw std::invalid_argument("forward: feature width " + std::to_string(sub.features.cols()) +
                                " != input_dim " + std::to_string(config.input_dim));
  if (sub.size() == 0) throw std::invalid_argument("forward: empty subgraph");
  const ad::Var x = tape.constant(sub.features);
  ad::Var h = ad::linear(x, params[layout.proj_weight], params[layout.proj_bias]);
  h = ad::dropout(h, config.dropout, dropout_rng, mode == Mode::train);

  const bool padded = config.variant == ModelVariant::subgnd;
  if (padded) h = zero_pad(h, InducedSubgraph::ego_local);

  std::vector<ad::Var> layers;
  layers.reserve(config.num_layers);
  for (const auto& weights : layout.gin_weights) {
    h = gin_layer(h, sub.local_edges, config.eps, mlp_of(params, weights));
    layers.push_back(h);
  }

  if (!padded) return head(params, layout, ad::pool(h, config.alter_pool));

  const ad::Var h_final = layer_maxpool(layers);
  const ad::Var h_sub = ego_alter_concat(h_final, InducedSubgraph::ego_local, config.alter_pool);
  return head(params, layout, adaptive_scale(h_sub, params[*layout.scaling_logits]));
}

std::vector<ad::Var> bind_params(ad::Tape& tape, const ModelParams& params, bool requires_grad) {
  std::vector<ad::Var> vars;
  vars.reserve(params.size());
  for (const Tensor& t : params.tensors) vars.push_back(tape.leaf(t, requires_grad));
  return vars;
}

namespace {

Tensor run_variant(const InducedSubgraph& sub, const ModelParams& params, ModelConfig config, ModelVariant variant,
                   Mode mode, std::uint64_t dropout_seed) {
  config.variant = variant;
  if (params.layout.scaling_logits.has_value() != (variant == ModelVariant::subgnd))
    throw std::invalid_argument("forward: parameters were built for the other model variant");
  ad::Tape tape;
  const auto vars = bind_params(tape, params, false);
  KeyedRng rng{dropout_seed};
  Tensor logits = forward_on_tape(tape, vars, params.layout, sub, config, mode, rng).value();
  for (double v : logits.data)
    if (!std::isfinite(v)) throw std::domain_error("forward: non-finite logits");
  return logits;
}

}  // namespace

Tensor forward(const InducedSubgraph& sub, const ModelParams& params, const ModelConfig& config, Mode mode,
               std::uint64_t dropout_seed) {
  return run_variant(sub, params, config, ModelVariant::subgnd, mode, dropout_seed);
}

Tensor base_forward(const InducedSubgraph& sub, const ModelParams& params, const ModelConfig& config, Mode mode,
                    std::uint64_t dropout_seed) {
  return run_variant(sub, params, config, ModelVariant::base, mode, dropout_seed);
}

Tensor predict(const InducedSubgraph& sub, const ModelParams& params, const ModelConfig& config) {
  return run_variant(sub, params, config, config.variant, Mode::eval, 0);
}

SampleGradient sample_gradient(const InducedSubgraph& sub, const ModelParams& params, const ModelConfig& config,
                               Mode mode, KeyedRng& dropout_rng) {
  ad::Tape tape;
  const auto vars = bind_params(tape, params, true);
  const ad::Var logits = forward_on_tape(tape, vars, params.layout, sub, config, mode, dropout_rng);
  const ad::Var loss = ad::cross_entropy(logits, static_cast<std::size_t>(sub.label));
  tape.backward(loss);
  SampleGradient out;
  out.loss = loss.value().data[0];
  out.grads.reserve(vars.size());
  for (const ad::Var& v : vars) out.grads.push_back(v.grad());
  return out;
}

std::string to_string(ModelVariant v) { return v == ModelVariant::subgnd ? "subgnd" : "base"; }

std::string to_string(ad::PoolMode m) {
  switch (m) {
    case ad::PoolMode::max: return "max";
    case ad::PoolMode::mean: return "mean";
    case ad::PoolMode::sum: return "sum";
  }
  return "mean";
}

ModelVariant parse_variant(const std::string& s) {
  if (s == "subgnd") return ModelVariant::subgnd;
  if (s == "base") return ModelVariant::base;
  throw std::invalid_argument("unknown model variant '" + s + "' (expected subgnd or base)");
}

ad::PoolMode parse_pool_mode(const std::string& s) {
  if (s == "max") return ad::PoolMode::max;
  if (s == "mean") return ad::PoolMode::mean;
  if (s == "sum") return ad::PoolMode::sum;
  throw std::invalid_argument("unknown pool mode '" + s + "' (expected max, mean or sum)");
}

namespace {

constexpr const char* kCheckpointMagic = "subgnd-checkpoint";
constexpr int kCheckpointVersion = 1;

void put_le(std::ostream& out, double v) {
  auto bits = std::bit_cast<std::uint64_t>(v);
  char bytes[8];
  for (char& b : bytes) {
    b = static_cast<char>(bits & 0xff);
    bits >>= 8;
  }
  out.write(bytes, 8);
}

double get_le(std::istream& in) {
  unsigned char bytes[8];
  in.read(reinterpret_cast<char*>(bytes), 8);
  if (!in) throw std::runtime_error("checkpoint: truncated tensor data");
  std::uint64_t bits = 0;
  for (int i = 7; i >= 0; --i) bits = (bits << 8) | bytes[i];
  return std::bit_cast<double>(bits);
}

}  // namespace

void write_checkpoint(const std::filesystem::path& path, const ModelConfig& config, const ModelParams& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << kCheckpointMagic << ' ' << kCheckpointVersion << '\n'
      << "variant " << to_string(config.variant) << '\n'
      << "input_dim " << config.input_dim << '\n'
      << "hidden_size " << config.hidden_size << '\n'
      << "num_layers " << config.num_layers << '\n'
      << "eps " << detail::format_real(config.eps) << '\n'
      << "alter_pool " << to_string(config.alter_pool) << '\n'
      << "dropout " << detail::format_real(config.dropout) << '\n'
      << "num_classes " << config.num_classes << '\n'
      << "mlp_depth " << config.mlp_depth << '\n'
      << "tensors " << params.size() << '\n';
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Tensor& t = params.tensors[i];
    out << params.names[i] << ' ' << t.rank();
    for (std::size_t d : t.shape) out << ' ' << d;
    out << '\n';
    for (double v : t.data) put_le(out, v);
    out << '\n';
  }
}

std::pair<ModelConfig, ModelParams> read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  const std::string fname = path.string();
  std::size_t line_no = 0;
  const auto expect = [&](const std::string& key) {
    std::string line;
    if (!std::getline(in, line)) throw ParseError(fname, line_no + 1, "unexpected end of header");
    ++line_no;
    std::istringstream ss(line);
    std::string k, v;
    ss >> k >> v;
    if (k != key) throw ParseError(fname, line_no, "expected '" + key + "'");
    return v;
  };
  const auto as_size = [&](const std::string& v) {
    const auto n = detail::parse_number<std::size_t>(v);
    if (!n) throw ParseError(fname, line_no, "malformed integer '" + v + "'");
    return *n;
  };
  const auto as_real = [&](const std::string& v) {
    const auto n = detail::parse_number<double>(v);
    if (!n) throw ParseError(fname, line_no, "malformed real '" + v + "'");
    return *n;
  };

  if (expect(kCheckpointMagic) != std::to_string(kCheckpointVersion))
    throw ParseError(fname, 1, "unsupported checkpoint version");
  ModelConfig config;
  config.variant = parse_variant(expect("variant"));
  config.input_dim = as_size(expect("input_dim"));
  config.hidden_size = as_size(expect("hidden_size"));
  config.num_layers = as_size(expect("num_layers"));
  config.eps = as_real(expect("eps"));
  config.alter_pool = parse_pool_mode(expect("alter_pool"));
  config.dropout = as_real(expect("dropout"));
  config.num_classes = as_size(expect("num_classes"));
  config.mlp_depth = as_size(expect("mlp_depth"));
  const std::size_t count = as_size(expect("tensors"));

  ModelParams params = init_params(config, 0);
  if (params.size() != count) throw ParseError(fname, line_no, "tensor count does not match the config");
  for (std::size_t i = 0; i < count; ++i) {
    std::string line;
    if (!std::getline(in, line)) throw ParseError(fname, line_no + 1, "missing tensor header");
    ++line_no;
    std::istringstream ss(line);
    std::string name;
    std::size_t rank = 0;
    ss >> name >> rank;
    std::vector<std::size_t> shape(rank);
    for (auto& d : shape) ss >> d;
    if (!ss || name != params.names[i] || shape != params.tensors[i].shape)
      throw ParseError(fname, line_no, "tensor '" + name + "' does not match the config layout");
    for (double& v : params.tensors[i].data) v = get_le(in);
    if (in.get() != '\n') throw ParseError(fname, line_no, "missing newline after tensor data");
    ++line_no;
  }
  return {config, std::move(params)};
}

}  // namespace subgnd

namespace subgnd {

ad::GradCheckResult check_model_gradients(const InducedSubgraph& sub, const ModelParams& params,
                                          const ModelConfig& config, const ad::GradCheckOptions& options) {
  const ad::LossFn loss = [&](ad::Tape& tape, const std::vector<ad::Var>& vars) {
    KeyedRng unused{0};
    const ad::Var logits = forward_on_tape(tape, vars, params.layout, sub, config, Mode::eval, unused);
    return ad::cross_entropy(logits, static_cast<std::size_t>(sub.label));
  };
  return ad::grad_check(loss, params.tensors, options);
}

}  // namespace subgnd
