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

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "subgnd/autodiff.hpp"
#include "subgnd/sampler.hpp"
#include "subgnd/tensor.hpp"

namespace subgnd {

enum class ModelVariant { subgnd, base };
enum class Mode { train, eval };

struct ModelConfig {
  ModelVariant variant = ModelVariant::subgnd;
  std::size_t input_dim = 0;
  std::size_t hidden_size = 32;
  std::size_t num_layers = 2;
  double eps = 0.0;  // shared by every GIN layer
  ad::PoolMode alter_pool = ad::PoolMode::mean;
  double dropout = 0.0;
  std::size_t num_classes = 2;
  std::size_t mlp_depth = 2;

  void validate() const;
  /// Node width inside the GIN trunk: 2H after differentiated padding, H for the base model.
  std::size_t trunk_width() const { return variant == ModelVariant::subgnd ? 2 * hidden_size : hidden_size; }
  /// Width of the vector fed to the head: 4H (ego || alters) or H (pool of all nodes).
  std::size_t readout_width() const { return variant == ModelVariant::subgnd ? 4 * hidden_size : hidden_size; }
  bool operator==(const ModelConfig&) const = default;
};

/// Positions of each parameter tensor inside ModelParams::tensors.
struct ParamLayout {
  std::size_t proj_weight = 0;
  std::size_t proj_bias = 0;
  std::vector<std::vector<std::size_t>> gin_weights;  // [layer][depth]; the bias follows each weight
  std::optional<std::size_t> scaling_logits;          // subgnd only
  std::size_t head_hidden_weight = 0;
  std::size_t head_out_weight = 0;
};

/// Flat list of named tensors in declaration order:
/// input projection, GIN MLPs, scaling logits, head.
struct ModelParams {
  std::vector<std::string> names;
  std::vector<Tensor> tensors;
  ParamLayout layout;

  std::size_t size() const { return tensors.size(); }
  /// softmax of the scaling logits. Throws for the base variant.
  std::vector<double> alphas() const;
  bool operator==(const ModelParams& o) const { return names == o.names && tensors == o.tensors; }
};

ParamLayout make_layout(const ModelConfig& config);

/// Glorot-uniform weights, zero biases, zero scaling logits. Deterministic per seed.
ModelParams init_params(const ModelConfig& config, std::uint64_t seed);

// Building blocks, recorded on the tape of their first argument.

/// Ego row becomes (h || 0), every other row (0 || h). [n x H] -> [n x 2H].
ad::Var zero_pad(ad::Var nodes, std::size_t ego_local);

/// One GIN update: mlp((1 + eps) * h_v + sum_{(u,v) in edges} h_u).
/// `mlp` holds weight/bias pairs; ReLU sits between consecutive linear maps.
ad::Var gin_layer(ad::Var h, std::span<const Edge> local_edges, double eps, std::span<const ad::Var> mlp);

/// Elementwise max over the per-layer outputs.
ad::Var layer_maxpool(std::span<const ad::Var> layers);

/// h_ego || pool(alter rows). With no alters the pooled half is zero.
ad::Var ego_alter_concat(ad::Var h_final, std::size_t ego_local, ad::PoolMode mode);

/// softmax(logits) applied blockwise to ego-left, ego-right, pool-left, pool-right.
ad::Var adaptive_scale(ad::Var h_sub, ad::Var scaling_logits);

/// Logits for `sub` on an existing tape. `params` are the bound parameter leaves.
/// Dispatches on config.variant. `dropout_rng` is used only in train mode.
ad::Var forward_on_tape(ad::Tape& tape, std::span<const ad::Var> params, const ParamLayout& layout,
                        const InducedSubgraph& sub, const ModelConfig& config, Mode mode, KeyedRng& dropout_rng);

/// Binds every parameter tensor as a leaf of `tape`.
std::vector<ad::Var> bind_params(ad::Tape& tape, const ModelParams& params, bool requires_grad);

/// Full SubGND pipeline. Throws std::domain_error when the logits are not finite.
Tensor forward(const InducedSubgraph& sub, const ModelParams& params, const ModelConfig& config,
               Mode mode = Mode::eval, std::uint64_t dropout_seed = 0);

/// Pool-everything baseline: same GIN trunk at width H, no padding, no ego/alter
/// split, no scaling; pools all final-layer rows with config.alter_pool.
Tensor base_forward(const InducedSubgraph& sub, const ModelParams& params, const ModelConfig& config,
                    Mode mode = Mode::eval, std::uint64_t dropout_seed = 0);

/// forward or base_forward, by config.variant.
Tensor predict(const InducedSubgraph& sub, const ModelParams& params, const ModelConfig& config);

struct SampleGradient {
  double loss = 0.0;
  std::vector<Tensor> grads;  // aligned with ModelParams::tensors
};

/// Cross-entropy against sub.label and its gradient from one backward pass.
SampleGradient sample_gradient(const InducedSubgraph& sub, const ModelParams& params, const ModelConfig& config,
                               Mode mode, KeyedRng& dropout_rng);

/// Binary checkpoint: text header echoing the config, then for each tensor a line
/// "name rank dims..." followed by its values as little-endian IEEE-754 doubles.
void write_checkpoint(const std::filesystem::path& path, const ModelConfig& config, const ModelParams& params);
std::pair<ModelConfig, ModelParams> read_checkpoint(const std::filesystem::path& path);

std::string to_string(ModelVariant v);
std::string to_string(ad::PoolMode m);
ModelVariant parse_variant(const std::string& s);
ad::PoolMode parse_pool_mode(const std::string& s);

}  // namespace subgnd

namespace subgnd {

/// Finite-difference check of cross_entropy(forward(sub)) with respect to every
/// parameter tensor, in eval mode (dropout off).
ad::GradCheckResult check_model_gradients(const InducedSubgraph& sub, const ModelParams& params,
                                          const ModelConfig& config, const ad::GradCheckOptions& options);

}  // namespace subgnd
