// Copyright 2026 The cimfault Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cimfault/container.hpp"
#include "cimfault/fault.hpp"
#include "cimfault/matrix.hpp"
#include "cimfault/rng.hpp"

namespace cimfault {

// Shape of a small decoder-only transformer (RMSNorm, rotary attention,
// SwiGLU feed-forward, untied output head). Defaults are the toy model.
struct ModelConfig {
  std::size_t n_layers = 4;
  std::size_t d_model = 128;
  std::size_t n_heads = 4;
  std::size_t head_dim = 32;
  std::size_t d_ffn = 512;
  std::size_t vocab = 256;
  double rope_base = 10000.0;
  double norm_eps = 1e-6;

  // Throws ConfigError naming the bad field.
  void validate() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

// Projections multiply from the right: y = x * W with W of shape
// (d_in, d_out).
struct AttentionWeights {
  Matrix wq, wk, wv, wo;
};

struct FfnWeights {
  Matrix w_gate, w_up, w_down;
};

struct LayerWeights {
  AttentionWeights attn;
  FfnWeights ffn;
  std::vector<float> attn_norm;
  std::vector<float> ffn_norm;
};

// Tensor names in the weight container:
//   embed (vocab x d_model), lm_head (d_model x vocab), final_norm (d_model),
//   layers.<i>.{wq,wk,wv,wo,w_gate,w_up,w_down,attn_norm,ffn_norm}
struct ModelWeights {
  Matrix embed;
  std::vector<LayerWeights> layers;
  std::vector<float> final_norm;
  Matrix lm_head;

  void validate(const ModelConfig& cfg) const;

  std::vector<NamedTensor> to_tensors() const;
  static ModelWeights from_tensors(std::span<const NamedTensor> tensors, const ModelConfig& cfg);
};

// Names of the matrices that sit on the crossbar and therefore take faults.
std::vector<std::string> faultable_tensor_names(const ModelConfig& cfg, bool include_embeddings);

// Reads n_layers, d_model, d_ffn and vocab off the tensor shapes; the head
// split and the scalar hyper-parameters come from `base`.
ModelConfig infer_config(std::span<const NamedTensor> tensors, const ModelConfig& base);

// Entries drawn from N(0, 0.02^2) on a keyed stream, norm scales at 1.
ModelWeights make_toy_weights(const ModelConfig& cfg, std::uint64_t seed);

enum class RedundancyTarget { None, Attention, Ffn, LayerRange };

// Which sub-modules are replicated, and how many times. LayerRange covers
// layers [first, last) and replicates each of them as a whole.
struct RedundancySpec {
  RedundancyTarget target = RedundancyTarget::None;
  std::size_t factor = 1;
  std::size_t first = 0;
  std::size_t last = 0;

  static RedundancySpec none() { return {}; }
  static RedundancySpec attention(std::size_t k) { return {RedundancyTarget::Attention, k}; }
  static RedundancySpec ffn(std::size_t k) { return {RedundancyTarget::Ffn, k}; }
  static RedundancySpec layers(std::size_t first, std::size_t last, std::size_t k) {
    return {RedundancyTarget::LayerRange, k, first, last};
  }

  void validate(std::size_t n_layers) const;

  bool active() const { return target != RedundancyTarget::None && factor > 1; }
  bool covers_layer(std::size_t layer) const;
  std::size_t attention_replicas(std::size_t layer) const;
  std::size_t ffn_replicas(std::size_t layer) const;

  // "none", "attention:K", "ffn:K" or "layers:A-B:K" with B inclusive.
  std::string to_string() const;
  // Also accepts "shallow:K", resolved against n_layers.
  static RedundancySpec parse(std::string_view text, std::size_t n_layers);

  friend bool operator==(const RedundancySpec&, const RedundancySpec&) = default;
};

// Replicates the first quarter of the stack: layers [0, n_layers / 4).
RedundancySpec shallow_redundancy(const ModelConfig& cfg, std::size_t k = 4);

// How replicas are combined. Outputs: each replica runs and the module
// outputs are averaged. Weights: replica matrices are averaged (and rounded
// to bf16) before a single evaluation.
enum class Averaging { Outputs, Weights };

// Supplies the weights each projection actually computes with.
class WeightProvider {
 public:
  static WeightProvider clean();
  static WeightProvider faulted(NoiseSpec noise, SafSpec saf, RngKey key, bool fault_embeddings = true);
  static WeightProvider redundant(const WeightProvider& inner, RedundancySpec spec,
                                  Averaging averaging = Averaging::Outputs);

  // Realization of `clean` for tensor `name`, replica `replica`. The stream
  // is key.child(name).child(replica).
  Matrix realize(const Matrix& clean, std::string_view name, std::size_t replica,
                 std::uint64_t forward_index = 0) const;

  bool is_faulted() const { return faulted_; }
  bool fault_embeddings() const { return fault_embeddings_; }
  bool redraws_per_forward() const { return faulted_ && noise_.redraw == Redraw::PerForward; }
  const RedundancySpec& redundancy() const { return redundancy_; }
  Averaging averaging() const { return averaging_; }
  const NoiseSpec& noise() const { return noise_; }
  const SafSpec& saf() const { return saf_; }
  const RngKey& key() const { return key_; }

 private:
  bool faulted_ = false;
  bool fault_embeddings_ = true;
  NoiseSpec noise_{};
  SafSpec saf_{};
  RngKey key_{};
  RedundancySpec redundancy_{};
  Averaging averaging_ = Averaging::Outputs;
};

struct ProgrammedLayer {
  std::vector<AttentionWeights> attn;  // one entry per replica
  std::vector<FfnWeights> ffn;
  bool whole_layer = false;  // replicas are averaged at the layer output
  std::vector<float> attn_norm;
  std::vector<float> ffn_norm;
};

// Every weight realized for one forward pass.
struct ProgrammedModel {
  ModelConfig cfg;
  Matrix embed;
  std::vector<ProgrammedLayer> layers;
  std::vector<float> final_norm;
  Matrix lm_head;
};

ProgrammedModel program_model(const ModelWeights& weights, const ModelConfig& cfg, const WeightProvider& provider,
                              std::uint64_t forward_index = 0);

Tensor rms_norm(const Tensor& x, std::span<const float> scale, double eps);

// Causal multi-head self-attention with rotary positions. Only the four
// projections touch weights; scores and softmax are exact digital math.
Tensor attention_forward(const Tensor& x, const AttentionWeights& w, const ModelConfig& cfg);

// silu(x Wg) * (x Wu), then Wd.
Tensor ffn_forward(const Tensor& x, const FfnWeights& w, const ModelConfig& cfg);

// Mean over replicas r in [0, k) of eval(r), summed in double.
Tensor replicate_and_average(const std::function<Tensor(std::size_t)>& eval, std::size_t k);

// Logits, one row per token.
Tensor forward(std::span<const std::uint32_t> tokens, const ProgrammedModel& model);
Tensor forward(std::span<const std::uint32_t> tokens, const ModelWeights& weights, const WeightProvider& provider,
               const ModelConfig& cfg, std::uint64_t forward_index = 0);

// Index of the largest element; the lowest index wins ties.
std::size_t argmax(std::span<const float> row);

// Greedy continuation with fixed weights.
std::vector<std::uint32_t> generate_greedy(std::span<const std::uint32_t> prompt, const ProgrammedModel& model,
                                           std::size_t max_new);

// Greedy continuation. Returns the prompt followed by up to max_new tokens.
// Step s uses forward_index s, so per-forward noise is redrawn every step.
std::vector<std::uint32_t> generate_greedy(std::span<const std::uint32_t> prompt, const ModelWeights& weights,
                                           const WeightProvider& provider, const ModelConfig& cfg,
                                           std::size_t max_new);

}  // namespace cimfault
