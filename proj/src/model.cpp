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

#include "cimfault/model.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>

#include "cimfault/errors.hpp"

namespace cimfault {
namespace {

constexpr const char* kAttnNames[] = {"wq", "wk", "wv", "wo"};
constexpr const char* kFfnNames[] = {"w_gate", "w_up", "w_down"};

std::string layer_name(std::size_t layer, std::string_view name) {
  return "layers." + std::to_string(layer) + "." + std::string(name);
}

void expect_shape(const Matrix& m, std::size_t rows, std::size_t cols, const std::string& name) {
  if (m.rows() != rows || m.cols() != cols) {
    throw ShapeError("weight '" + name + "' is " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) +
                     ", expected " + std::to_string(rows) + "x" + std::to_string(cols));
  }
}

void expect_length(const std::vector<float>& v, std::size_t n, const std::string& name) {
  if (v.size() != n) {
    throw ShapeError("weight '" + name + "' has " + std::to_string(v.size()) + " entries, expected " +
                     std::to_string(n));
  }
}

Matrix random_matrix(std::size_t rows, std::size_t cols, const RngKey& key) {
  std::vector<double> z(rows * cols);
  KeyedStream(key).fill_normal(z);
  std::vector<float> vals(z.size());
  std::transform(z.begin(), z.end(), vals.begin(), [](double v) { return static_cast<float>(0.02 * v); });
  return Matrix(rows, cols, vals);
}

// Elementwise mean of replica matrices, rounded to bf16.
Matrix average_matrices(std::span<const Matrix* const> ms) {
  const Matrix& first = *ms.front();
  std::vector<float> out(first.size());
  for (std::size_t e = 0; e < out.size(); ++e) {
    double sum = 0.0;
    for (const Matrix* m : ms) sum += m->data()[e];
    out[e] = static_cast<float>(sum / static_cast<double>(ms.size()));
  }
  return Matrix(first.rows(), first.cols(), out);
}

std::size_t parse_count(std::string_view text, std::string_view what) {
  std::size_t v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    throw ConfigError("redundancy", "bad " + std::string(what) + " '" + std::string(text) + "'");
  }
  return v;
}

void add_into(Tensor& acc, const Tensor& x) {
  auto a = acc.data();
  auto b = x.data();
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
}

}  // namespace

void ModelConfig::validate() const {
  const std::pair<const char*, std::size_t> counts[] = {{"n_layers", n_layers}, {"d_model", d_model},
                                                        {"n_heads", n_heads},   {"head_dim", head_dim},
                                                        {"d_ffn", d_ffn},       {"vocab", vocab}};
  for (auto [name, v] : counts) {
    if (v == 0) throw ConfigError(std::string("model.") + name, "must be >= 1");
  }
  if (n_heads * head_dim != d_model) throw ConfigError("model.head_dim", "n_heads * head_dim must equal d_model");
  if (head_dim % 2 != 0) throw ConfigError("model.head_dim", "rotary embedding needs an even head_dim");
  if (!(rope_base > 0.0)) throw ConfigError("model.rope_base", "must be positive");
  if (!(norm_eps > 0.0)) throw ConfigError("model.norm_eps", "must be positive");
}

void ModelWeights::validate(const ModelConfig& cfg) const {
  cfg.validate();
  expect_shape(embed, cfg.vocab, cfg.d_model, "embed");
  expect_shape(lm_head, cfg.d_model, cfg.vocab, "lm_head");
  expect_length(final_norm, cfg.d_model, "final_norm");
  if (layers.size() != cfg.n_layers) {
    throw ShapeError("model has " + std::to_string(layers.size()) + " layers, config says " +
                     std::to_string(cfg.n_layers));
  }
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    expect_shape(l.attn.wq, cfg.d_model, cfg.d_model, layer_name(i, "wq"));
    expect_shape(l.attn.wk, cfg.d_model, cfg.d_model, layer_name(i, "wk"));
    expect_shape(l.attn.wv, cfg.d_model, cfg.d_model, layer_name(i, "wv"));
    expect_shape(l.attn.wo, cfg.d_model, cfg.d_model, layer_name(i, "wo"));
    expect_shape(l.ffn.w_gate, cfg.d_model, cfg.d_ffn, layer_name(i, "w_gate"));
    expect_shape(l.ffn.w_up, cfg.d_model, cfg.d_ffn, layer_name(i, "w_up"));
    expect_shape(l.ffn.w_down, cfg.d_ffn, cfg.d_model, layer_name(i, "w_down"));
    expect_length(l.attn_norm, cfg.d_model, layer_name(i, "attn_norm"));
    expect_length(l.ffn_norm, cfg.d_model, layer_name(i, "ffn_norm"));
  }
}

std::vector<NamedTensor> ModelWeights::to_tensors() const {
  std::vector<NamedTensor> out;
  out.push_back(NamedTensor::from_matrix("embed", embed));
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    out.push_back(NamedTensor::from_matrix(layer_name(i, "wq"), l.attn.wq));
    out.push_back(NamedTensor::from_matrix(layer_name(i, "wk"), l.attn.wk));
    out.push_back(NamedTensor::from_matrix(layer_name(i, "wv"), l.attn.wv));
    out.push_back(NamedTensor::from_matrix(layer_name(i, "wo"), l.attn.wo));
    out.push_back(NamedTensor::from_matrix(layer_name(i, "w_gate"), l.ffn.w_gate));
    out.push_back(NamedTensor::from_matrix(layer_name(i, "w_up"), l.ffn.w_up));
    out.push_back(NamedTensor::from_matrix(layer_name(i, "w_down"), l.ffn.w_down));
    out.push_back(NamedTensor::vector(layer_name(i, "attn_norm"), l.attn_norm));
    out.push_back(NamedTensor::vector(layer_name(i, "ffn_norm"), l.ffn_norm));
  }
  out.push_back(NamedTensor::vector("final_norm", final_norm));
  out.push_back(NamedTensor::from_matrix("lm_head", lm_head));
  return out;
}

ModelWeights ModelWeights::from_tensors(std::span<const NamedTensor> tensors, const ModelConfig& cfg) {
  std::map<std::string, const NamedTensor*, std::less<>> by_name;
  for (const auto& t : tensors) by_name[t.name] = &t;
  auto get = [&](const std::string& name) -> const NamedTensor& {
    auto it = by_name.find(name);
    if (it == by_name.end()) throw IoError("weight file lacks tensor '" + name + "'");
    return *it->second;
  };
  auto vec = [&](const std::string& name) {
    const auto& t = get(name);
    if (t.dims.size() != 1) throw ShapeError("tensor '" + name + "' must have rank 1");
    std::vector<float> v(t.words.size());
    std::transform(t.words.begin(), t.words.end(), v.begin(), decode_bf16);
    return v;
  };

  ModelWeights w;
  w.embed = get("embed").to_matrix();
  w.lm_head = get("lm_head").to_matrix();
  w.final_norm = vec("final_norm");
  for (std::size_t i = 0; i < cfg.n_layers; ++i) {
    LayerWeights l;
    l.attn.wq = get(layer_name(i, "wq")).to_matrix();
    l.attn.wk = get(layer_name(i, "wk")).to_matrix();
    l.attn.wv = get(layer_name(i, "wv")).to_matrix();
    l.attn.wo = get(layer_name(i, "wo")).to_matrix();
    l.ffn.w_gate = get(layer_name(i, "w_gate")).to_matrix();
    l.ffn.w_up = get(layer_name(i, "w_up")).to_matrix();
    l.ffn.w_down = get(layer_name(i, "w_down")).to_matrix();
    l.attn_norm = vec(layer_name(i, "attn_norm"));
    l.ffn_norm = vec(layer_name(i, "ffn_norm"));
    w.layers.push_back(std::move(l));
  }
  w.validate(cfg);
  return w;
}

std::vector<std::string> faultable_tensor_names(const ModelConfig& cfg, bool include_embeddings) {
  std::vector<std::string> names;
  if (include_embeddings) names.emplace_back("embed");
  for (std::size_t i = 0; i < cfg.n_layers; ++i) {
    for (const char* n : kAttnNames) names.push_back(layer_name(i, n));
    for (const char* n : kFfnNames) names.push_back(layer_name(i, n));
  }
  if (include_embeddings) names.emplace_back("lm_head");
  return names;
}

ModelConfig infer_config(std::span<const NamedTensor> tensors, const ModelConfig& base) {
  ModelConfig cfg = base;
  std::size_t n_layers = 0;
  bool have_embed = false;
  bool have_ffn = false;
  for (const auto& t : tensors) {
    if (t.name == "embed" && t.dims.size() == 2) {
      cfg.vocab = t.dims[0];
      cfg.d_model = t.dims[1];
      have_embed = true;
    } else if (t.name.starts_with("layers.")) {
      const auto dot = t.name.find('.', 7);
      if (dot == std::string::npos) continue;
      n_layers = std::max(n_layers, parse_count(std::string_view(t.name).substr(7, dot - 7), "layer index") + 1);
      if (t.name.ends_with(".w_gate") && t.dims.size() == 2) {
        cfg.d_ffn = t.dims[1];
        have_ffn = true;
      }
    }
  }
  if (!have_embed || !have_ffn || n_layers == 0) throw IoError("weight file does not describe a decoder stack");
  cfg.n_layers = n_layers;
  if (cfg.n_heads == 0 || cfg.d_model % cfg.n_heads != 0) {
    throw ConfigError("model.n_heads", "must divide d_model = " + std::to_string(cfg.d_model));
  }
  cfg.head_dim = cfg.d_model / cfg.n_heads;
  cfg.validate();
  return cfg;
}

ModelWeights make_toy_weights(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  const RngKey root = RngKey(seed).child("toy-init");
  ModelWeights w;
  w.embed = random_matrix(cfg.vocab, cfg.d_model, root.child("embed"));
  for (std::size_t i = 0; i < cfg.n_layers; ++i) {
    LayerWeights l;
    auto rk = [&](const char* n) { return root.child(layer_name(i, n)); };
    l.attn.wq = random_matrix(cfg.d_model, cfg.d_model, rk("wq"));
    l.attn.wk = random_matrix(cfg.d_model, cfg.d_model, rk("wk"));
    l.attn.wv = random_matrix(cfg.d_model, cfg.d_model, rk("wv"));
    l.attn.wo = random_matrix(cfg.d_model, cfg.d_model, rk("wo"));
    l.ffn.w_gate = random_matrix(cfg.d_model, cfg.d_ffn, rk("w_gate"));
    l.ffn.w_up = random_matrix(cfg.d_model, cfg.d_ffn, rk("w_up"));
    l.ffn.w_down = random_matrix(cfg.d_ffn, cfg.d_model, rk("w_down"));
    l.attn_norm.assign(cfg.d_model, 1.0f);
    l.ffn_norm.assign(cfg.d_model, 1.0f);
    w.layers.push_back(std::move(l));
  }
  w.final_norm.assign(cfg.d_model, 1.0f);
  w.lm_head = random_matrix(cfg.d_model, cfg.vocab, root.child("lm_head"));
  return w;
}

// --- redundancy ------------------------------------------------------------

void RedundancySpec::validate(std::size_t n_layers) const {
  if (factor == 0) throw ConfigError("redundancy", "replication factor must be >= 1");
  if (target == RedundancyTarget::LayerRange && !(first < last && last <= n_layers)) {
    throw ConfigError("redundancy", "layer range [" + std::to_string(first) + ", " + std::to_string(last) +
                                        ") is not within [0, " + std::to_string(n_layers) + ")");
  }
}

bool RedundancySpec::covers_layer(std::size_t layer) const {
  return target == RedundancyTarget::LayerRange && layer >= first && layer < last;
}

std::size_t RedundancySpec::attention_replicas(std::size_t layer) const {
  if (target == RedundancyTarget::Attention || covers_layer(layer)) return factor;
  return 1;
}

std::size_t RedundancySpec::ffn_replicas(std::size_t layer) const {
  if (target == RedundancyTarget::Ffn || covers_layer(layer)) return factor;
  return 1;
}

std::string RedundancySpec::to_string() const {
  switch (target) {
    case RedundancyTarget::None:
      return "none";
    case RedundancyTarget::Attention:
      return "attention:" + std::to_string(factor);
    case RedundancyTarget::Ffn:
      return "ffn:" + std::to_string(factor);
    case RedundancyTarget::LayerRange:
      return "layers:" + std::to_string(first) + "-" + std::to_string(last - 1) + ":" + std::to_string(factor);
  }
  return "none";
}

RedundancySpec RedundancySpec::parse(std::string_view text, std::size_t n_layers) {
  while (!text.empty() && text.front() == ' ') text.remove_prefix(1);
  while (!text.empty() && text.back() == ' ') text.remove_suffix(1);
  if (text == "none") return none();

  const auto colon = text.find(':');
  if (colon == std::string_view::npos) throw ConfigError("redundancy", "cannot parse '" + std::string(text) + "'");
  const std::string_view kind = text.substr(0, colon);
  const std::string_view rest = text.substr(colon + 1);

  RedundancySpec spec;
  if (kind == "attention") {
    spec = attention(parse_count(rest, "factor"));
  } else if (kind == "ffn") {
    spec = ffn(parse_count(rest, "factor"));
  } else if (kind == "shallow") {
    spec = shallow_redundancy(ModelConfig{.n_layers = n_layers}, parse_count(rest, "factor"));
  } else if (kind == "layers") {
    const auto c2 = rest.find(':');
    const auto dash = rest.find('-');
    if (c2 == std::string_view::npos || dash == std::string_view::npos || dash > c2) {
      throw ConfigError("redundancy", "expected layers:A-B:K, got '" + std::string(text) + "'");
    }
    const std::size_t a = parse_count(rest.substr(0, dash), "layer");
    const std::size_t b = parse_count(rest.substr(dash + 1, c2 - dash - 1), "layer");
    spec = layers(a, b + 1, parse_count(rest.substr(c2 + 1), "factor"));
  } else {
    throw ConfigError("redundancy", "unknown target '" + std::string(kind) + "'");
  }
  spec.validate(n_layers);
  return spec;
}

RedundancySpec shallow_redundancy(const ModelConfig& cfg, std::size_t k) {
  if (cfg.n_layers < 4) throw ConfigError("redundancy", "shallow redundancy needs at least 4 layers");
  return RedundancySpec::layers(0, cfg.n_layers / 4, k);
}

// --- provider --------------------------------------------------------------

WeightProvider WeightProvider::clean() { return WeightProvider{}; }

WeightProvider WeightProvider::faulted(NoiseSpec noise, SafSpec saf, RngKey key, bool fault_embeddings) {
  noise.validate();
  saf.validate();
  WeightProvider p;
  p.faulted_ = true;
  p.fault_embeddings_ = fault_embeddings;
  p.noise_ = noise;
  p.saf_ = saf;
  p.key_ = std::move(key);
  return p;
}

WeightProvider WeightProvider::redundant(const WeightProvider& inner, RedundancySpec spec, Averaging averaging) {
  if (spec.factor == 0) throw ConfigError("redundancy", "replication factor must be >= 1");
  if (inner.redundancy_.active()) throw ConfigError("redundancy", "redundant providers do not nest");
  WeightProvider p = inner;
  p.redundancy_ = spec;
  p.averaging_ = averaging;
  return p;
}

Matrix WeightProvider::realize(const Matrix& clean, std::string_view name, std::size_t replica,
                               std::uint64_t forward_index) const {
  if (!faulted_) return clean;
  if (!fault_embeddings_ && (name == "embed" || name == "lm_head")) return clean;
  return program_weights(clean, noise_, saf_, key_.child(name).child(replica), forward_index).w_star;
}

ProgrammedModel program_model(const ModelWeights& weights, const ModelConfig& cfg, const WeightProvider& provider,
                              std::uint64_t forward_index) {
  weights.validate(cfg);
  const RedundancySpec& red = provider.redundancy();
  red.validate(cfg.n_layers);

  ProgrammedModel pm;
  pm.cfg = cfg;
  pm.embed = provider.realize(weights.embed, "embed", 0, forward_index);
  pm.lm_head = provider.realize(weights.lm_head, "lm_head", 0, forward_index);
  pm.final_norm = weights.final_norm;

  for (std::size_t i = 0; i < cfg.n_layers; ++i) {
    const LayerWeights& lw = weights.layers[i];
    ProgrammedLayer pl;
    pl.whole_layer = red.covers_layer(i) && red.factor > 1;
    pl.attn_norm = lw.attn_norm;
    pl.ffn_norm = lw.ffn_norm;
    auto realize = [&](const Matrix& m, const char* name, std::size_t r) {
      return provider.realize(m, layer_name(i, name), r, forward_index);
    };
    for (std::size_t r = 0; r < red.attention_replicas(i); ++r) {
      pl.attn.push_back({realize(lw.attn.wq, "wq", r), realize(lw.attn.wk, "wk", r), realize(lw.attn.wv, "wv", r),
                         realize(lw.attn.wo, "wo", r)});
    }
    for (std::size_t r = 0; r < red.ffn_replicas(i); ++r) {
      pl.ffn.push_back(
          {realize(lw.ffn.w_gate, "w_gate", r), realize(lw.ffn.w_up, "w_up", r), realize(lw.ffn.w_down, "w_down", r)});
    }

    if (provider.averaging() == Averaging::Weights) {
      auto collapse = [](auto& replicas, auto member_ptrs) {
        if (replicas.size() < 2) return;
        auto merged = replicas.front();
        for (auto member : member_ptrs) {
          std::vector<const Matrix*> ms;
          for (const auto& rep : replicas) ms.push_back(&(rep.*member));
          merged.*member = average_matrices(ms);
        }
        replicas.assign(1, std::move(merged));
      };
      collapse(pl.attn, std::array{&AttentionWeights::wq, &AttentionWeights::wk, &AttentionWeights::wv,
                                   &AttentionWeights::wo});
      collapse(pl.ffn, std::array{&FfnWeights::w_gate, &FfnWeights::w_up, &FfnWeights::w_down});
      pl.whole_layer = false;
    }
    pm.layers.push_back(std::move(pl));
  }
  return pm;
}

// --- forward ---------------------------------------------------------------

Tensor rms_norm(const Tensor& x, std::span<const float> scale, double eps) {
  if (scale.size() != x.cols()) throw ShapeError("rms_norm: scale length does not match activation width");
  Tensor out(x.rows(), x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    auto src = x.row(r);
    double ss = 0.0;
    for (float v : src) ss += static_cast<double>(v) * v;
    const double inv = 1.0 / std::sqrt(ss / static_cast<double>(src.size()) + eps);
    auto dst = out.row(r);
    for (std::size_t c = 0; c < src.size(); ++c) dst[c] = static_cast<float>(src[c] * inv * scale[c]);
  }
  return out;
}

namespace {

// Rotates each head of each row in place, pairing dimension i with
// i + head_dim / 2.
void apply_rope(Tensor& x, const ModelConfig& cfg) {
  const std::size_t half = cfg.head_dim / 2;
  for (std::size_t pos = 0; pos < x.rows(); ++pos) {
    auto row = x.row(pos);
    for (std::size_t h = 0; h < cfg.n_heads; ++h) {
      float* head = row.data() + h * cfg.head_dim;
      for (std::size_t i = 0; i < half; ++i) {
        const double freq = std::pow(cfg.rope_base, -2.0 * static_cast<double>(i) / static_cast<double>(cfg.head_dim));
        const double angle = static_cast<double>(pos) * freq;
        const double c = std::cos(angle);
        const double s = std::sin(angle);
        const double a = head[i];
        const double b = head[i + half];
        head[i] = static_cast<float>(a * c - b * s);
        head[i + half] = static_cast<float>(a * s + b * c);
      }
    }
  }
}

}  // namespace

Tensor attention_forward(const Tensor& x, const AttentionWeights& w, const ModelConfig& cfg) {
  if (x.cols() != cfg.d_model) throw ShapeError("attention_forward: activation width differs from d_model");
  Tensor q = matmul(x, w.wq);
  Tensor k = matmul(x, w.wk);
  const Tensor v = matmul(x, w.wv);
  apply_rope(q, cfg);
  apply_rope(k, cfg);

  const std::size_t seq = x.rows();
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(cfg.head_dim));
  Tensor mixed(seq, cfg.d_model);
  std::vector<double> scores(seq);
  std::vector<double> acc(cfg.head_dim);
  for (std::size_t h = 0; h < cfg.n_heads; ++h) {
    const std::size_t off = h * cfg.head_dim;
    for (std::size_t i = 0; i < seq; ++i) {
      double top = -INFINITY;
      for (std::size_t j = 0; j <= i; ++j) {
        double dot = 0.0;
        for (std::size_t d = 0; d < cfg.head_dim; ++d) dot += static_cast<double>(q(i, off + d)) * k(j, off + d);
        scores[j] = dot * inv_sqrt;
        top = std::max(top, scores[j]);
      }
      double denom = 0.0;
      for (std::size_t j = 0; j <= i; ++j) {
        scores[j] = std::exp(scores[j] - top);
        denom += scores[j];
      }
      std::fill(acc.begin(), acc.end(), 0.0);
      for (std::size_t j = 0; j <= i; ++j) {
        const double p = scores[j] / denom;
        for (std::size_t d = 0; d < cfg.head_dim; ++d) acc[d] += p * v(j, off + d);
      }
      for (std::size_t d = 0; d < cfg.head_dim; ++d) mixed(i, off + d) = static_cast<float>(acc[d]);
    }
  }
  return matmul(mixed, w.wo);
}

Tensor ffn_forward(const Tensor& x, const FfnWeights& w, const ModelConfig& cfg) {
  if (x.cols() != cfg.d_model) throw ShapeError("ffn_forward: activation width differs from d_model");
  Tensor gate = matmul(x, w.w_gate);
  const Tensor up = matmul(x, w.w_up);
  auto g = gate.data();
  auto u = up.data();
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double a = g[i];
    g[i] = static_cast<float>(a / (1.0 + std::exp(-a)) * u[i]);
  }
  return matmul(gate, w.w_down);
}

Tensor replicate_and_average(const std::function<Tensor(std::size_t)>& eval, std::size_t k) {
  if (k == 0) throw ConfigError("redundancy", "replication factor must be >= 1");
  if (k == 1) return eval(0);
  Tensor first = eval(0);
  std::vector<double> sum(first.data().begin(), first.data().end());
  for (std::size_t r = 1; r < k; ++r) {
    const Tensor next = eval(r);
    if (next.rows() != first.rows() || next.cols() != first.cols()) {
      throw ShapeError("replicate_and_average: replica outputs differ in shape");
    }
    auto d = next.data();
    for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += d[i];
  }
  auto out = first.data();
  for (std::size_t i = 0; i < sum.size(); ++i) out[i] = static_cast<float>(sum[i] / static_cast<double>(k));
  return first;
}

Tensor forward(std::span<const std::uint32_t> tokens, const ProgrammedModel& model) {
  const ModelConfig& cfg = model.cfg;
  if (tokens.empty()) throw ShapeError("forward: empty token sequence");
  Tensor x(tokens.size(), cfg.d_model);
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (tokens[i] >= cfg.vocab) {
      throw ShapeError("forward: token id " + std::to_string(tokens[i]) + " >= vocab " + std::to_string(cfg.vocab));
    }
    auto src = model.embed.row(tokens[i]);
    std::copy(src.begin(), src.end(), x.row(i).begin());
  }

  for (const ProgrammedLayer& layer : model.layers) {
    auto attn_block = [&](const Tensor& in, std::size_t r) {
      return attention_forward(rms_norm(in, layer.attn_norm, cfg.norm_eps), layer.attn[r], cfg);
    };
    auto ffn_block = [&](const Tensor& in, std::size_t r) {
      return ffn_forward(rms_norm(in, layer.ffn_norm, cfg.norm_eps), layer.ffn[r], cfg);
    };

    if (layer.whole_layer) {
      x = replicate_and_average(
          [&](std::size_t r) {
            Tensor h = x;
            add_into(h, attn_block(x, r));
            Tensor out = h;
            add_into(out, ffn_block(h, r));
            return out;
          },
          layer.attn.size());
    } else {
      add_into(x, replicate_and_average([&](std::size_t r) { return attn_block(x, r); }, layer.attn.size()));
      add_into(x, replicate_and_average([&](std::size_t r) { return ffn_block(x, r); }, layer.ffn.size()));
    }
  }
  return matmul(rms_norm(x, model.final_norm, cfg.norm_eps), model.lm_head);
}

Tensor forward(std::span<const std::uint32_t> tokens, const ModelWeights& weights, const WeightProvider& provider,
               const ModelConfig& cfg, std::uint64_t forward_index) {
  return forward(tokens, program_model(weights, cfg, provider, forward_index));
}

std::size_t argmax(std::span<const float> row) {
  if (row.empty()) throw ShapeError("argmax: empty row");
  std::size_t best = 0;
  for (std::size_t i = 1; i < row.size(); ++i) {
    if (row[i] > row[best]) best = i;
  }
  return best;
}

std::vector<std::uint32_t> generate_greedy(std::span<const std::uint32_t> prompt, const ProgrammedModel& model,
                                           std::size_t max_new) {
  std::vector<std::uint32_t> seq(prompt.begin(), prompt.end());
  for (std::size_t s = 0; s < max_new; ++s) {
    const Tensor logits = forward(seq, model);
    seq.push_back(static_cast<std::uint32_t>(argmax(logits.row(logits.rows() - 1))));
  }
  return seq;
}

std::vector<std::uint32_t> generate_greedy(std::span<const std::uint32_t> prompt, const ModelWeights& weights,
                                           const WeightProvider& provider, const ModelConfig& cfg,
                                           std::size_t max_new) {
  if (!provider.redraws_per_forward()) {
    if (max_new == 0) return {prompt.begin(), prompt.end()};
    return generate_greedy(prompt, program_model(weights, cfg, provider), max_new);
  }
  std::vector<std::uint32_t> seq(prompt.begin(), prompt.end());
  for (std::size_t s = 0; s < max_new; ++s) {
    const Tensor logits = forward(seq, weights, provider, cfg, s);
    seq.push_back(static_cast<std::uint32_t>(argmax(logits.row(logits.rows() - 1))));
  }
  return seq;
}

}  // namespace cimfault
