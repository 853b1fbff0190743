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

#include "cimfault/cost.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "cimfault/errors.hpp"

namespace cimfault {

void CostParams::validate() const {
  const std::pair<const char*, double> fields[] = {
      {"cost.area_base", area_base},         {"cost.area_attn_copy", area_attn_copy},
      {"cost.area_ffn_copy", area_ffn_copy}, {"cost.e_cim_per_mac", e_cim_per_mac},
      {"cost.e_digital_per_token", e_digital_per_token}, {"cost.e_io_per_token", e_io_per_token}};
  for (auto [name, v] : fields) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError(name, "must be a finite value >= 0");
  }
}

ExtraCopies extra_copies(const RedundancySpec& red, std::size_t n_layers) {
  red.validate(n_layers);
  const double extra = static_cast<double>(red.factor) - 1.0;
  switch (red.target) {
    case RedundancyTarget::None:
      return {};
    case RedundancyTarget::Attention:
      return {extra, 0.0};
    case RedundancyTarget::Ffn:
      return {0.0, extra};
    case RedundancyTarget::LayerRange: {
      const double frac = static_cast<double>(red.last - red.first) / static_cast<double>(n_layers);
      return {extra * frac, extra * frac};
    }
  }
  return {};
}

AreaReport estimate_area(const ModelConfig& cfg, const RedundancySpec& red, const CostParams& params) {
  params.validate();
  const ExtraCopies copies = extra_copies(red, cfg.n_layers);
  AreaReport r;
  r.breakdown = {{"base", params.area_base},
                 {"attention_copies", copies.attention * params.area_attn_copy},
                 {"ffn_copies", copies.ffn * params.area_ffn_copy}};
  for (const auto& [_, v] : r.breakdown) r.total += v;
  return r;
}

MacCounts macs_per_token(const ModelConfig& cfg, const RedundancySpec& red) {
  red.validate(cfg.n_layers);
  const double d = static_cast<double>(cfg.d_model);
  const double attn_layer = 4.0 * d * d;
  const double ffn_layer = 3.0 * d * static_cast<double>(cfg.d_ffn);
  MacCounts m;
  for (std::size_t l = 0; l < cfg.n_layers; ++l) {
    m.attention += attn_layer * static_cast<double>(red.attention_replicas(l));
    m.ffn += ffn_layer * static_cast<double>(red.ffn_replicas(l));
  }
  m.head = d * static_cast<double>(cfg.vocab);
  return m;
}

EnergyReport estimate_energy(const ModelConfig& cfg, const RedundancySpec& red, const CostParams& params,
                             std::size_t in_tokens, std::size_t out_tokens) {
  params.validate();
  const MacCounts macs = macs_per_token(cfg, red);
  const double tokens = static_cast<double>(in_tokens) + static_cast<double>(out_tokens);
  EnergyReport r;
  r.breakdown = {{"cim_attention", tokens * macs.attention * params.e_cim_per_mac},
                 {"cim_ffn", tokens * macs.ffn * params.e_cim_per_mac},
                 {"cim_head", tokens * macs.head * params.e_cim_per_mac},
                 {"digital", tokens * params.e_digital_per_token},
                 {"io", tokens * params.e_io_per_token}};
  for (const auto& [_, v] : r.breakdown) r.total += v;
  return r;
}

AreaCalibration calibrate_area(std::span<const AreaObservation> observations, const CostParams& base) {
  if (observations.size() < 3) throw ConfigError("observations", "need at least 3 area observations");
  Eigen::MatrixXd design(observations.size(), 3);
  Eigen::VectorXd target(observations.size());
  for (std::size_t i = 0; i < observations.size(); ++i) {
    const auto& obs = observations[i];
    const ExtraCopies c = extra_copies(obs.spec, obs.n_layers);
    design.row(static_cast<Eigen::Index>(i)) << 1.0, c.attention, c.ffn;
    target(static_cast<Eigen::Index>(i)) = obs.area_mm2;
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  qr.setThreshold(1e-9);
  if (qr.rank() < 3) {
    throw ConfigError("observations", "observations do not determine base, attention and FFN areas (rank " +
                                          std::to_string(qr.rank()) + ")");
  }
  const Eigen::Vector3d x = qr.solve(target);
  AreaCalibration cal;
  cal.params = base;
  cal.params.area_base = x(0);
  cal.params.area_attn_copy = x(1);
  cal.params.area_ffn_copy = x(2);
  const Eigen::VectorXd resid = target - design * x;
  cal.residuals.assign(resid.data(), resid.data() + resid.size());
  return cal;
}

std::vector<AreaObservation> published_area_rows() {
  constexpr std::size_t kLayers = 28;
  return {
      {"Vanilla", RedundancySpec::none(), kLayers, 75.0},
      {"Attention x2", RedundancySpec::attention(2), kLayers, 103.0},
      {"Attention x4", RedundancySpec::attention(4), kLayers, 160.0},
      {"FFN x2", RedundancySpec::ffn(2), kLayers, 114.0},
      {"FFN x4", RedundancySpec::ffn(4), kLayers, 193.0},
      {"Layer 0-6 x2", RedundancySpec::layers(0, 7, 2), kLayers, 91.0},
      {"Layer 7-13 x2", RedundancySpec::layers(7, 14, 2), kLayers, 91.0},
      {"Layer 14-20 x2", RedundancySpec::layers(14, 21, 2), kLayers, 91.0},
      {"Layer 21-27 x2", RedundancySpec::layers(21, 28, 2), kLayers, 91.0},
  };
}

}  // namespace cimfault
