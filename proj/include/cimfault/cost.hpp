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
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cimfault/model.hpp"

namespace cimfault {

// Per-unit costs. The area defaults are the fit to the published vanilla,
// Attention x2 and FFN x2 rows. The energy defaults are order-of-magnitude
// placeholders, not measured values.
struct CostParams {
  double area_base = 75.0;       // mm^2, non-replicable (digital region, periphery)
  double area_attn_copy = 28.0;  // mm^2 per extra copy of all attention weights
  double area_ffn_copy = 39.0;   // mm^2 per extra copy of all FFN weights
  double e_cim_per_mac = 1.0e-13;
  double e_digital_per_token = 2.0e-6;
  double e_io_per_token = 5.0e-7;

  void validate() const;

  friend bool operator==(const CostParams&, const CostParams&) = default;
};

// Reference row of the GPU deployment; reported for context only.
inline constexpr double kGpuBaselineAreaMm2 = 806.0;
inline constexpr double kGpuBaselineEnergyJ = 1.43;

struct CostReport {
  double total = 0.0;
  std::vector<std::pair<std::string, double>> breakdown;  // sums to total
};
using AreaReport = CostReport;
using EnergyReport = CostReport;

// Extra full-model weight copies implied by a redundancy spec. A layer range
// contributes (range length / n_layers) of a copy per extra replica.
struct ExtraCopies {
  double attention = 0.0;
  double ffn = 0.0;
};
ExtraCopies extra_copies(const RedundancySpec& red, std::size_t n_layers);

AreaReport estimate_area(const ModelConfig& cfg, const RedundancySpec& red, const CostParams& params);

// Crossbar multiply-accumulates per token, replicas included. Attention
// score and softmax work is digital and not counted here.
struct MacCounts {
  double attention = 0.0;
  double ffn = 0.0;
  double head = 0.0;

  double total() const { return attention + ffn + head; }
};
MacCounts macs_per_token(const ModelConfig& cfg, const RedundancySpec& red);

EnergyReport estimate_energy(const ModelConfig& cfg, const RedundancySpec& red, const CostParams& params,
                             std::size_t in_tokens, std::size_t out_tokens);

struct AreaObservation {
  std::string label;
  RedundancySpec spec;
  std::size_t n_layers = 0;
  double area_mm2 = 0.0;
};

struct AreaCalibration {
  CostParams params;              // area fields fitted, energy fields from `base`
  std::vector<double> residuals;  // observed - predicted, per observation
};

// Least-squares fit of (area_base, area_attn_copy, area_ffn_copy). Throws
// ConfigError when the observations do not pin down all three.
AreaCalibration calibrate_area(std::span<const AreaObservation> observations, const CostParams& base = {});

// The crossbar rows of the published redundancy table (28-layer model).
std::vector<AreaObservation> published_area_rows();

}  // namespace cimfault
