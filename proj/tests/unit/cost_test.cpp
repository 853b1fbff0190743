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

#include <gtest/gtest.h>

#include <numeric>

#include "cimfault/errors.hpp"

namespace cimfault {
namespace {

ModelConfig twenty_eight_layers() {
  ModelConfig cfg;
  cfg.n_layers = 28;
  return cfg;
}

double breakdown_sum(const CostReport& r) {
  return std::accumulate(r.breakdown.begin(), r.breakdown.end(), 0.0,
                         [](double s, const auto& kv) { return s + kv.second; });
}

std::vector<AreaObservation> fit_rows() {
  const auto all = published_area_rows();
  return {all[0], all[1], all[3]};  // Vanilla, Attention x2, FFN x2
}

TEST(Area, Examples) {
  const ModelConfig cfg = twenty_eight_layers();
  const CostParams params;
  EXPECT_DOUBLE_EQ(estimate_area(cfg, RedundancySpec::none(), params).total, 75.0);
  EXPECT_NEAR(estimate_area(cfg, RedundancySpec::attention(4), params).total, 160.0, 2.0);
  EXPECT_DOUBLE_EQ(estimate_area(cfg, RedundancySpec::layers(0, 7, 2), params).total, 75.0 + 0.25 * (28 + 39));
}

TEST(Area, BreakdownSumsToTotal) {
  const ModelConfig cfg = twenty_eight_layers();
  for (const auto& spec : {RedundancySpec::none(), RedundancySpec::ffn(4), RedundancySpec::layers(3, 17, 3)}) {
    const auto r = estimate_area(cfg, spec, {});
    EXPECT_DOUBLE_EQ(breakdown_sum(r), r.total);
  }
}

TEST(Area, AffineInCopies) {
  const ModelConfig cfg = twenty_eight_layers();
  const CostParams params{80.0, 30.0, 41.0};
  for (std::size_t k = 1; k < 6; ++k) {
    EXPECT_DOUBLE_EQ(estimate_area(cfg, RedundancySpec::attention(k + 1), params).total -
                         estimate_area(cfg, RedundancySpec::attention(k), params).total,
                     params.area_attn_copy);
    EXPECT_DOUBLE_EQ(estimate_area(cfg, RedundancySpec::ffn(k + 1), params).total -
                         estimate_area(cfg, RedundancySpec::ffn(k), params).total,
                     params.area_ffn_copy);
  }
}

TEST(Area, ExtraCopiesForLayerRange) {
  const auto c = extra_copies(RedundancySpec::layers(0, 7, 4), 28);
  EXPECT_DOUBLE_EQ(c.attention, 0.75);
  EXPECT_DOUBLE_EQ(c.ffn, 0.75);
}

TEST(Calibration, ThreeRowsSolveExactly) {
  const auto fit = calibrate_area(fit_rows());
  EXPECT_NEAR(fit.params.area_base, 75.0, 1e-9);
  EXPECT_NEAR(fit.params.area_attn_copy, 28.0, 1e-9);
  EXPECT_NEAR(fit.params.area_ffn_copy, 39.0, 1e-9);
  for (double r : fit.residuals) EXPECT_NEAR(r, 0.0, 1e-9);
  // Energy fields come from the base params untouched.
  EXPECT_EQ(fit.params.e_cim_per_mac, CostParams{}.e_cim_per_mac);
}

TEST(Calibration, PredictsRemainingRows) {
  const auto fit = calibrate_area(fit_rows());
  const ModelConfig cfg = twenty_eight_layers();
  EXPECT_NEAR(estimate_area(cfg, RedundancySpec::attention(4), fit.params).total, 159.0, 1e-9);
  EXPECT_NEAR(estimate_area(cfg, RedundancySpec::ffn(4), fit.params).total, 192.0, 1e-9);
  for (const auto& row : published_area_rows()) {
    EXPECT_NEAR(estimate_area(cfg, row.spec, fit.params).total, row.area_mm2, 2.0) << row.label;
  }
}

TEST(Calibration, RejectsRankDeficientSets) {
  auto rows = published_area_rows();
  // Only attention varies: the FFN column is all zero.
  const std::vector<AreaObservation> attn_only{rows[0], rows[1], rows[2]};
  EXPECT_THROW(calibrate_area(attn_only), ConfigError);
  const std::vector<AreaObservation> two{rows[0], rows[1]};
  EXPECT_THROW(calibrate_area(two), ConfigError);
  // Layer ranges add equal attention and FFN copies, so they are collinear
  // with each other and with the intercept.
  const std::vector<AreaObservation> layers{rows[0], rows[5], rows[6], rows[7]};
  EXPECT_THROW(calibrate_area(layers), ConfigError);
}

TEST(Calibration, AllRowsFitIsClose) {
  const auto rows = published_area_rows();
  ASSERT_EQ(rows.size(), 9u);
  const auto fit = calibrate_area(rows);
  ASSERT_EQ(fit.residuals.size(), rows.size());
  for (double r : fit.residuals) EXPECT_LT(std::abs(r), 2.0);
}

TEST(Energy, ZeroTokensIsZero) {
  const auto r = estimate_energy(ModelConfig{}, RedundancySpec::ffn(4), {}, 0, 0);
  EXPECT_EQ(r.total, 0.0);
}

TEST(Energy, FrozenDefaultValue) {
  // 4 layers at d=128, d_ffn=512, vocab=256: 262144 + 786432 + 32768 MACs per token.
  const auto macs = macs_per_token(ModelConfig{}, RedundancySpec::none());
  EXPECT_EQ(macs.attention, 262144.0);
  EXPECT_EQ(macs.ffn, 786432.0);
  EXPECT_EQ(macs.head, 32768.0);
  const auto r = estimate_energy(ModelConfig{}, RedundancySpec::none(), {}, 4, 8);
  EXPECT_NEAR(r.total, 12 * (1081344e-13 + 2.5e-6), 1e-18);
  EXPECT_NEAR(breakdown_sum(r), r.total, 1e-18);
}

TEST(Energy, MonotoneInTokensAndFactors) {
  const ModelConfig cfg;
  const CostParams p;
  EXPECT_GT(estimate_energy(cfg, {}, p, 4, 16).total, estimate_energy(cfg, {}, p, 4, 8).total);
  EXPECT_GE(estimate_energy(cfg, {}, p, 5, 8).total, estimate_energy(cfg, {}, p, 4, 8).total);
  for (std::size_t k = 1; k < 5; ++k) {
    EXPECT_GE(estimate_energy(cfg, RedundancySpec::attention(k + 1), p, 4, 8).total,
              estimate_energy(cfg, RedundancySpec::attention(k), p, 4, 8).total);
    EXPECT_GE(estimate_energy(cfg, RedundancySpec::ffn(k + 1), p, 4, 8).total,
              estimate_energy(cfg, RedundancySpec::ffn(k), p, 4, 8).total);
    EXPECT_GE(estimate_energy(cfg, RedundancySpec::layers(0, 2, k + 1), p, 4, 8).total,
              estimate_energy(cfg, RedundancySpec::layers(0, 2, k), p, 4, 8).total);
  }
}

double entry(const CostReport& r, const std::string& key) {
  for (const auto& [k, v] : r.breakdown) {
    if (k == key) return v;
  }
  ADD_FAILURE() << "missing breakdown key " << key;
  return 0.0;
}

TEST(Energy, FfnTimesFourQuadruplesFfnTerm) {
  const ModelConfig cfg;
  const auto one = estimate_energy(cfg, RedundancySpec::none(), {}, 10, 20);
  const auto four = estimate_energy(cfg, RedundancySpec::ffn(4), {}, 10, 20);
  EXPECT_DOUBLE_EQ(entry(four, "cim_ffn"), 4.0 * entry(one, "cim_ffn"));
  EXPECT_DOUBLE_EQ(entry(four, "cim_attention"), entry(one, "cim_attention"));
  EXPECT_DOUBLE_EQ(entry(four, "digital"), entry(one, "digital"));
}

TEST(CostParams, Validation) {
  CostParams p;
  p.area_base = -1.0;
  EXPECT_THROW(p.validate(), ConfigError);
  p = {};
  p.e_io_per_token = -1e-9;
  EXPECT_THROW(p.validate(), ConfigError);
}

}  // namespace
}  // namespace cimfault
