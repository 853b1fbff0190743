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
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cimfault/cost.hpp"
#include "cimfault/fault.hpp"
#include "cimfault/model.hpp"

namespace cimfault {

// Everything that determines an experiment. Defaults follow the reference
// protocol: 64x64 tiles, sigma in {0.005, 0.01, 0.015, 0.02}, p = 0.01 and
// five runs per setting.
struct ExperimentConfig {
  ModelConfig model;
  std::optional<std::filesystem::path> weights_path;  // toy model when empty
  std::uint64_t toy_seed = 1234;
  bool fault_embeddings = true;

  std::vector<double> sigma_grid{0.005, 0.01, 0.015, 0.02};
  double saf_p = 0.01;
  TileShape tile{64, 64};
  Redraw redraw = Redraw::PerProgramming;

  std::size_t n_runs = 5;
  std::uint64_t base_seed = 0;
  std::string redundancy = "none";                 // used by `run`
  std::vector<std::string> redundancy_grid{"none"};  // used by `sweep`
  Averaging averaging = Averaging::Outputs;
  std::vector<std::vector<std::uint32_t>> prompts;  // default_prompts() when empty
  std::size_t max_new_tokens = 8;

  CostParams cost;

  std::filesystem::path csv_path = "report.csv";
  std::filesystem::path json_path = "report.json";

  // Throws ConfigError with the dotted field path.
  void validate() const;
};

// Parses the INI-style config format. Relative weight paths resolve against
// `base_dir`. Unknown sections or keys are errors.
ExperimentConfig parse_config(const std::string& text, const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);

// Four prompts of eight tokens, fixed for a given vocabulary size.
std::vector<std::vector<std::uint32_t>> default_prompts(std::size_t vocab);

struct LoadedModel {
  ModelConfig cfg;
  ModelWeights weights;
};
LoadedModel load_model(const ExperimentConfig& cfg);

struct ComparisonMetrics {
  double rel_logit_err = 0.0;   // ||a - b|| / ||a||
  double top1_agreement = 1.0;  // fraction of rows with equal argmax
};
ComparisonMetrics compare_outputs(const Tensor& clean, const Tensor& faulted);

struct RunRecord {
  std::string redundancy;
  double sigma = 0.0;
  double saf_p = 0.0;
  std::size_t run = 0;
  std::uint64_t run_seed = 0;
  double rel_logit_err = 0.0;
  double top1_agreement = 1.0;
  std::size_t divergence_pos = 0;  // first differing generated token, min over prompts
  std::size_t out_tokens = 0;
  double energy_j = 0.0;
  double area_mm2 = 0.0;
};

struct MetricSummary {
  double mean = 0.0;
  double std = 0.0;  // sample (n - 1) deviation; 0 for a single run
};

struct AggregateRecord {
  std::string redundancy;
  double sigma = 0.0;
  std::size_t n_runs = 0;
  MetricSummary rel_logit_err;
  MetricSummary top1_agreement;
  MetricSummary divergence_pos;
  MetricSummary out_tokens;
  MetricSummary energy_j;
  double area_mm2 = 0.0;
};

struct RunReport {
  std::vector<RunRecord> runs;  // ordered by (redundancy, sigma, run)
  std::vector<AggregateRecord> aggregates;
};

MetricSummary summarize(const std::vector<double>& values);
std::vector<AggregateRecord> aggregate_runs(const std::vector<RunRecord>& runs);

// Seed of run r: base_seed + r. The faulted weights of that run are keyed by
// RngKey(run_seed).
std::uint64_t run_seed(const ExperimentConfig& cfg, std::size_t run);

struct ExecutionOptions {
  std::size_t workers = 1;  // results do not depend on this
};

// One experiment over cfg.sigma_grid x [0, n_runs) with cfg.redundancy.
RunReport run_experiment(const ExperimentConfig& cfg, const ExecutionOptions& exec = {});
// As run_experiment, for every entry of cfg.redundancy_grid.
RunReport run_sweep(const ExperimentConfig& cfg, const ExecutionOptions& exec = {});

enum class ReportFormat { Csv, Json };

std::string format_report(const RunReport& report, ReportFormat format);
// Throws IoError when the file cannot be written.
void emit_report(const RunReport& report, ReportFormat format, const std::filesystem::path& path);

// Fault-injects every crossbar tensor of a weight file as run `seed` would.
// Non-faultable tensors are copied unchanged.
std::vector<NamedTensor> inject_tensors(std::span<const NamedTensor> tensors, const ModelConfig& cfg,
                                        const NoiseSpec& noise, const SafSpec& saf, std::uint64_t seed,
                                        bool fault_embeddings);

}  // namespace cimfault
