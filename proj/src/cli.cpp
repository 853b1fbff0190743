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

#include "cimfault/cli.hpp"

#include <CLI11.hpp>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <ostream>
#include <sstream>

#include "cimfault/cost.hpp"
#include "cimfault/errors.hpp"
#include "cimfault/harness.hpp"

namespace cimfault {
namespace {

constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

std::size_t workers_from_env() {
  const char* w = std::getenv("CIMFAULT_WORKERS");
  if (w == nullptr) return 1;
  std::size_t n = 0;
  const std::string_view s(w);
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), n);
  if (ec != std::errc{} || ptr != s.data() + s.size() || n == 0) {
    throw ConfigError("CIMFAULT_WORKERS", "expected a positive integer, got '" + std::string(s) + "'");
  }
  return n;
}

std::filesystem::path resolve_output(const std::filesystem::path& p, const std::string& output_dir) {
  if (p.is_absolute() || output_dir.empty()) return p;
  return std::filesystem::path(output_dir) / p;
}

std::vector<AreaObservation> read_observations(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open observations '" + path.string() + "'");
  std::vector<AreaObservation> obs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#' || line.starts_with("label,")) continue;
    std::vector<std::string> cols;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cols.push_back(cell);
    const std::string where = path.filename().string() + ":" + std::to_string(line_no);
    if (cols.size() != 4) throw ConfigError(where, "expected label,redundancy,n_layers,area_mm2");
    AreaObservation o;
    o.label = cols[0];
    try {
      o.n_layers = std::stoul(cols[2]);
      o.area_mm2 = std::stod(cols[3]);
    } catch (const std::exception&) {
      throw ConfigError(where, "bad number in '" + line + "'");
    }
    o.spec = RedundancySpec::parse(cols[1], o.n_layers);
    obs.push_back(std::move(o));
  }
  return obs;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

void print_aggregates(const RunReport& report, std::ostream& out) {
  out << "redundancy        sigma     runs  rel_logit_err (mean +- std)   top1_agreement  area_mm2  energy_j\n";
  for (const auto& a : report.aggregates) {
    char line[256];
    std::snprintf(line, sizeof line, "%-16s  %-8s  %4zu  %.6f +- %.6f          %.4f          %-8s  %s\n",
                  a.redundancy.c_str(), fmt(a.sigma).c_str(), a.n_runs, a.rel_logit_err.mean, a.rel_logit_err.std,
                  a.top1_agreement.mean, fmt(a.area_mm2).c_str(), fmt(a.energy_j.mean).c_str());
    out << line;
  }
}

}  // namespace

int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Compute-in-memory fault-injection simulator for transformer inference", "cimfault"};
  app.require_subcommand(1);

  std::string config_path;
  std::string output_dir;
  std::size_t workers = 0;
  auto add_run_options = [&](CLI::App* sub) {
    sub->add_option("config", config_path, "Experiment config file")->required();
    sub->add_option("--output-dir", output_dir, "Directory for relative report paths (env CIMFAULT_OUTPUT_DIR)");
    sub->add_option("--workers", workers, "Worker threads (env CIMFAULT_WORKERS)")->check(CLI::PositiveNumber);
  };
  CLI::App* run = app.add_subcommand("run", "Run one experiment (sigma grid x runs)");
  add_run_options(run);
  CLI::App* sweep = app.add_subcommand("sweep", "Run the sigma x redundancy grid");
  add_run_options(sweep);

  std::string observations_path;
  bool predict = false;
  CLI::App* calibrate = app.add_subcommand("calibrate-area", "Fit the linear area model to observations");
  calibrate->add_option("observations", observations_path, "CSV: label,redundancy,n_layers,area_mm2")->required();
  calibrate->add_flag("--predict", predict, "Also predict every published table row");

  std::string toy_path;
  std::uint64_t toy_seed = ExperimentConfig{}.toy_seed;
  ModelConfig toy_cfg;
  CLI::App* gen_toy = app.add_subcommand("gen-toy", "Write the default toy model weights");
  gen_toy->add_option("path", toy_path, "Output weight file")->required();
  gen_toy->add_option("--seed", toy_seed, "Initialization seed");
  gen_toy->add_option("--n-layers", toy_cfg.n_layers);
  gen_toy->add_option("--d-model", toy_cfg.d_model);
  gen_toy->add_option("--n-heads", toy_cfg.n_heads);
  gen_toy->add_option("--d-ffn", toy_cfg.d_ffn);
  gen_toy->add_option("--vocab", toy_cfg.vocab);

  std::string inject_in;
  std::string inject_out;
  double sigma = 0.02;
  double saf_p = 0.01;
  std::uint64_t seed = 0;
  std::string tile_text = "64x64";
  std::size_t n_heads = ModelConfig{}.n_heads;
  bool spare_embeddings = false;
  CLI::App* inject = app.add_subcommand("inject", "Fault-inject a weight file as run SEED would");
  inject->add_option("weights-in", inject_in)->required();
  inject->add_option("weights-out", inject_out)->required();
  inject->add_option("--sigma", sigma, "Gaussian noise level");
  inject->add_option("--saf-p", saf_p, "Per-mantissa-bit flip probability");
  inject->add_option("--seed", seed, "Run seed (base_seed + run index)");
  inject->add_option("--tile", tile_text, "Tile shape MxN");
  inject->add_option("--n-heads", n_heads, "Attention heads of the stored model");
  inject->add_flag("--no-fault-embeddings", spare_embeddings, "Leave embed and lm_head clean");

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  try {
    if (*run || *sweep) {
      ExperimentConfig cfg = load_config(config_path);
      if (output_dir.empty()) {
        if (const char* env = std::getenv("CIMFAULT_OUTPUT_DIR")) output_dir = env;
      }
      ExecutionOptions exec{workers != 0 ? workers : workers_from_env()};
      const RunReport report = *run ? run_experiment(cfg, exec) : run_sweep(cfg, exec);
      if (!output_dir.empty()) std::filesystem::create_directories(output_dir);
      const auto csv = resolve_output(cfg.csv_path, output_dir);
      const auto json = resolve_output(cfg.json_path, output_dir);
      emit_report(report, ReportFormat::Csv, csv);
      emit_report(report, ReportFormat::Json, json);
      print_aggregates(report, out);
      out << "wrote " << csv.string() << " and " << json.string() << "\n";
    } else if (*calibrate) {
      const auto obs = read_observations(observations_path);
      const AreaCalibration cal = calibrate_area(obs);
      out << "area_base = " << fmt(cal.params.area_base) << "\n"
          << "area_attn_copy = " << fmt(cal.params.area_attn_copy) << "\n"
          << "area_ffn_copy = " << fmt(cal.params.area_ffn_copy) << "\n";
      for (std::size_t i = 0; i < obs.size(); ++i) {
        out << "; residual " << obs[i].label << ": " << fmt(cal.residuals[i]) << "\n";
      }
      if (predict) {
        for (const auto& row : published_area_rows()) {
          const double pred = estimate_area(ModelConfig{.n_layers = row.n_layers}, row.spec, cal.params).total;
          out << "; predict " << row.label << ": " << fmt(pred) << " (published " << fmt(row.area_mm2) << ")\n";
        }
      }
    } else if (*gen_toy) {
      toy_cfg.head_dim = toy_cfg.n_heads == 0 ? 0 : toy_cfg.d_model / toy_cfg.n_heads;
      const ModelWeights w = make_toy_weights(toy_cfg, toy_seed);
      write_container(toy_path, w.to_tensors());
      out << "wrote toy model (" << toy_cfg.n_layers << " layers, d_model " << toy_cfg.d_model << ") to "
          << toy_path << "\n";
    } else if (*inject) {
      const auto x = tile_text.find('x');
      TileShape tile;
      try {
        if (x == std::string::npos) throw std::invalid_argument("tile");
        tile = {std::stoul(tile_text.substr(0, x)), std::stoul(tile_text.substr(x + 1))};
      } catch (const std::exception&) {
        throw ConfigError("--tile", "expected MxN, got '" + tile_text + "'");
      }
      const auto tensors = read_container(inject_in);
      ModelConfig base;
      base.n_heads = n_heads;
      const ModelConfig cfg = infer_config(tensors, base);
      const auto faulted = inject_tensors(tensors, cfg, NoiseSpec{sigma, tile, Redraw::PerProgramming},
                                          SafSpec{saf_p}, seed, !spare_embeddings);
      write_container(inject_out, faulted);
      out << "wrote faulted weights to " << inject_out << "\n";
    }
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return 0;
}

}  // namespace cimfault
