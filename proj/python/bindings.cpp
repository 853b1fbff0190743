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

// Python bindings for the core operations. Matrices cross the boundary as
// 2-D float32 NumPy arrays and are rounded to bf16 on the way in.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "cimfault/bf16.hpp"
#include "cimfault/cli.hpp"
#include "cimfault/cost.hpp"
#include "cimfault/errors.hpp"
#include "cimfault/fault.hpp"
#include "cimfault/harness.hpp"
#include "cimfault/matrix.hpp"
#include "cimfault/model.hpp"

namespace py = pybind11;
using namespace cimfault;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;

Matrix to_matrix(const FloatArray& a) {
  if (a.ndim() != 2) throw ShapeError("expected a 2-D array");
  return Matrix(a.shape(0), a.shape(1), std::span<const float>(a.data(), a.size()));
}

template <typename M>
py::array_t<float> to_array(const M& m) {
  py::array_t<float> out({m.rows(), m.cols()});
  std::copy(m.data().begin(), m.data().end(), out.mutable_data());
  return out;
}

TileShape tile_of(std::pair<std::size_t, std::size_t> t) { return {t.first, t.second}; }

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Weight fault injection and redundancy analysis for compute-in-memory transformer inference.";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
  py::register_exception<CodecError>(m, "CodecError", PyExc_ValueError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);

  m.def("encode_bf16", [](double x) { return encode_bf16(x).bits; }, py::arg("x"),
        "Round to nearest even bf16; returns the 16-bit pattern.");
  m.def("encode_bf16_saturating", [](double x) { return encode_bf16_saturating(x).bits; }, py::arg("x"));
  m.def("decode_bf16", [](std::uint16_t bits) { return decode_bf16(Bf16Word{bits}); }, py::arg("bits"));
  m.def("round_to_bf16", [](double x) { return round_to_bf16(x); }, py::arg("x"));

  m.def(
      "inject_block_gaussian",
      [](const FloatArray& w, double sigma, std::uint64_t seed, std::pair<std::size_t, std::size_t> tile) {
        return to_array(inject_block_gaussian(to_matrix(w), {sigma, tile_of(tile), Redraw::PerProgramming},
                                              RngKey(seed)));
      },
      py::arg("w"), py::arg("sigma"), py::arg("seed") = 0, py::arg("tile") = std::pair<std::size_t, std::size_t>{64, 64});
  m.def(
      "apply_saf",
      [](const FloatArray& w, double p, std::uint64_t seed) {
        return to_array(apply_saf(to_matrix(w), SafSpec{p}, RngKey(seed)));
      },
      py::arg("w"), py::arg("p"), py::arg("seed") = 0);
  m.def(
      "program_weights",
      [](const FloatArray& w, double sigma, double p, std::uint64_t seed, std::pair<std::size_t, std::size_t> tile) {
        return to_array(
            program_weights(to_matrix(w), {sigma, tile_of(tile), Redraw::PerProgramming}, SafSpec{p}, RngKey(seed))
                .w_star);
      },
      py::arg("w"), py::arg("sigma"), py::arg("p"), py::arg("seed") = 0,
      py::arg("tile") = std::pair<std::size_t, std::size_t>{64, 64}, "Gaussian noise, then stuck-at faults.");

  py::class_<ModelConfig>(m, "ModelConfig")
      .def(py::init<>())
      .def_readwrite("n_layers", &ModelConfig::n_layers)
      .def_readwrite("d_model", &ModelConfig::d_model)
      .def_readwrite("n_heads", &ModelConfig::n_heads)
      .def_readwrite("head_dim", &ModelConfig::head_dim)
      .def_readwrite("d_ffn", &ModelConfig::d_ffn)
      .def_readwrite("vocab", &ModelConfig::vocab)
      .def_readwrite("rope_base", &ModelConfig::rope_base)
      .def_readwrite("norm_eps", &ModelConfig::norm_eps)
      .def("validate", &ModelConfig::validate);

  m.def(
      "toy_logits",
      [](const std::vector<std::uint32_t>& tokens, const ModelConfig& cfg, std::uint64_t toy_seed, double sigma,
         double p, std::uint64_t fault_seed, const std::string& redundancy) {
        const ModelWeights w = make_toy_weights(cfg, toy_seed);
        WeightProvider provider = WeightProvider::clean();
        if (sigma > 0.0 || p > 0.0) {
          provider = WeightProvider::faulted({sigma, {64, 64}, Redraw::PerProgramming}, {p}, RngKey(fault_seed));
          const RedundancySpec red = RedundancySpec::parse(redundancy, cfg.n_layers);
          if (red.active()) provider = WeightProvider::redundant(provider, red);
        }
        return to_array(forward(tokens, w, provider, cfg));
      },
      py::arg("tokens"), py::arg("cfg") = ModelConfig{}, py::arg("toy_seed") = 1234, py::arg("sigma") = 0.0,
      py::arg("p") = 0.0, py::arg("fault_seed") = 0, py::arg("redundancy") = "none",
      "Logits of the toy model, clean or under faults.");

  m.def(
      "compare_outputs",
      [](const FloatArray& clean, const FloatArray& faulted) {
        auto t = [](const FloatArray& a) {
          if (a.ndim() != 2) throw ShapeError("expected a 2-D array");
          return Tensor(a.shape(0), a.shape(1), std::vector<float>(a.data(), a.data() + a.size()));
        };
        const auto r = compare_outputs(t(clean), t(faulted));
        return py::make_tuple(r.rel_logit_err, r.top1_agreement);
      },
      py::arg("clean"), py::arg("faulted"), "Returns (relative logit error, top-1 agreement).");

  m.def(
      "estimate_area",
      [](const std::string& redundancy, std::size_t n_layers) {
        ModelConfig cfg;
        cfg.n_layers = n_layers;
        return estimate_area(cfg, RedundancySpec::parse(redundancy, n_layers), CostParams{}).total;
      },
      py::arg("redundancy"), py::arg("n_layers") = 28, "Area in mm^2 with the default calibrated parameters.");
  m.def(
      "estimate_energy",
      [](const std::string& redundancy, std::size_t in_tokens, std::size_t out_tokens, const ModelConfig& cfg) {
        return estimate_energy(cfg, RedundancySpec::parse(redundancy, cfg.n_layers), CostParams{}, in_tokens,
                               out_tokens)
            .total;
      },
      py::arg("redundancy"), py::arg("in_tokens"), py::arg("out_tokens"), py::arg("cfg") = ModelConfig{});
  m.def(
      "calibrate_area",
      [](const std::vector<std::tuple<std::string, std::size_t, double>>& rows) {
        std::vector<AreaObservation> obs;
        for (const auto& [spec, n_layers, area] : rows) {
          obs.push_back({spec, RedundancySpec::parse(spec, n_layers), n_layers, area});
        }
        const auto fit = calibrate_area(obs);
        py::dict d;
        d["area_base"] = fit.params.area_base;
        d["area_attn_copy"] = fit.params.area_attn_copy;
        d["area_ffn_copy"] = fit.params.area_ffn_copy;
        d["residuals"] = fit.residuals;
        return d;
      },
      py::arg("rows"), "Least-squares fit from (redundancy, n_layers, area_mm2) rows.");

  m.def(
      "run_experiment",
      [](const std::string& config_text, bool sweep, std::size_t workers, const std::string& format) {
        const ExperimentConfig cfg = parse_config(config_text);
        RunReport report;
        {
          py::gil_scoped_release release;
          report = sweep ? run_sweep(cfg, {workers}) : run_experiment(cfg, {workers});
        }
        if (format != "csv" && format != "json") throw ConfigError("format", "expected csv or json");
        return format_report(report, format == "csv" ? ReportFormat::Csv : ReportFormat::Json);
      },
      py::arg("config_text"), py::arg("sweep") = false, py::arg("workers") = 1, py::arg("format") = "json",
      "Run an experiment from INI text and return the report.");

  m.def(
      "cli_main",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        const int code = cli_main(args, out, err);
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Run a CLI subcommand; returns (exit code, stdout, stderr).");

  m.attr("__version__") = "0.1.0";
}
