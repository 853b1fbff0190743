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

#include "cimfault/harness.hpp"

#include <algorithm>
#include <atomic>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <exception>
#include <map>
#include <mutex>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>
#include <thread>

#include "cimfault/errors.hpp"

namespace cimfault {
namespace {

namespace pt = boost::property_tree;

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

template <typename T>
T parse_number(const std::string& field, const std::string& text) {
  const std::string t = trim(text);
  T v{};
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || ec != std::errc{} || ptr != t.data() + t.size()) {
    throw ConfigError(field, "cannot parse '" + t + "' as a number");
  }
  return v;
}

bool parse_bool(const std::string& field, const std::string& text) {
  const std::string t = trim(text);
  if (t == "true" || t == "yes" || t == "1") return true;
  if (t == "false" || t == "no" || t == "0") return false;
  throw ConfigError(field, "expected true or false, got '" + t + "'");
}

// A config section: key lookup plus a record of which keys were consumed,
// so leftovers can be reported as unknown.
class Section {
 public:
  Section(std::string name, const pt::ptree* tree) : name_(std::move(name)), tree_(tree) {}

  std::optional<std::string> get(const std::string& key) {
    seen_.insert(key);
    if (!tree_) return std::nullopt;
    auto child = tree_->get_child_optional(pt::ptree::path_type(key, '\0'));
    if (!child) return std::nullopt;
    return trim(child->data());
  }

  std::string field(const std::string& key) const { return name_ + "." + key; }

  template <typename T>
  void number(const std::string& key, T& out) {
    if (auto v = get(key)) out = parse_number<T>(field(key), *v);
  }

  void check_unknown() const {
    if (!tree_) return;
    for (const auto& [key, _] : *tree_) {
      if (!seen_.contains(key)) throw ConfigError(field(key), "unknown key");
    }
  }

 private:
  std::string name_;
  const pt::ptree* tree_;
  std::set<std::string> seen_;
};

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

double round9(double v) { return std::strtod(format_double(v).c_str(), nullptr); }

struct PromptResult {
  Tensor logits;
  std::vector<std::uint32_t> continuation;
};

// Logits over the prompt plus a greedy continuation. The first decode step
// reuses the prompt forward pass.
PromptResult evaluate_prompt(std::span<const std::uint32_t> prompt, const ProgrammedModel& pm,
                             std::size_t max_new) {
  PromptResult res{forward(prompt, pm), {}};
  if (max_new == 0) return res;
  res.continuation.push_back(static_cast<std::uint32_t>(argmax(res.logits.row(res.logits.rows() - 1))));
  std::vector<std::uint32_t> seq(prompt.begin(), prompt.end());
  seq.push_back(res.continuation.back());
  auto rest = generate_greedy(seq, pm, max_new - 1);
  res.continuation.assign(rest.begin() + static_cast<std::ptrdiff_t>(prompt.size()), rest.end());
  return res;
}

Tensor stack_rows(const std::vector<Tensor>& parts) {
  std::size_t rows = 0;
  for (const auto& p : parts) rows += p.rows();
  std::vector<float> data;
  data.reserve(rows * parts.front().cols());
  for (const auto& p : parts) data.insert(data.end(), p.data().begin(), p.data().end());
  return Tensor(rows, parts.front().cols(), std::move(data));
}

struct CleanReference {
  Tensor logits;
  std::vector<std::vector<std::uint32_t>> continuations;
};

struct WorkUnit {
  std::size_t redundancy_index;
  std::size_t sigma_index;
  std::size_t run;
};

// Parses a redundancy entry, re-labelling errors with the config field.
RedundancySpec parse_redundancy(const std::string& text, std::size_t n_layers, const std::string& field) {
  try {
    return RedundancySpec::parse(text, n_layers);
  } catch (const ConfigError& e) {
    throw ConfigError(field, e.detail());
  }
}

RunReport execute(const ExperimentConfig& cfg, const std::vector<std::string>& redundancies, const std::string& field,
                  const ExecutionOptions& exec) {
  cfg.validate();
  const LoadedModel model = load_model(cfg);
  const auto prompts = cfg.prompts.empty() ? default_prompts(model.cfg.vocab) : cfg.prompts;
  for (std::size_t i = 0; i < prompts.size(); ++i) {
    for (auto tok : prompts[i]) {
      if (tok >= model.cfg.vocab) {
        throw ConfigError("experiment.prompts", "token " + std::to_string(tok) + " in prompt " + std::to_string(i) +
                                                     " exceeds vocab " + std::to_string(model.cfg.vocab));
      }
    }
  }
  std::vector<RedundancySpec> specs;
  for (const auto& r : redundancies) specs.push_back(parse_redundancy(r, model.cfg.n_layers, field));

  CleanReference clean;
  {
    const ProgrammedModel pm = program_model(model.weights, model.cfg, WeightProvider::clean());
    std::vector<Tensor> parts;
    for (const auto& p : prompts) {
      auto res = evaluate_prompt(p, pm, cfg.max_new_tokens);
      parts.push_back(std::move(res.logits));
      clean.continuations.push_back(std::move(res.continuation));
    }
    clean.logits = stack_rows(parts);
  }

  std::size_t in_tokens = 0;
  for (const auto& p : prompts) in_tokens += p.size();

  std::vector<WorkUnit> units;
  for (std::size_t ri = 0; ri < specs.size(); ++ri) {
    for (std::size_t si = 0; si < cfg.sigma_grid.size(); ++si) {
      for (std::size_t r = 0; r < cfg.n_runs; ++r) units.push_back({ri, si, r});
    }
  }

  std::vector<RunRecord> records(units.size());
  auto run_unit = [&](std::size_t u) {
    const WorkUnit& w = units[u];
    const RedundancySpec& red = specs[w.redundancy_index];
    const std::uint64_t seed = run_seed(cfg, w.run);
    const NoiseSpec noise{cfg.sigma_grid[w.sigma_index], cfg.tile, cfg.redraw};
    WeightProvider provider = WeightProvider::faulted(noise, SafSpec{cfg.saf_p}, RngKey(seed), cfg.fault_embeddings);
    if (red.active()) provider = WeightProvider::redundant(provider, red, cfg.averaging);

    std::vector<Tensor> parts;
    std::size_t divergence = cfg.max_new_tokens;
    std::size_t out_tokens = 0;
    std::optional<ProgrammedModel> fixed;
    if (!provider.redraws_per_forward()) fixed = program_model(model.weights, model.cfg, provider);
    for (std::size_t i = 0; i < prompts.size(); ++i) {
      PromptResult res;
      if (fixed) {
        res = evaluate_prompt(prompts[i], *fixed, cfg.max_new_tokens);
      } else {
        res.logits = forward(prompts[i], model.weights, provider, model.cfg, 0);
        auto full = generate_greedy(prompts[i], model.weights, provider, model.cfg, cfg.max_new_tokens);
        res.continuation.assign(full.begin() + static_cast<std::ptrdiff_t>(prompts[i].size()), full.end());
      }
      const auto& ref = clean.continuations[i];
      for (std::size_t t = 0; t < res.continuation.size(); ++t) {
        if (res.continuation[t] != ref[t]) {
          divergence = std::min(divergence, t);
          break;
        }
      }
      out_tokens += res.continuation.size();
      parts.push_back(std::move(res.logits));
    }

    const ComparisonMetrics m = compare_outputs(clean.logits, stack_rows(parts));
    RunRecord& rec = records[u];
    rec.redundancy = red.to_string();
    rec.sigma = noise.sigma;
    rec.saf_p = cfg.saf_p;
    rec.run = w.run;
    rec.run_seed = seed;
    rec.rel_logit_err = m.rel_logit_err;
    rec.top1_agreement = m.top1_agreement;
    rec.divergence_pos = divergence;
    rec.out_tokens = out_tokens;
    rec.energy_j = estimate_energy(model.cfg, red, cfg.cost, in_tokens, out_tokens).total;
    rec.area_mm2 = estimate_area(model.cfg, red, cfg.cost).total;
  };

  const std::size_t workers = std::max<std::size_t>(1, std::min(exec.workers, units.size()));
  if (workers == 1) {
    for (std::size_t u = 0; u < units.size(); ++u) run_unit(u);
  } else {
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < workers; ++t) {
      pool.emplace_back([&] {
        for (std::size_t u = next++; u < units.size(); u = next++) {
          try {
            run_unit(u);
          } catch (...) {
            std::lock_guard lock(failure_mutex);
            if (!failure) failure = std::current_exception();
          }
        }
      });
    }
    pool.clear();
    if (failure) std::rethrow_exception(failure);
  }

  RunReport report;
  report.runs = std::move(records);
  report.aggregates = aggregate_runs(report.runs);
  return report;
}

nlohmann::ordered_json summary_json(const MetricSummary& s) {
  return {{"mean", round9(s.mean)}, {"std", round9(s.std)}};
}

}  // namespace

void ExperimentConfig::validate() const {
  // A weight file fixes the shapes; they are checked once it is loaded.
  if (!weights_path) {
    model.validate();
    parse_redundancy(redundancy, model.n_layers, "experiment.redundancy");
    for (const auto& r : redundancy_grid) parse_redundancy(r, model.n_layers, "experiment.redundancy_grid");
  } else if (model.n_heads == 0) {
    throw ConfigError("model.n_heads", "must be >= 1");
  }
  if (sigma_grid.empty()) throw ConfigError("noise.sigma_grid", "must list at least one value");
  for (double s : sigma_grid) {
    if (!(s >= 0.0) || !std::isfinite(s)) throw ConfigError("noise.sigma_grid", "values must be finite and >= 0");
  }
  if (!(saf_p >= 0.0 && saf_p <= 1.0)) throw ConfigError("noise.saf_p", "must lie in [0, 1]");
  if (tile.m == 0 || tile.n == 0) throw ConfigError("noise.tile", "extents must be positive");
  if (n_runs == 0) throw ConfigError("experiment.n_runs", "must be >= 1");
  if (redundancy_grid.empty()) throw ConfigError("experiment.redundancy_grid", "must list at least one entry");
  for (const auto& p : prompts) {
    if (p.empty()) throw ConfigError("experiment.prompts", "prompts must not be empty");
  }
  cost.validate();
}

ExperimentConfig parse_config(const std::string& text, const std::filesystem::path& base_dir) {
  pt::ptree tree;
  {
    std::istringstream in(text);
    try {
      pt::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
      throw ConfigError("line " + std::to_string(e.line()), e.message());
    }
  }

  const std::set<std::string> known_sections{"model", "noise", "experiment", "cost", "output"};
  for (const auto& [name, child] : tree) {
    if (!known_sections.contains(name)) {
      throw ConfigError(name, child.empty() ? "keys must live inside a section" : "unknown section");
    }
  }
  auto section = [&](const std::string& name) {
    auto child = tree.get_child_optional(name);
    return Section(name, child ? &*child : nullptr);
  };

  ExperimentConfig cfg;

  Section model = section("model");
  if (auto v = model.get("weights"); v && !v->empty()) {
    std::filesystem::path p(*v);
    cfg.weights_path = p.is_relative() && !base_dir.empty() ? base_dir / p : p;
  }
  model.number("toy_seed", cfg.toy_seed);
  model.number("n_layers", cfg.model.n_layers);
  model.number("d_model", cfg.model.d_model);
  model.number("n_heads", cfg.model.n_heads);
  model.number("head_dim", cfg.model.head_dim);
  model.number("d_ffn", cfg.model.d_ffn);
  model.number("vocab", cfg.model.vocab);
  model.number("rope_base", cfg.model.rope_base);
  model.number("norm_eps", cfg.model.norm_eps);
  if (auto v = model.get("fault_embeddings")) cfg.fault_embeddings = parse_bool(model.field("fault_embeddings"), *v);
  model.check_unknown();

  Section noise = section("noise");
  if (auto v = noise.get("sigma_grid")) {
    cfg.sigma_grid.clear();
    for (const auto& item : split(*v, ',')) cfg.sigma_grid.push_back(parse_number<double>(noise.field("sigma_grid"), item));
  }
  noise.number("saf_p", cfg.saf_p);
  if (auto v = noise.get("tile")) {
    const auto parts = split(*v, 'x');
    if (parts.size() != 2) throw ConfigError(noise.field("tile"), "expected MxN, got '" + *v + "'");
    cfg.tile = {parse_number<std::size_t>(noise.field("tile"), parts[0]),
                parse_number<std::size_t>(noise.field("tile"), parts[1])};
  }
  if (auto v = noise.get("redraw")) {
    if (*v == "per-programming") {
      cfg.redraw = Redraw::PerProgramming;
    } else if (*v == "per-forward") {
      cfg.redraw = Redraw::PerForward;
    } else {
      throw ConfigError(noise.field("redraw"), "expected per-programming or per-forward, got '" + *v + "'");
    }
  }
  noise.check_unknown();

  Section exp = section("experiment");
  exp.number("n_runs", cfg.n_runs);
  exp.number("base_seed", cfg.base_seed);
  if (auto v = exp.get("redundancy")) cfg.redundancy = *v;
  if (auto v = exp.get("redundancy_grid")) cfg.redundancy_grid = split(*v, ',');
  if (auto v = exp.get("averaging")) {
    if (*v == "outputs") {
      cfg.averaging = Averaging::Outputs;
    } else if (*v == "weights") {
      cfg.averaging = Averaging::Weights;
    } else {
      throw ConfigError(exp.field("averaging"), "expected outputs or weights, got '" + *v + "'");
    }
  }
  if (auto v = exp.get("prompts"); v && !v->empty()) {
    for (const auto& prompt : split(*v, ';')) {
      std::vector<std::uint32_t> toks;
      std::istringstream in(prompt);
      std::string tok;
      while (in >> tok) toks.push_back(parse_number<std::uint32_t>(exp.field("prompts"), tok));
      cfg.prompts.push_back(std::move(toks));
    }
  }
  exp.number("max_new_tokens", cfg.max_new_tokens);
  exp.check_unknown();

  Section cost = section("cost");
  cost.number("area_base", cfg.cost.area_base);
  cost.number("area_attn_copy", cfg.cost.area_attn_copy);
  cost.number("area_ffn_copy", cfg.cost.area_ffn_copy);
  cost.number("e_cim_per_mac", cfg.cost.e_cim_per_mac);
  cost.number("e_digital_per_token", cfg.cost.e_digital_per_token);
  cost.number("e_io_per_token", cfg.cost.e_io_per_token);
  cost.check_unknown();

  Section out = section("output");
  if (auto v = out.get("csv")) cfg.csv_path = *v;
  if (auto v = out.get("json")) cfg.json_path = *v;
  out.check_unknown();

  // Counts that do not parse as a model config are reported before anything
  // else touches them.
  cfg.validate();
  for (const auto& r : cfg.redundancy_grid) {
    if (r.empty()) throw ConfigError("experiment.redundancy_grid", "empty entry");
  }
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.parent_path());
}

std::vector<std::vector<std::uint32_t>> default_prompts(std::size_t vocab) {
  const KeyedStream stream(RngKey(0).child("default-prompts"));
  std::vector<std::vector<std::uint32_t>> prompts(4);
  for (std::size_t i = 0; i < prompts.size(); ++i) {
    for (std::size_t j = 0; j < 8; ++j) {
      prompts[i].push_back(static_cast<std::uint32_t>(stream.block(i * 8 + j)[0] % vocab));
    }
  }
  return prompts;
}

LoadedModel load_model(const ExperimentConfig& cfg) {
  if (!cfg.weights_path) return {cfg.model, make_toy_weights(cfg.model, cfg.toy_seed)};
  const auto tensors = read_container(*cfg.weights_path);
  const ModelConfig mc = infer_config(tensors, cfg.model);
  return {mc, ModelWeights::from_tensors(tensors, mc)};
}

ComparisonMetrics compare_outputs(const Tensor& clean, const Tensor& faulted) {
  if (clean.rows() != faulted.rows() || clean.cols() != faulted.cols()) {
    throw ShapeError("compare_outputs: logit shapes differ");
  }
  double diff2 = 0.0;
  double ref2 = 0.0;
  auto a = clean.data();
  auto b = faulted.data();
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - b[i];
    diff2 += d * d;
    ref2 += static_cast<double>(a[i]) * a[i];
  }
  ComparisonMetrics m;
  if (ref2 > 0.0) {
    m.rel_logit_err = std::sqrt(diff2) / std::sqrt(ref2);
  } else {
    m.rel_logit_err = diff2 > 0.0 ? INFINITY : 0.0;
  }
  std::size_t agree = 0;
  for (std::size_t r = 0; r < clean.rows(); ++r) {
    if (argmax(clean.row(r)) == argmax(faulted.row(r))) ++agree;
  }
  m.top1_agreement = clean.rows() == 0 ? 1.0 : static_cast<double>(agree) / static_cast<double>(clean.rows());
  return m;
}

MetricSummary summarize(const std::vector<double>& values) {
  MetricSummary s;
  if (values.empty()) return s;
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return s;
}

std::vector<AggregateRecord> aggregate_runs(const std::vector<RunRecord>& runs) {
  std::vector<AggregateRecord> out;
  std::size_t i = 0;
  while (i < runs.size()) {
    std::size_t j = i;
    while (j < runs.size() && runs[j].redundancy == runs[i].redundancy && runs[j].sigma == runs[i].sigma) ++j;
    auto collect = [&](auto member) {
      std::vector<double> v;
      for (std::size_t k = i; k < j; ++k) v.push_back(static_cast<double>(runs[k].*member));
      return summarize(v);
    };
    AggregateRecord a;
    a.redundancy = runs[i].redundancy;
    a.sigma = runs[i].sigma;
    a.n_runs = j - i;
    a.rel_logit_err = collect(&RunRecord::rel_logit_err);
    a.top1_agreement = collect(&RunRecord::top1_agreement);
    a.divergence_pos = collect(&RunRecord::divergence_pos);
    a.out_tokens = collect(&RunRecord::out_tokens);
    a.energy_j = collect(&RunRecord::energy_j);
    a.area_mm2 = runs[i].area_mm2;
    out.push_back(std::move(a));
    i = j;
  }
  return out;
}

std::uint64_t run_seed(const ExperimentConfig& cfg, std::size_t run) { return cfg.base_seed + run; }

RunReport run_experiment(const ExperimentConfig& cfg, const ExecutionOptions& exec) {
  return execute(cfg, {cfg.redundancy}, "experiment.redundancy", exec);
}

RunReport run_sweep(const ExperimentConfig& cfg, const ExecutionOptions& exec) {
  return execute(cfg, cfg.redundancy_grid, "experiment.redundancy_grid", exec);
}

std::string format_report(const RunReport& report, ReportFormat format) {
  if (format == ReportFormat::Csv) {
    std::string out =
        "run_seed,sigma,saf_p,redundancy,rel_logit_err,top1_agreement,divergence_pos,out_tokens,energy_j,area_mm2\n";
    for (const auto& r : report.runs) {
      out += std::to_string(r.run_seed) + "," + format_double(r.sigma) + "," + format_double(r.saf_p) + "," +
             r.redundancy + "," + format_double(r.rel_logit_err) + "," + format_double(r.top1_agreement) + "," +
             std::to_string(r.divergence_pos) + "," + std::to_string(r.out_tokens) + "," +
             format_double(r.energy_j) + "," + format_double(r.area_mm2) + "\n";
    }
    return out;
  }

  nlohmann::ordered_json runs = nlohmann::ordered_json::array();
  for (const auto& r : report.runs) {
    runs.push_back({{"run_seed", r.run_seed},
                    {"sigma", round9(r.sigma)},
                    {"saf_p", round9(r.saf_p)},
                    {"redundancy", r.redundancy},
                    {"run", r.run},
                    {"rel_logit_err", round9(r.rel_logit_err)},
                    {"top1_agreement", round9(r.top1_agreement)},
                    {"divergence_pos", r.divergence_pos},
                    {"out_tokens", r.out_tokens},
                    {"energy_j", round9(r.energy_j)},
                    {"area_mm2", round9(r.area_mm2)}});
  }
  nlohmann::ordered_json aggs = nlohmann::ordered_json::array();
  for (const auto& a : report.aggregates) {
    aggs.push_back({{"redundancy", a.redundancy},
                    {"sigma", round9(a.sigma)},
                    {"n_runs", a.n_runs},
                    {"rel_logit_err", summary_json(a.rel_logit_err)},
                    {"top1_agreement", summary_json(a.top1_agreement)},
                    {"divergence_pos", summary_json(a.divergence_pos)},
                    {"out_tokens", summary_json(a.out_tokens)},
                    {"energy_j", summary_json(a.energy_j)},
                    {"area_mm2", round9(a.area_mm2)}});
  }
  nlohmann::ordered_json doc = {
      {"runs", std::move(runs)},
      {"aggregates", std::move(aggs)},
      {"gpu_baseline", {{"area_mm2", kGpuBaselineAreaMm2}, {"energy_j", kGpuBaselineEnergyJ}}}};
  return doc.dump(2) + "\n";
}

void emit_report(const RunReport& report, ReportFormat format, const std::filesystem::path& path) {
  const std::string text = format_report(report, format);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write report '" + path.string() + "'");
  out << text;
  if (!out) throw IoError("failed writing report '" + path.string() + "'");
}

std::vector<NamedTensor> inject_tensors(std::span<const NamedTensor> tensors, const ModelConfig& cfg,
                                        const NoiseSpec& noise, const SafSpec& saf, std::uint64_t seed,
                                        bool fault_embeddings) {
  const WeightProvider provider = WeightProvider::faulted(noise, saf, RngKey(seed), fault_embeddings);
  const auto names = faultable_tensor_names(cfg, fault_embeddings);
  const std::set<std::string> faultable(names.begin(), names.end());
  std::vector<NamedTensor> out;
  for (const auto& t : tensors) {
    if (faultable.contains(t.name)) {
      out.push_back(NamedTensor::from_matrix(t.name, provider.realize(t.to_matrix(), t.name, 0)));
    } else {
      out.push_back(t);
    }
  }
  return out;
}

}  // namespace cimfault
