// SPDX-License-Identifier: Apache-2.0
//
// Copyright 2026 The varirate Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Command-line front end: dataset generation, training, evaluation and the
// accounting/report tables.

#include <CLI11.hpp>
#include <fmt/format.h>

#include <cstdio>
#include <fstream>
#include <iostream>

#include "varirate/harness.hpp"
#include "varirate/json_io.hpp"

namespace vh = varirate::harness;
namespace vm = varirate::models;
namespace vq = varirate::quant;
namespace vc = varirate::channel;

namespace {

int gen_data(const std::string& scenario, std::uint64_t samples, std::uint64_t seed, const std::string& scale,
             const std::string& out) {
  auto cfg = scale == "full" ? vc::DatasetConfig::full() : vc::DatasetConfig::toy();
  cfg.scenario = vc::scenario_from_string(scenario);
  cfg.sample_count = samples;
  cfg.master_seed = seed;
  cfg.validate();
  vc::save_dataset(out, vc::generate_dataset(cfg));
  fmt::print("wrote {} {} samples ({}x{} antennas x subcarriers) to {}\n", samples, scenario, cfg.n_antennas,
             cfg.n_subcarriers, out);
  return 0;
}

void print_summary(const vh::ExperimentResult& r) {
  if (!r.history.epoch_loss.empty())
    fmt::print("training: {} epochs, best epoch {} (loss {:.6g}), eval-mode train loss {:.6g}\n",
               r.history.epoch_loss.size(), r.history.best_epoch + 1, r.history.best_loss, r.history.final_eval_loss);
  if (r.retrain_history)
    fmt::print("decoder retraining: {} epochs, best epoch {} (loss {:.6g})\n", r.retrain_history->epoch_loss.size(),
               r.retrain_history->best_epoch + 1, r.retrain_history->best_loss);
  for (const auto& g : r.grid)
    fmt::print("n={:<5} b={:<2} NMSE {:8.3f} dB{}\n", g.n, g.b, g.nmse_db,
               g.entropy_bits ? fmt::format("  entropy {:.4f} bits", *g.entropy_bits) : "");
}

int count_params(const std::string& model, int M, const std::string& scale) {
  vm::ModelVariant v;
  v.family = vm::family_from_string(model);
  v.scale = vm::scale_from_string(scale);
  v.M = M;
  v.validate();
  const nlohmann::json j = varirate::netcore::count_params(vm::build_config(v));
  std::cout << j.dump(2) << '\n';
  return 0;
}

int quantize_demo(const std::string& kind, int bits, double lo, double hi, int points, double a, double d_rel,
                  bool soft) {
  vq::QuantizerSpec spec;
  spec.kind = vq::kind_from_string(kind);
  spec.bits = bits;
  spec.a = a;
  spec.d_rel = d_rel;
  if (spec.kind == vq::Kind::mu_law) {
    spec.range_lo = lo;
    spec.range_hi = hi;
  }
  spec.validate();
  if (points < 2) throw vq::QuantError("need at least two points");
  std::vector<double> xs(static_cast<std::size_t>(points));
  for (int i = 0; i < points; ++i) xs[i] = lo + (hi - lo) * i / (points - 1);
  const auto out = vq::quantizer_forward(xs, spec, soft);
  const std::vector<double> ones(xs.size(), 1.0);
  const auto grad = vq::quantizer_backward(ones, spec, out.trace);
  std::cout << "x,y,dy_dx" << (out.payload.symbols.empty() ? "" : ",symbol") << '\n';
  for (std::size_t i = 0; i < xs.size(); ++i) {
    std::cout << fmt::format("{:.10g},{:.10g},{:.10g}", xs[i], out.values[i], grad[i]);
    if (!out.payload.symbols.empty()) std::cout << ',' << out.payload.symbols[i];
    std::cout << '\n';
  }
  return 0;
}

int report(const std::vector<std::string>& dirs, const std::string& out) {
  std::vector<vh::ExperimentResult> results;
  for (const auto& d : dirs) {
    std::ifstream is(std::filesystem::path(d) / "result.json");
    if (!is) throw vh::HarnessError("no result.json in " + d);
    results.push_back(vh::experiment_result_from_json(nlohmann::json::parse(is)));
  }
  vh::emit_report(results, out);
  std::ifstream txt(std::filesystem::path(out) / "report.txt");
  std::cout << txt.rdbuf();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"varirate: changeable-rate CSI feedback autoencoders with pluggable quantization"};
  app.set_version_flag("--version", vh::toolkit_version());
  app.require_subcommand(1);

  std::string scenario = "indoor", scale = "toy", count_scale = "full", out, config, checkpoint, model = "csinetpro", kind = "pqb";
  std::uint64_t samples = 2000, seed = 1;
  int M = 0, bits = 5, points = 65, epochs = -1;
  double lo = -6.0, hi = 6.0, a = 8.0, d_rel = 0.5;
  bool soft = false;
  std::vector<std::string> result_dirs;

  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic channel dataset");
  gen->add_option("--scenario", scenario, "indoor or outdoor")->check(CLI::IsMember({"indoor", "outdoor"}));
  gen->add_option("--samples", samples, "number of samples");
  gen->add_option("--seed", seed, "master seed");
  gen->add_option("--scale", scale, "toy or full dimensions")->check(CLI::IsMember({"toy", "full"}));
  gen->add_option("--out", out, "output dataset file")->required();

  auto* tr = app.add_subcommand("train", "Train, evaluate and persist an experiment");
  tr->add_option("--config", config, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
  tr->add_option("--out", out, "result directory")->required();

  auto* re = app.add_subcommand("retrain-decoder", "Retrain the decoder of a checkpoint on quantized codewords");
  re->add_option("--config", config, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
  re->add_option("--checkpoint", checkpoint, "pretrained checkpoint")->required()->check(CLI::ExistingFile);
  re->add_option("--epochs", epochs, "decoder epochs (default: train.retrain_epochs)");
  re->add_option("--out", out, "result directory")->required();

  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint on the config's grid");
  ev->add_option("--config", config, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
  ev->add_option("--checkpoint", checkpoint, "trained checkpoint")->required()->check(CLI::ExistingFile);
  ev->add_option("--out", out, "optional result directory");

  auto* cp = app.add_subcommand("count-params", "Print the parameter breakdown as JSON");
  cp->add_option("--model", model, "csinetpro or dualnetsph")->check(CLI::IsMember({"csinetpro", "dualnetsph"}));
  cp->add_option("--m", M, "codeword length (0 = maximum)");
  cp->add_option("--scale", count_scale, "full or toy")->check(CLI::IsMember({"toy", "full"}));

  auto* qd = app.add_subcommand("quantize-demo", "Print a quantizer's forward curve and gradient as CSV");
  qd->add_option("--kind", kind, "none, mu_law, passing_gradient, soft_to_hard or pqb");
  qd->add_option("--bits", bits, "quantization bits");
  qd->add_option("--lo", lo, "first input value");
  qd->add_option("--hi", hi, "last input value");
  qd->add_option("--points", points, "number of samples");
  qd->add_option("--a", a, "soft-to-hard sharpness");
  qd->add_option("--d-rel", d_rel, "surrogate support as a fraction of half a cell");
  qd->add_flag("--soft", soft, "use the training-time soft forward");

  auto* rp = app.add_subcommand("report", "Render tables and CSVs from result directories");
  rp->add_option("--results", result_dirs, "result directories");
  rp->add_option("--out", out, "report directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) return gen_data(scenario, samples, seed, scale, out);
    if (*tr) {
      auto cfg = vh::load_experiment_config(config);
      print_summary(vh::run_experiment(cfg, out));
      fmt::print("results written to {}\n", out);
      return 0;
    }
    if (*re) {
      auto cfg = vh::load_experiment_config(config);
      cfg.checkpoint = checkpoint;
      if (epochs >= 0) cfg.retrain_epochs = epochs;
      if (cfg.retrain_epochs == 0) throw vh::HarnessError("retrain-decoder needs --epochs or train.retrain_epochs > 0");
      print_summary(vh::run_experiment(cfg, out));
      fmt::print("results written to {}\n", out);
      return 0;
    }
    if (*ev) {
      auto cfg = vh::load_experiment_config(config);
      cfg.checkpoint = checkpoint;
      cfg.retrain_epochs = 0;
      std::optional<std::filesystem::path> dir;
      if (!out.empty()) dir = out;
      print_summary(vh::run_experiment(cfg, dir));
      return 0;
    }
    if (*cp) return count_params(model, M, count_scale);
    if (*qd) return quantize_demo(kind, bits, lo, hi, points, a, d_rel, soft);
    if (*rp) return report(result_dirs, out);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
