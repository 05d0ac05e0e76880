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

#include <fmt/format.h>

#include <fstream>
#include <sstream>

#include "varirate/harness.hpp"
#include "varirate/json_io.hpp"

namespace varirate::harness {

using nlohmann::json;

namespace {

json history_json(const History& h) {
  return {{"epoch_loss", h.epoch_loss},
          {"best_epoch", h.best_epoch},
          {"best_loss", h.best_loss},
          {"final_eval_loss", h.final_eval_loss}};
}

History history_from_json(const json& j) {
  History h;
  h.epoch_loss = j.at("epoch_loss").get<std::vector<double>>();
  h.best_epoch = j.at("best_epoch");
  h.best_loss = j.at("best_loss");
  h.final_eval_loss = j.at("final_eval_loss");
  return h;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw HarnessError("cannot open " + path.string() + " for writing");
  os << text;
  if (!os) throw HarnessError("write failed for " + path.string());
}

}  // namespace

void ExperimentConfig::validate() const {
  model.validate();
  if (!dataset_path) dataset.validate();
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw HarnessError("split.test_fraction must lie in (0, 1)");
  train.validate();
  if (retrain_epochs < 0) throw HarnessError("train.retrain_epochs must be >= 0");
  if (retrain_quantizer) retrain_quantizer->validate();
  const int M = model.codeword_length();
  if (model.changeable_rate) train.overhead_policy.validate(M);
  for (const int n : eval_n) {
    if (n < 0 || n > M) throw HarnessError("eval.n entry " + std::to_string(n) + " outside [0, " + std::to_string(M) + "]");
    if (!model.changeable_rate && n != M)
      throw HarnessError("a fixed-rate model can only be evaluated at n = M = " + std::to_string(M));
  }
  for (const int b : eval_bits)
    if (b < 1 || b > 16) throw HarnessError("eval.b entry " + std::to_string(b) + " outside [1, 16]");
}

json to_json(const ExperimentConfig& c) {
  json dataset;
  if (c.dataset_path)
    dataset = {{"path", c.dataset_path->string()}};
  else
    dataset = {{"generate", c.dataset}};
  json train = {{"epochs", c.train.epochs},
                {"batch_size", c.train.batch_size},
                {"learning_rate", c.train.learning_rate},
                {"optimizer", c.train.optimizer},
                {"overhead_policy", c.train.overhead_policy},
                {"quantizer", c.train.quantizer},
                {"retrain_epochs", c.retrain_epochs}};
  if (c.retrain_quantizer) train["retrain_quantizer"] = *c.retrain_quantizer;
  json eval = {{"n", c.eval_n}, {"b", c.eval_bits}, {"codeword_stats", c.codeword_stats}};
  if (c.eval_kind) eval["kind"] = quant::to_string(*c.eval_kind);
  json j = {{"schema_version", kExperimentSchemaVersion},
            {"seed", c.seed},
            {"model", c.model},
            {"dataset", dataset},
            {"split", {{"test_fraction", c.test_fraction}, {"seed", c.split_seed}}},
            {"train", train},
            {"eval", eval}};
  if (c.checkpoint) j["checkpoint"] = c.checkpoint->string();
  return j;
}

ExperimentConfig experiment_config_from_json(const json& j) {
  try {
    const int version = j.at("schema_version");
    if (version != kExperimentSchemaVersion)
      throw HarnessError("unsupported experiment schema_version " + std::to_string(version));
    ExperimentConfig c;
    c.seed = j.value("seed", std::uint64_t{1});
    c.model = j.at("model").get<models::ModelVariant>();
    const auto& ds = j.at("dataset");
    if (ds.contains("path"))
      c.dataset_path = ds.at("path").get<std::string>();
    else
      c.dataset = ds.at("generate").get<channel::DatasetConfig>();
    if (j.contains("split")) {
      c.test_fraction = j["split"].value("test_fraction", c.test_fraction);
      c.split_seed = j["split"].value("seed", c.split_seed);
    }
    if (j.contains("train")) {
      const auto& t = j["train"];
      c.train.epochs = t.value("epochs", c.train.epochs);
      c.train.batch_size = t.value("batch_size", c.train.batch_size);
      c.train.learning_rate = t.value("learning_rate", c.train.learning_rate);
      c.train.optimizer = t.value("optimizer", c.train.optimizer);
      if (t.contains("overhead_policy")) c.train.overhead_policy = t["overhead_policy"].get<focu::OverheadPolicy>();
      // The mu-law baseline pretrains without quantization and applies the
      // quantizer only while retraining the decoder.
      if (t.contains("quantizer"))
        c.train.quantizer = t["quantizer"].get<quant::QuantizerSpec>();
      else if (c.model.quantizer.kind != quant::Kind::mu_law)
        c.train.quantizer = c.model.quantizer;
      c.retrain_epochs = t.value("retrain_epochs", 0);
      if (t.contains("retrain_quantizer"))
        c.retrain_quantizer = t["retrain_quantizer"].get<quant::QuantizerSpec>();
    } else if (c.model.quantizer.kind != quant::Kind::mu_law) {
      c.train.quantizer = c.model.quantizer;
    }
    if (j.contains("eval")) {
      const auto& e = j["eval"];
      c.eval_n = e.value("n", std::vector<int>{});
      c.eval_bits = e.value("b", std::vector<int>{});
      if (e.contains("kind")) c.eval_kind = quant::kind_from_string(e["kind"].get<std::string>());
      c.codeword_stats = e.value("codeword_stats", false);
    }
    if (j.contains("checkpoint")) c.checkpoint = j["checkpoint"].get<std::string>();
    c.validate();
    return c;
  } catch (const json::exception& e) {
    throw HarnessError(std::string("experiment config: ") + e.what());
  }
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw HarnessError("cannot open experiment config " + path.string());
  json j;
  try {
    j = json::parse(is);
  } catch (const json::exception& e) {
    throw HarnessError("experiment config " + path.string() + ": " + e.what());
  }
  return experiment_config_from_json(j);
}

json to_json(const ExperimentResult& r) {
  json flops = json::array();
  for (const auto& [n, f] : r.flops) flops.push_back({{"n", n}, {"encoder", f.encoder}, {"decoder", f.decoder}});
  json nmse = json::array(), entropy = json::array();
  for (const auto& g : r.grid) {
    nmse.push_back({{"n", g.n}, {"b", g.b}, {"nmse_db", g.nmse_db}});
    if (g.entropy_bits) entropy.push_back({{"n", g.n}, {"b", g.b}, {"bits", *g.entropy_bits}});
  }
  json j = {{"schema_version", kExperimentSchemaVersion},
            {"toolkit_version", toolkit_version()},
            {"seed", r.effective_seed},
            {"config", to_json(r.config)},
            {"model", r.config.model},
            {"param_breakdown", r.params},
            {"flops", flops},
            {"nmse_db", nmse},
            {"entropy_bits", entropy},
            {"history", history_json(r.history)}};
  j["codeword_stats"] = r.codeword_stats ? json{{"mean", r.codeword_stats->mean}, {"sd", r.codeword_stats->sd}} : json();
  j["retrain_history"] = r.retrain_history ? history_json(*r.retrain_history) : json();
  return j;
}

ExperimentResult experiment_result_from_json(const json& j) {
  try {
    ExperimentResult r;
    r.config = experiment_config_from_json(j.at("config"));
    r.config.model = j.at("model").get<models::ModelVariant>();
    r.effective_seed = j.at("seed");
    r.params = netcore::count_params(models::build_config(r.config.model));
    for (const auto& f : j.at("flops")) r.flops.push_back({f.at("n"), {f.at("encoder"), f.at("decoder")}});
    for (const auto& e : j.at("nmse_db")) r.grid.push_back({e.at("n"), e.at("b"), e.at("nmse_db"), std::nullopt});
    for (const auto& e : j.at("entropy_bits")) {
      for (auto& g : r.grid)
        if (g.n == e.at("n").get<int>() && g.b == e.at("b").get<int>()) g.entropy_bits = e.at("bits").get<double>();
    }
    if (!j.at("codeword_stats").is_null())
      r.codeword_stats = CodewordStats{j["codeword_stats"].at("mean"), j["codeword_stats"].at("sd")};
    r.history = history_from_json(j.at("history"));
    if (!j.at("retrain_history").is_null()) r.retrain_history = history_from_json(j["retrain_history"]);
    return r;
  } catch (const json::exception& e) {
    throw HarnessError(std::string("result.json: ") + e.what());
  }
}

ExperimentResult run_experiment(const ExperimentConfig& config, const std::optional<std::filesystem::path>& out_dir) {
  config.validate();
  ExperimentResult r;
  r.config = config;
  r.effective_seed = resolve_seed(config.seed);

  const auto dataset = config.dataset_path ? channel::load_dataset(*config.dataset_path)
                                           : channel::generate_dataset(config.dataset);
  if (dataset.samples.empty()) throw HarnessError("dataset holds no samples");
  const auto family = config.model.family;
  const auto split = split_indices(dataset.samples.size(), config.test_fraction, config.split_seed);
  if (split.train.empty() || split.test.empty()) throw HarnessError("dataset too small for a train/test split");
  const auto norm = fit_normalizers(dataset, split.train, family);
  const auto train_data = prepare(dataset, split.train, family, norm);
  const auto test_data = prepare(dataset, split.test, family, norm);

  std::optional<models::Autoencoder<float>> loaded;
  if (config.checkpoint) {
    loaded = models::load_checkpoint(*config.checkpoint);
    const auto& v = loaded->variant();
    if (v.family != family || v.scale != config.model.scale || v.codeword_length() != config.model.codeword_length())
      throw HarnessError("checkpoint " + config.checkpoint->string() + " does not match the configured model");
    loaded->set_changeable_rate(config.model.changeable_rate);
  }
  models::Autoencoder<float> model = loaded ? std::move(*loaded) : models::Autoencoder<float>(config.model, r.effective_seed);

  if (!config.checkpoint) {
    TrainConfig tc = config.train;
    tc.seed = r.effective_seed;
    r.history = train(model, train_data, tc);
  }
  if (config.retrain_epochs > 0) {
    TrainConfig rc = config.train;
    rc.epochs = config.retrain_epochs;
    rc.seed = r.effective_seed;
    rc.quantizer = config.retrain_quantizer.value_or(config.model.quantizer);
    r.retrain_history = retrain_decoder(model, train_data, rc);
  }
  r.config.model = model.variant();

  r.params = netcore::count_params(model.config());
  for (const int n : config.eval_n) r.flops.push_back({n, models::fc_flops_at_length(model.config(), n, model.variant().changeable_rate)});

  std::vector<int> bits = config.eval_bits;
  if (bits.empty()) bits.push_back(0);
  for (const int n : config.eval_n) {
    for (const int b : bits) {
      quant::QuantizerSpec spec = model.variant().quantizer;
      if (config.eval_kind) spec.kind = *config.eval_kind;
      if (b > 0) spec.bits = b;
      const auto res = evaluate_nmse(model, test_data, n, spec);
      if (!std::isfinite(res.nmse_db)) throw HarnessError("non-finite NMSE at n = " + std::to_string(n));
      r.grid.push_back({n, spec.is_quantized() ? spec.bits : 0, res.nmse_db, res.entropy_bits});
    }
  }
  if (config.codeword_stats) r.codeword_stats = codeword_statistics(model, test_data);

  if (out_dir) {
    std::filesystem::create_directories(*out_dir);
    write_text(*out_dir / "result.json", to_json(r).dump(2) + "\n");
    std::string csv = "phase,epoch,loss\n";
    for (std::size_t e = 0; e < r.history.epoch_loss.size(); ++e)
      csv += fmt::format("train,{},{:.17g}\n", e + 1, r.history.epoch_loss[e]);
    if (r.retrain_history)
      for (std::size_t e = 0; e < r.retrain_history->epoch_loss.size(); ++e)
        csv += fmt::format("retrain,{},{:.17g}\n", e + 1, r.retrain_history->epoch_loss[e]);
    write_text(*out_dir / "history.csv", csv);
    models::save_checkpoint(*out_dir / "checkpoint.bin", model);
  }
  return r;
}

}  // namespace varirate::harness
