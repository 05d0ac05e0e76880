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

// Training and evaluation loops, metrics, experiment orchestration and
// reporting.

#ifndef VARIRATE_HARNESS_HPP
#define VARIRATE_HARNESS_HPP

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "varirate/channel.hpp"
#include "varirate/focu.hpp"
#include "varirate/models.hpp"
#include "varirate/netcore.hpp"
#include "varirate/quant.hpp"

namespace varirate::harness {

class HarnessError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string toolkit_version();

// --- data -------------------------------------------------------------------

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

// Disjoint shuffled train/test indices whose union is 0..count-1.
Split split_indices(std::size_t count, double test_fraction, std::uint64_t seed);

struct Normalizers {
  channel::Normalization input;
  channel::Normalization aux;  // uplink magnitude (magnitude family only)
};

// Fits the affine maps on the given (training) samples only.
Normalizers fit_normalizers(const channel::Dataset& dataset, std::span<const std::size_t> indices,
                            models::Family family);

// Network-ready tensors: real/imaginary planes of the truncated angular-delay
// downlink (complex family) or its magnitude plus the uplink magnitude.
struct PreparedData {
  models::Family family = models::Family::csinetpro;
  netcore::Tensor<float> input;
  netcore::Tensor<float> aux;  // empty unless the family uses side information
  Normalizers norm;

  std::size_t size() const { return input.shape.n; }
  const netcore::Tensor<float>* aux_ptr() const { return aux.data.empty() ? nullptr : &aux; }
};

PreparedData prepare(const channel::Dataset& dataset, std::span<const std::size_t> indices, models::Family family,
                     const Normalizers& norm);

// Copies the listed samples of a tensor into a new batch.
netcore::Tensor<float> gather(const netcore::Tensor<float>& source, std::span<const std::size_t> rows);

// --- training ---------------------------------------------------------------

struct TrainConfig {
  int epochs = 200;
  int batch_size = 32;
  double learning_rate = 1e-3;
  std::string optimizer = "adam";
  std::uint64_t seed = 1;
  focu::OverheadPolicy overhead_policy;
  quant::QuantizerSpec quantizer;

  void validate() const;
};

struct History {
  std::vector<double> epoch_loss;  // mean training loss per epoch
  int best_epoch = -1;             // 0-based index into epoch_loss; -1 = initial state kept
  double best_loss = 0.0;
  // Eval-mode loss over the training set for the restored model, using the
  // configured overhead policy.
  double final_eval_loss = 0.0;
};

// Returns `configured` unless VARIRATE_SEED holds an unsigned integer.
std::uint64_t resolve_seed(std::uint64_t configured);

// Fixed-rate models ignore `overhead_policy` and always keep all M entries.

// Trains encoder and decoder end to end on Eq.-style MSE with one sampled
// kept length per sample; restores the lowest-loss epoch.
History train(models::Autoencoder<float>& model, const PreparedData& data, const TrainConfig& config);

// Retrains only the decoder on (quantized) codewords of the frozen encoder.
// A mu-law quantizer without a range gets it from the training codewords.
// Epoch 0 (the incoming decoder) competes in best-checkpoint selection.
History retrain_decoder(models::Autoencoder<float>& model, const PreparedData& data, const TrainConfig& config);

// --- evaluation -------------------------------------------------------------

inline constexpr double kNmseFloorDb = -100.0;
inline constexpr std::size_t kEvalBatch = 128;

// Mean squared error per element in eval mode. Kept lengths come from
// `policy`, sampled with a fresh generator seeded by `seed`.
double evaluate_mse(models::Autoencoder<float>& model, const PreparedData& data, const focu::OverheadPolicy& policy,
                    std::uint64_t seed = 0);

double sample_nmse(std::span<const double> truth, std::span<const double> estimate);
double nmse_to_db(double linear);

struct NmseResult {
  double nmse_db = 0.0;
  double nmse_linear = 0.0;
  std::optional<double> entropy_bits;  // set when the codeword was quantized and n > 0
};

// NMSE on de-normalized channels with kept length n under `quantizer`.
NmseResult evaluate_nmse(const models::Autoencoder<float>& model, const PreparedData& data, int n,
                         const quant::QuantizerSpec& quantizer);

struct CodewordStats {
  std::vector<double> mean;
  std::vector<double> sd;  // population standard deviation
};

// Per-index statistics of the unquantized encoder output.
CodewordStats codeword_statistics(models::Autoencoder<float>& model, const PreparedData& data);

// Smallest and largest encoder output over the data.
std::pair<double, double> codeword_range(models::Autoencoder<float>& model, const PreparedData& data);

// --- experiments ------------------------------------------------------------

inline constexpr int kExperimentSchemaVersion = 1;

struct ExperimentConfig {
  models::ModelVariant model;
  std::uint64_t seed = 1;  // model initialization and training order
  std::optional<std::filesystem::path> dataset_path;
  channel::DatasetConfig dataset;  // generated when no path is given
  double test_fraction = 0.2;
  std::uint64_t split_seed = 1;
  TrainConfig train;
  int retrain_epochs = 0;
  std::optional<quant::QuantizerSpec> retrain_quantizer;
  std::vector<int> eval_n;
  std::vector<int> eval_bits;  // empty: evaluate with the model's own quantizer
  std::optional<quant::Kind> eval_kind;
  bool codeword_stats = false;
  std::optional<std::filesystem::path> checkpoint;  // load instead of training

  void validate() const;
};

nlohmann::json to_json(const ExperimentConfig& config);
ExperimentConfig experiment_config_from_json(const nlohmann::json& j);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

struct GridEntry {
  int n = 0;
  int b = 0;  // 0 = unquantized
  double nmse_db = 0.0;
  std::optional<double> entropy_bits;
};

struct ExperimentResult {
  ExperimentConfig config;
  std::uint64_t effective_seed = 0;
  netcore::ParamBreakdown params;
  std::vector<std::pair<int, models::FcFlops>> flops;  // per evaluated n
  std::vector<GridEntry> grid;
  std::optional<CodewordStats> codeword_stats;
  History history;
  std::optional<History> retrain_history;
};

nlohmann::json to_json(const ExperimentResult& result);
// Reads the fields of result.json needed for reporting.
ExperimentResult experiment_result_from_json(const nlohmann::json& j);

// Trains (or loads), optionally retrains the decoder, evaluates the grid and,
// when `out_dir` is given, writes result.json, history.csv and checkpoint.bin.
ExperimentResult run_experiment(const ExperimentConfig& config,
                                const std::optional<std::filesystem::path>& out_dir = std::nullopt);

// --- reports ----------------------------------------------------------------

std::string format_percent(double fraction);  // 0.49226 -> "49.226%"

struct ParamRow {
  models::Family family;
  int M = 0;
  std::int64_t encoder = 0;
  std::int64_t decoder = 0;
  std::int64_t total = 0;
};

// Full-scale parameter counts over each family's codeword lengths.
std::vector<int> report_lengths(models::Family family);
std::vector<ParamRow> parameter_table(models::Family family, models::Scale scale = models::Scale::full);

// Storage of one network per length versus a single changeable-rate network.
struct StorageRow {
  models::Family family;
  std::int64_t separate_ue = 0, separate_bs = 0, separate_total = 0;
  std::int64_t single_ue = 0, single_bs = 0, single_total = 0;
  double reduce_ue = 0.0, reduce_bs = 0.0, reduce_total = 0.0;
};

StorageRow storage_savings(models::Family family, models::Scale scale = models::Scale::full);

std::string render_parameter_table(models::Scale scale = models::Scale::full);
std::string render_storage_table(models::Scale scale = models::Scale::full);

struct NmseRow {
  std::string family;
  std::string variant;
  int n = 0;
  int b = 0;
  double nmse_db = 0.0;
  std::optional<double> entropy_bits;
  friend bool operator==(const NmseRow&, const NmseRow&) = default;
};

std::string variant_label(const models::ModelVariant& variant);
std::vector<NmseRow> nmse_rows(std::span<const ExperimentResult> results);  // sorted by (family, n, b)
std::string nmse_csv(std::span<const NmseRow> rows);
std::vector<NmseRow> load_nmse_csv(const std::string& text);

// Writes report.txt, params.csv, storage.csv, nmse.csv and codeword_stats.csv.
void emit_report(std::span<const ExperimentResult> results, const std::filesystem::path& out_dir);

}  // namespace varirate::harness

#endif  // VARIRATE_HARNESS_HPP
