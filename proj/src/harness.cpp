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

#include "varirate/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numeric>
#include <random>

namespace varirate::harness {

using models::Autoencoder;
using models::Family;
using netcore::Mode;
using netcore::Shape;
using netcore::Tensor;

std::string toolkit_version() { return VARIRATE_VERSION; }

// --- data -------------------------------------------------------------------

Split split_indices(std::size_t count, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction >= 0.0 && test_fraction < 1.0)) throw HarnessError("test fraction must lie in [0, 1)");
  std::vector<std::size_t> order(count);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(count)));
  Split s;
  s.test.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_test));
  s.train.assign(order.begin() + static_cast<std::ptrdiff_t>(n_test), order.end());
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.test.begin(), s.test.end());
  return s;
}

namespace {

channel::ComplexMatrix downlink_ad(const channel::Dataset& d, std::size_t i) {
  return channel::to_angular_delay(d.samples.at(i).downlink, d.config.n_delay_kept);
}

channel::RealMatrix magnitude(const channel::ComplexMatrix& h) {
  channel::RealMatrix m(h.rows, h.cols);
  for (std::size_t k = 0; k < h.size(); ++k) m.data[k] = std::abs(h.data[k]);
  return m;
}

}  // namespace

Normalizers fit_normalizers(const channel::Dataset& dataset, std::span<const std::size_t> indices, Family family) {
  if (indices.empty()) throw HarnessError("cannot fit normalization on an empty training split");
  Normalizers n;
  if (family == Family::csinetpro) {
    std::vector<channel::ComplexMatrix> ad;
    ad.reserve(indices.size());
    for (const auto i : indices) ad.push_back(downlink_ad(dataset, i));
    n.input = channel::fit_normalization(std::span<const channel::ComplexMatrix>(ad));
    return n;
  }
  std::vector<channel::RealMatrix> down, up;
  for (const auto i : indices) {
    down.push_back(magnitude(downlink_ad(dataset, i)));
    up.push_back(magnitude(channel::to_angular_delay(dataset.samples.at(i).uplink, dataset.config.n_delay_kept)));
  }
  n.input = channel::fit_normalization(std::span<const channel::RealMatrix>(down));
  n.aux = channel::fit_normalization(std::span<const channel::RealMatrix>(up));
  return n;
}

PreparedData prepare(const channel::Dataset& dataset, std::span<const std::size_t> indices, Family family,
                     const Normalizers& norm) {
  const std::size_t rows = dataset.config.n_delay_kept, cols = dataset.config.n_antennas;
  const std::size_t plane = rows * cols;
  PreparedData p;
  p.family = family;
  p.norm = norm;
  const bool polar = family == Family::dualnetsph;
  p.input = Tensor<float>(Shape{indices.size(), polar ? 1u : 2u, rows, cols});
  if (polar) p.aux = Tensor<float>(Shape{indices.size(), 1, rows, cols});
  for (std::size_t s = 0; s < indices.size(); ++s) {
    const auto ad = downlink_ad(dataset, indices[s]);
    float* dst = p.input.sample(s);
    if (!polar) {
      for (std::size_t k = 0; k < plane; ++k) {
        dst[k] = static_cast<float>(norm.input.apply(ad.data[k].real()));
        dst[plane + k] = static_cast<float>(norm.input.apply(ad.data[k].imag()));
      }
      continue;
    }
    const auto up = channel::to_angular_delay(dataset.samples[indices[s]].uplink, rows);
    float* aux = p.aux.sample(s);
    for (std::size_t k = 0; k < plane; ++k) {
      dst[k] = static_cast<float>(norm.input.apply(std::abs(ad.data[k])));
      aux[k] = static_cast<float>(norm.aux.apply(std::abs(up.data[k])));
    }
  }
  return p;
}

Tensor<float> gather(const Tensor<float>& source, std::span<const std::size_t> rows) {
  Shape s = source.shape;
  s.n = rows.size();
  Tensor<float> out(s);
  const std::size_t len = s.sample_size();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= source.shape.n) throw HarnessError("sample index out of range");
    std::copy_n(source.sample(rows[i]), len, out.sample(i));
  }
  return out;
}

// --- training ---------------------------------------------------------------

void TrainConfig::validate() const {
  if (epochs < 0) throw HarnessError("epochs must be >= 0");
  if (batch_size < 1) throw HarnessError("batch size must be >= 1");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) throw HarnessError("learning rate must be >= 0");
  if (optimizer != "adam") throw HarnessError("unsupported optimizer '" + optimizer + "' (only adam)");
  quantizer.validate();
}

std::uint64_t resolve_seed(std::uint64_t configured) {
  const char* env = std::getenv("VARIRATE_SEED");
  if (env == nullptr || *env == '\0') return configured;
  char* end = nullptr;
  const unsigned long long v = std::strtoull(env, &end, 10);
  if (end == env || *end != '\0') throw HarnessError(std::string("VARIRATE_SEED is not an integer: ") + env);
  return v;
}

namespace {

std::vector<int> sample_lengths(const focu::OverheadPolicy& policy, int M, std::size_t count, std::mt19937_64& rng) {
  std::vector<int> lengths(count);
  for (auto& k : lengths) k = focu::sample_overhead(policy, M, rng);
  return lengths;
}

// Fixed-rate networks always run at their own length; the sampling policy
// only applies to changeable-rate ones.
focu::OverheadPolicy effective_policy(const Autoencoder<float>& model, const focu::OverheadPolicy& policy) {
  const int M = model.codeword_length();
  if (!model.variant().changeable_rate) return focu::OverheadPolicy::fixed(M);
  policy.validate(M);
  return policy;
}

void require_data(const PreparedData& data) {
  if (data.size() == 0) throw HarnessError("empty dataset");
}

void check_finite(double loss, int epoch, std::size_t batch) {
  if (!std::isfinite(loss))
    throw HarnessError("training diverged: non-finite loss " + std::to_string(loss) + " at epoch " +
                       std::to_string(epoch + 1) + ", batch " + std::to_string(batch + 1));
}

std::vector<std::size_t> batch_rows(const std::vector<std::size_t>& order, std::size_t start, std::size_t size) {
  const std::size_t end = std::min(order.size(), start + size);
  return {order.begin() + static_cast<std::ptrdiff_t>(start), order.begin() + static_cast<std::ptrdiff_t>(end)};
}

}  // namespace

History train(Autoencoder<float>& model, const PreparedData& data, const TrainConfig& config) {
  config.validate();
  require_data(data);
  const auto policy = effective_policy(model, config.overhead_policy);
  model.set_quantizer(config.quantizer);

  netcore::Adam<float> adam({config.learning_rate});
  adam.attach(model.encoder());
  adam.attach(model.decoder_head());
  adam.attach(model.decoder_body());

  std::mt19937_64 rng(config.seed);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  History h;
  std::vector<float> best_state = model.state();
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double sum = 0.0;
    for (std::size_t start = 0, b = 0; start < order.size(); start += config.batch_size, ++b) {
      const auto rows = batch_rows(order, start, config.batch_size);
      const auto input = gather(data.input, rows);
      Tensor<float> aux;
      if (data.aux_ptr() != nullptr) aux = gather(data.aux, rows);
      const auto eval =
          focu::changeable_rate_loss(model, input, data.aux_ptr() ? &aux : nullptr, input, policy, rng, Mode::train);
      check_finite(eval.loss, epoch, b);
      model.backward(eval.grad);
      adam.step();
      sum += eval.loss * static_cast<double>(rows.size());
    }
    const double loss = sum / static_cast<double>(data.size());
    h.epoch_loss.push_back(loss);
    if (h.best_epoch < 0 || loss < h.best_loss) {
      h.best_epoch = epoch;
      h.best_loss = loss;
      best_state = model.state();
    }
  }
  model.load_state(best_state);
  h.final_eval_loss = evaluate_mse(model, data, policy, config.seed);
  return h;
}

History retrain_decoder(Autoencoder<float>& model, const PreparedData& data, const TrainConfig& config) {
  config.validate();
  require_data(data);
  const int M = model.codeword_length();
  const auto policy = effective_policy(model, config.overhead_policy);
  History h;
  if (config.epochs == 0) {
    h.final_eval_loss = evaluate_mse(model, data, policy, config.seed);
    return h;
  }

  quant::QuantizerSpec spec = config.quantizer;
  if (spec.kind == quant::Kind::mu_law && !spec.has_range()) {
    const auto [lo, hi] = codeword_range(model, data);
    spec.range_lo = lo;
    spec.range_hi = hi;
  }
  model = models::attach_pqb(std::move(model), spec);

  // The frozen encoder's codewords do not change; compute them once.
  Tensor<float> codewords;
  for (std::size_t start = 0; start < data.size(); start += kEvalBatch) {
    std::vector<std::size_t> rows(std::min(kEvalBatch, data.size() - start));
    std::iota(rows.begin(), rows.end(), start);
    const auto c = model.encode(gather(data.input, rows), Mode::eval);
    if (start == 0) codewords = Tensor<float>(Shape{data.size(), c.shape.c, c.shape.h, c.shape.w});
    std::copy(c.data.begin(), c.data.end(), codewords.sample(start));
  }

  netcore::Adam<float> adam({config.learning_rate});
  adam.attach(model.decoder_head());
  adam.attach(model.decoder_body());

  std::mt19937_64 rng(config.seed);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  std::vector<float> best_state = model.state();
  h.best_loss = evaluate_mse(model, data, policy, config.seed);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double sum = 0.0;
    for (std::size_t start = 0, b = 0; start < order.size(); start += config.batch_size, ++b) {
      const auto rows = batch_rows(order, start, config.batch_size);
      const auto target = gather(data.input, rows);
      Tensor<float> aux;
      if (data.aux_ptr() != nullptr) aux = gather(data.aux, rows);
      const auto lengths = sample_lengths(policy, M, rows.size(), rng);
      const auto padded = model.codeword_path().forward(gather(codewords, rows), lengths, Mode::train);
      const auto prediction = model.decode(padded, data.aux_ptr() ? &aux : nullptr, Mode::train);
      const auto eval = focu::mse_loss(prediction, target);
      check_finite(eval.loss, epoch, b);
      model.backward(eval.grad, /*through_encoder=*/false);
      adam.step();
      sum += eval.loss * static_cast<double>(rows.size());
    }
    h.epoch_loss.push_back(sum / static_cast<double>(data.size()));
    const double selection = evaluate_mse(model, data, policy, config.seed);
    if (selection < h.best_loss) {
      h.best_epoch = epoch;
      h.best_loss = selection;
      best_state = model.state();
    }
  }
  model.load_state(best_state);
  h.final_eval_loss = evaluate_mse(model, data, policy, config.seed);
  return h;
}

// --- evaluation -------------------------------------------------------------

double evaluate_mse(Autoencoder<float>& model, const PreparedData& data, const focu::OverheadPolicy& policy,
                    std::uint64_t seed) {
  require_data(data);
  const int M = model.codeword_length();
  const auto effective = effective_policy(model, policy);
  std::mt19937_64 rng(seed);
  double sum = 0.0;
  for (std::size_t start = 0; start < data.size(); start += kEvalBatch) {
    std::vector<std::size_t> rows(std::min(kEvalBatch, data.size() - start));
    std::iota(rows.begin(), rows.end(), start);
    const auto input = gather(data.input, rows);
    Tensor<float> aux;
    if (data.aux_ptr() != nullptr) aux = gather(data.aux, rows);
    const auto lengths = sample_lengths(effective, M, rows.size(), rng);
    const auto out = model.forward(input, data.aux_ptr() ? &aux : nullptr, lengths, Mode::eval);
    for (std::size_t i = 0; i < out.data.size(); ++i) {
      const double d = static_cast<double>(out.data[i]) - static_cast<double>(input.data[i]);
      sum += d * d;
    }
  }
  return sum / static_cast<double>(data.input.data.size());
}

double sample_nmse(std::span<const double> truth, std::span<const double> estimate) {
  if (truth.size() != estimate.size()) throw HarnessError("NMSE operands differ in size");
  double err = 0.0, ref = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const double d = truth[i] - estimate[i];
    err += d * d;
    ref += truth[i] * truth[i];
  }
  if (!(ref > 0.0)) throw HarnessError("NMSE undefined for an all-zero channel");
  return err / ref;
}

double nmse_to_db(double linear) {
  if (!(linear > 0.0)) return kNmseFloorDb;
  return std::max(kNmseFloorDb, 10.0 * std::log10(linear));
}

NmseResult evaluate_nmse(const Autoencoder<float>& trained, const PreparedData& data, int n,
                         const quant::QuantizerSpec& quantizer) {
  require_data(data);
  Autoencoder<float> model = trained;
  const int M = model.codeword_length();
  if (n < 0 || n > M) throw HarnessError("kept length " + std::to_string(n) + " outside [0, " + std::to_string(M) + "]");
  if (!model.variant().changeable_rate && n != M)
    throw HarnessError("a fixed-rate model can only be evaluated at n = M = " + std::to_string(M));
  model.set_quantizer(quantizer);

  const auto& norm = data.norm.input;
  const std::size_t len = data.input.shape.sample_size();
  std::vector<double> truth(len), estimate(len);
  std::vector<std::uint32_t> symbols;
  double total = 0.0;
  for (std::size_t start = 0; start < data.size(); start += kEvalBatch) {
    std::vector<std::size_t> rows(std::min(kEvalBatch, data.size() - start));
    std::iota(rows.begin(), rows.end(), start);
    const auto input = gather(data.input, rows);
    Tensor<float> aux;
    if (data.aux_ptr() != nullptr) aux = gather(data.aux, rows);
    const std::vector<int> lengths(rows.size(), n);
    const auto out = model.forward(input, data.aux_ptr() ? &aux : nullptr, lengths, Mode::eval);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      for (std::size_t k = 0; k < len; ++k) {
        truth[k] = norm.invert(input.sample(i)[k]);
        estimate[k] = norm.invert(out.sample(i)[k]);
      }
      total += sample_nmse(truth, estimate);
    }
    if (quantizer.is_quantized())
      for (const auto& p : model.codeword_path().payloads()) symbols.insert(symbols.end(), p.symbols.begin(), p.symbols.end());
  }
  NmseResult r;
  r.nmse_linear = total / static_cast<double>(data.size());
  r.nmse_db = nmse_to_db(r.nmse_linear);
  if (!symbols.empty()) r.entropy_bits = quant::empirical_entropy(symbols, quantizer.bits);
  return r;
}

CodewordStats codeword_statistics(Autoencoder<float>& model, const PreparedData& data) {
  require_data(data);
  const auto M = static_cast<std::size_t>(model.codeword_length());
  std::vector<double> s(M, 0.0), s2(M, 0.0);
  for (std::size_t start = 0; start < data.size(); start += kEvalBatch) {
    std::vector<std::size_t> rows(std::min(kEvalBatch, data.size() - start));
    std::iota(rows.begin(), rows.end(), start);
    const auto c = model.encode(gather(data.input, rows), Mode::eval);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      for (std::size_t j = 0; j < M; ++j) {
        const double v = c.sample(i)[j];
        s[j] += v;
        s2[j] += v * v;
      }
    }
  }
  CodewordStats out;
  const double count = static_cast<double>(data.size());
  for (std::size_t j = 0; j < M; ++j) {
    const double mean = s[j] / count;
    out.mean.push_back(mean);
    out.sd.push_back(std::sqrt(std::max(0.0, s2[j] / count - mean * mean)));
  }
  return out;
}

std::pair<double, double> codeword_range(Autoencoder<float>& model, const PreparedData& data) {
  require_data(data);
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (std::size_t start = 0; start < data.size(); start += kEvalBatch) {
    std::vector<std::size_t> rows(std::min(kEvalBatch, data.size() - start));
    std::iota(rows.begin(), rows.end(), start);
    const auto c = model.encode(gather(data.input, rows), Mode::eval);
    const auto [mn, mx] = std::minmax_element(c.data.begin(), c.data.end());
    lo = std::min(lo, static_cast<double>(*mn));
    hi = std::max(hi, static_cast<double>(*mx));
  }
  return {lo, hi};
}

}  // namespace varirate::harness
