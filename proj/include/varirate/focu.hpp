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

// Feedback overhead control: the encoder always emits M values, the UE keeps
// a prefix of n, and the BS zero-pads back to M before decoding.

#ifndef VARIRATE_FOCU_HPP
#define VARIRATE_FOCU_HPP

#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "varirate/netcore.hpp"
#include "varirate/quant.hpp"

namespace varirate::focu {

class FocuError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Codeword {
  std::vector<double> values;  // capacity M; entries past active_length are 0
  int active_length = 0;
  bool quantized = false;

  int capacity() const { return static_cast<int>(values.size()); }
  std::span<const double> payload() const { return {values.data(), static_cast<std::size_t>(active_length)}; }
};

Codeword make_codeword(std::vector<double> values);
Codeword truncate(const Codeword& codeword, int n);
Codeword zero_pad(std::span<const double> prefix, int M);

// Unquantized debug payload: u16 LE length, then n little-endian f32 values.
std::vector<std::uint8_t> encode_float_payload(const Codeword& codeword);
Codeword decode_float_payload(std::span<const std::uint8_t> bytes, int M);

struct OverheadPolicy {
  enum class Distribution { uniform, fixed };

  Distribution distribution = Distribution::uniform;
  int fixed_length = 0;
  // Weight per kept length 0..M; sampling probability is proportional.
  std::vector<double> weights;

  static OverheadPolicy uniform(int M);
  static OverheadPolicy fixed(int n);
  void validate(int M) const;
  friend bool operator==(const OverheadPolicy&, const OverheadPolicy&) = default;
};

int sample_overhead(const OverheadPolicy& policy, int M, std::mt19937_64& rng);

template <typename T>
struct LossEvaluation {
  double loss = 0.0;
  netcore::Tensor<T> grad;  // d loss / d prediction
  std::vector<int> lengths;
};

// Mean squared error over every element, accumulated in double in index order.
template <typename T>
LossEvaluation<T> mse_loss(const netcore::Tensor<T>& prediction, const netcore::Tensor<T>& target);

// Truncate -> (quantize -> dequantize) -> zero-pad, batched, with backward.
template <typename T>
class CodewordPath {
 public:
  CodewordPath(int M, bool changeable_rate, quant::QuantizerSpec spec = {});

  int capacity() const { return M_; }
  bool changeable_rate() const { return changeable_; }
  const quant::QuantizerSpec& quantizer() const { return spec_; }
  void set_quantizer(const quant::QuantizerSpec& spec);
  void set_changeable_rate(bool on) { changeable_ = on; }

  // `lengths` holds the kept length per sample; empty means M everywhere.
  netcore::Tensor<T> forward(const netcore::Tensor<T>& codewords, std::span<const int> lengths, netcore::Mode mode);
  netcore::Tensor<T> backward(const netcore::Tensor<T>& grad_out);

  // Symbols emitted by the last forward pass, one payload per sample.
  const std::vector<quant::QuantizedPayload>& payloads() const { return payloads_; }

 private:
  int M_;
  bool changeable_;
  quant::QuantizerSpec spec_;
  std::vector<int> lengths_;
  std::vector<quant::QuantizerTrace> traces_;
  std::vector<quant::QuantizedPayload> payloads_;
  netcore::Shape shape_;
};

// Adapter exposing a fixed-length CodewordPath as a network layer; used to
// place a quantizer inside a netcore::Network.
template <typename T>
class CodewordLayer final : public netcore::Layer<T> {
 public:
  explicit CodewordLayer(CodewordPath<T> path) : path_(std::move(path)) {}

  netcore::LayerSpec spec() const override { return netcore::LayerSpec::act(netcore::Activation::linear); }
  netcore::Shape output_shape(const netcore::Shape& in) const override { return in; }
  netcore::Tensor<T> forward(const netcore::Tensor<T>& x, netcore::Mode mode) override {
    return path_.forward(x, {}, mode);
  }
  netcore::Tensor<T> backward(const netcore::Tensor<T>& g) override { return path_.backward(g); }
  std::unique_ptr<netcore::Layer<T>> clone() const override { return std::make_unique<CodewordLayer>(*this); }
  // Only the unquantized path and the soft surrogate are true derivatives.
  bool differentiable() const override {
    const auto k = path_.quantizer().kind;
    return k == quant::Kind::none || k == quant::Kind::soft_to_hard;
  }
  std::string name() const override { return "codeword_path(" + std::string(quant::to_string(path_.quantizer().kind)) + ")"; }

 private:
  CodewordPath<T> path_;
};

// One loss evaluation of the changeable-rate objective: a kept length is
// drawn per sample from `policy` and the reconstruction MSE is averaged over
// the batch (unit weight per drawn length). With policy fixed(M) this is the
// plain fixed-rate MSE.
//
// Model must provide forward(input, aux, lengths, mode) -> Tensor<T>.
template <typename Model, typename T>
LossEvaluation<T> changeable_rate_loss(Model& model, const netcore::Tensor<T>& input, const netcore::Tensor<T>* aux,
                                       const netcore::Tensor<T>& target, const OverheadPolicy& policy,
                                       std::mt19937_64& rng, netcore::Mode mode) {
  if (input.shape.n == 0) throw FocuError("changeable-rate loss on an empty batch");
  const int M = model.codeword_length();
  policy.validate(M);
  std::vector<int> lengths(input.shape.n);
  for (auto& k : lengths) k = sample_overhead(policy, M, rng);
  const auto prediction = model.forward(input, aux, lengths, mode);
  auto eval = mse_loss(prediction, target);
  eval.lengths = std::move(lengths);
  return eval;
}

}  // namespace varirate::focu

#endif  // VARIRATE_FOCU_HPP
