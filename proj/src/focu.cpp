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

#include "varirate/focu.hpp"

#include <algorithm>
#include <bit>
#include <cstring>

namespace varirate::focu {

using netcore::Mode;
using netcore::Tensor;

Codeword make_codeword(std::vector<double> values) {
  Codeword c;
  c.active_length = static_cast<int>(values.size());
  c.values = std::move(values);
  return c;
}

Codeword truncate(const Codeword& codeword, int n) {
  if (n < 0 || n > codeword.capacity())
    throw FocuError("kept length " + std::to_string(n) + " outside [0, " + std::to_string(codeword.capacity()) + "]");
  Codeword out = codeword;
  out.active_length = n;
  std::fill(out.values.begin() + n, out.values.end(), 0.0);
  return out;
}

Codeword zero_pad(std::span<const double> prefix, int M) {
  if (M < 0 || prefix.size() > static_cast<std::size_t>(M))
    throw FocuError("prefix of length " + std::to_string(prefix.size()) + " exceeds M = " + std::to_string(M));
  Codeword out;
  out.values.assign(static_cast<std::size_t>(M), 0.0);
  std::copy(prefix.begin(), prefix.end(), out.values.begin());
  out.active_length = static_cast<int>(prefix.size());
  return out;
}

std::vector<std::uint8_t> encode_float_payload(const Codeword& codeword) {
  static_assert(std::endian::native == std::endian::little, "payload encoding assumes a little-endian host");
  const auto n = static_cast<std::uint16_t>(codeword.active_length);
  if (codeword.active_length > 0xFFFF) throw FocuError("payload longer than 65535 values");
  std::vector<std::uint8_t> out(2 + 4 * static_cast<std::size_t>(n));
  std::memcpy(out.data(), &n, 2);
  for (std::size_t i = 0; i < n; ++i) {
    const float v = static_cast<float>(codeword.values[i]);
    std::memcpy(out.data() + 2 + 4 * i, &v, 4);
  }
  return out;
}

Codeword decode_float_payload(std::span<const std::uint8_t> bytes, int M) {
  if (bytes.size() < 2) throw FocuError("payload shorter than its header");
  std::uint16_t n = 0;
  std::memcpy(&n, bytes.data(), 2);
  if (bytes.size() < 2 + 4 * static_cast<std::size_t>(n)) throw FocuError("truncated float payload");
  std::vector<double> prefix(n);
  for (std::size_t i = 0; i < n; ++i) {
    float v;
    std::memcpy(&v, bytes.data() + 2 + 4 * i, 4);
    prefix[i] = v;
  }
  return zero_pad(prefix, M);
}

OverheadPolicy OverheadPolicy::uniform(int M) {
  OverheadPolicy p;
  p.distribution = Distribution::uniform;
  p.weights.assign(static_cast<std::size_t>(std::max(M, 0)) + 1, 1.0);
  return p;
}

OverheadPolicy OverheadPolicy::fixed(int n) {
  OverheadPolicy p;
  p.distribution = Distribution::fixed;
  p.fixed_length = n;
  return p;
}

void OverheadPolicy::validate(int M) const {
  if (distribution == Distribution::fixed) {
    if (fixed_length < 0 || fixed_length > M)
      throw FocuError("fixed kept length " + std::to_string(fixed_length) + " outside [0, " + std::to_string(M) + "]");
    return;
  }
  if (!weights.empty()) {
    if (weights.size() != static_cast<std::size_t>(M) + 1)
      throw FocuError("overhead weights need M + 1 = " + std::to_string(M + 1) + " entries");
    bool any = false;
    for (const double w : weights) {
      if (!(w >= 0.0)) throw FocuError("overhead weights must be non-negative");
      any = any || w > 0.0;
    }
    if (!any) throw FocuError("overhead weights are all zero");
  }
}

int sample_overhead(const OverheadPolicy& policy, int M, std::mt19937_64& rng) {
  if (policy.distribution == OverheadPolicy::Distribution::fixed) return policy.fixed_length;
  if (M == 0) return 0;
  const bool flat = policy.weights.empty() ||
                    std::all_of(policy.weights.begin(), policy.weights.end(),
                                [&](double w) { return w == policy.weights.front(); });
  if (flat) return std::uniform_int_distribution<int>(0, M)(rng);
  std::discrete_distribution<int> dist(policy.weights.begin(), policy.weights.end());
  return dist(rng);
}

template <typename T>
LossEvaluation<T> mse_loss(const Tensor<T>& prediction, const Tensor<T>& target) {
  if (prediction.shape != target.shape)
    throw FocuError("prediction " + netcore::to_string(prediction.shape) + " vs target " +
                    netcore::to_string(target.shape));
  if (prediction.data.empty()) throw FocuError("loss over an empty batch");
  LossEvaluation<T> out;
  out.grad = Tensor<T>(prediction.shape);
  const double count = static_cast<double>(prediction.data.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < prediction.data.size(); ++i) {
    const double d = static_cast<double>(prediction.data[i]) - static_cast<double>(target.data[i]);
    sum += d * d;
    out.grad.data[i] = static_cast<T>(2.0 * d / count);
  }
  out.loss = sum / count;
  return out;
}

template <typename T>
CodewordPath<T>::CodewordPath(int M, bool changeable_rate, quant::QuantizerSpec spec)
    : M_(M), changeable_(changeable_rate), spec_(spec) {
  if (M < 1) throw FocuError("codeword capacity must be >= 1");
  spec_.validate();
}

template <typename T>
void CodewordPath<T>::set_quantizer(const quant::QuantizerSpec& spec) {
  spec.validate();
  spec_ = spec;
}

template <typename T>
Tensor<T> CodewordPath<T>::forward(const Tensor<T>& codewords, std::span<const int> lengths, Mode mode) {
  const std::size_t batch = codewords.shape.n;
  if (codewords.shape.sample_size() != static_cast<std::size_t>(M_))
    throw FocuError("codeword batch " + netcore::to_string(codewords.shape) + " does not hold M = " +
                    std::to_string(M_) + " values per sample");
  if (!lengths.empty() && lengths.size() != batch) throw FocuError("one kept length is needed per sample");

  shape_ = codewords.shape;
  lengths_.assign(batch, M_);
  for (std::size_t i = 0; i < lengths.size(); ++i) {
    const int k = lengths[i];
    if (k < 0 || k > M_) throw FocuError("kept length " + std::to_string(k) + " outside [0, " + std::to_string(M_) + "]");
    if (!changeable_ && k != M_) throw FocuError("model has no overhead control; kept length must equal M");
    lengths_[i] = k;
  }

  Tensor<T> out(codewords.shape);
  traces_.assign(batch, {});
  payloads_.assign(batch, {});
  const bool soft = mode == Mode::train;
  std::vector<double> prefix;
  for (std::size_t i = 0; i < batch; ++i) {
    const T* in = codewords.sample(i);
    T* dst = out.sample(i);
    const int k = lengths_[i];
    if (!spec_.is_quantized()) {
      std::copy(in, in + k, dst);
      continue;
    }
    prefix.assign(in, in + k);
    auto q = quant::quantizer_forward(prefix, spec_, soft);
    for (int j = 0; j < k; ++j) dst[j] = static_cast<T>(q.values[j]);
    traces_[i] = std::move(q.trace);
    payloads_[i] = std::move(q.payload);
  }
  return out;
}

template <typename T>
Tensor<T> CodewordPath<T>::backward(const Tensor<T>& grad_out) {
  if (grad_out.shape != shape_ || lengths_.size() != shape_.n)
    throw FocuError("codeword backward does not match the last forward pass");
  Tensor<T> g(shape_);
  std::vector<double> prefix;
  for (std::size_t i = 0; i < shape_.n; ++i) {
    const T* go = grad_out.sample(i);
    T* dst = g.sample(i);
    const int k = lengths_[i];
    if (!spec_.is_quantized()) {
      std::copy(go, go + k, dst);
      continue;
    }
    prefix.assign(go, go + k);
    const auto back = quant::quantizer_backward(prefix, spec_, traces_[i]);
    for (int j = 0; j < k; ++j) dst[j] = static_cast<T>(back[j]);
  }
  return g;
}

template LossEvaluation<float> mse_loss<float>(const Tensor<float>&, const Tensor<float>&);
template LossEvaluation<double> mse_loss<double>(const Tensor<double>&, const Tensor<double>&);
template class CodewordPath<float>;
template class CodewordPath<double>;

}  // namespace varirate::focu
