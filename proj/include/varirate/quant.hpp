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

#ifndef VARIRATE_QUANT_HPP
#define VARIRATE_QUANT_HPP

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace varirate::quant {

class QuantError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Kind { none, mu_law, passing_gradient, soft_to_hard, pqb };

std::string_view to_string(Kind kind);
Kind kind_from_string(std::string_view name);

// Integral of exp(-1/(1-u^2)) over (-1, 1). Computed once by adaptive
// quadrature; normalizes every surrogate cell to unit mass.
double bump_integral();

struct QuantizerSpec {
  Kind kind = Kind::none;
  int bits = 5;
  double mu = 255.0;
  double a = 8.0;
  double d_rel = 0.5;
  double C = 0.0;  // <= 0 selects bump_integral()

  // Codeword range used by the mu-law path; gathered from a trained encoder.
  double range_lo = 0.0;
  double range_hi = 0.0;

  void validate() const;
  bool is_quantized() const { return kind != Kind::none; }
  double normalization() const { return C > 0.0 ? C : bump_integral(); }
  // Absolute half-width of the surrogate support.
  double support() const;
  bool has_range() const { return range_hi > range_lo; }
};

// --- scalar maps ------------------------------------------------------------

double sigmoid(double x);
// Clips y into [1e-7, 1 - 1e-7] before inverting.
double inverse_sigmoid(double y);
double sigmoid_derivative(double x);
double inverse_sigmoid_derivative(double y);

inline constexpr double kInverseSigmoidClip = 1e-7;

// round(2^b x - 0.5), ties away from zero, clamped to [0, 2^b - 1].
std::uint32_t quantize(double x, int bits);
double dequantize(std::uint32_t symbol, int bits);

// Bump-shaped stand-in for d quantize / dx. Support half-width d is absolute.
double pqb_surrogate_gradient(double x, int bits, double d, double C);

double mu_law_compand(double x, double mu);
double mu_law_expand(double y, double mu);

// Sum of 2^b - 1 shifted tanh steps; differentiable approximation of quantize.
double soft_quantize(double x, int bits, double a);
double soft_quantize_derivative(double x, int bits, double a);

// --- vector quantizer -------------------------------------------------------

struct QuantizedPayload {
  std::vector<std::uint32_t> symbols;
  int bits = 0;
};

// Forward state kept per element so backward can chain-rule through the
// bounding maps at the exact forward point.
struct QuantizerTrace {
  std::vector<double> input;
  std::vector<double> bounded;    // S(x), or rescaled value for mu-law
  std::vector<double> recovered;  // value fed to the inverse map
  bool soft = false;
};

struct QuantizerOutput {
  std::vector<double> values;
  QuantizedPayload payload;
  QuantizerTrace trace;
};

// `soft` selects the differentiable forward used while training the
// soft-to-hard baseline; every other kind ignores it.
QuantizerOutput quantizer_forward(std::span<const double> values, const QuantizerSpec& spec,
                                  bool soft = false);
std::vector<double> quantizer_backward(std::span<const double> grad_out, const QuantizerSpec& spec,
                                       const QuantizerTrace& trace);

// --- measurement & wire format ---------------------------------------------

double empirical_entropy(std::span<const std::uint32_t> symbols, int bits);

// MSB-first packing, symbols back to back, last byte zero padded.
std::vector<std::uint8_t> pack_bits(std::span<const std::uint32_t> symbols, int bits);
std::vector<std::uint32_t> unpack_bits(std::span<const std::uint8_t> bytes, std::size_t count,
                                       int bits);

// Feedback payload: {n: u16 LE, b: u8} followed by the packed symbols.
std::vector<std::uint8_t> encode_payload(const QuantizedPayload& payload);
QuantizedPayload decode_payload(std::span<const std::uint8_t> bytes);
std::size_t payload_size(std::size_t n, int bits);

}  // namespace varirate::quant

#endif  // VARIRATE_QUANT_HPP
