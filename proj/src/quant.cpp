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

#include "varirate/quant.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace varirate::quant {

namespace {

double bump(double u) {
  const double r = 1.0 - u * u;
  if (r <= 0.0) return 0.0;
  return std::exp(-1.0 / r);
}

double simpson(double a, double b, double fa, double fm, double fb) {
  return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

double adaptive_simpson(double a, double b, double fa, double fm, double fb, double whole,
                        double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = bump(lm);
  const double frm = bump(rm);
  const double left = simpson(a, m, fa, flm, fm);
  const double right = simpson(m, b, fm, frm, fb);
  const double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
  return adaptive_simpson(a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         adaptive_simpson(m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

void check_bits(int bits) {
  if (bits < 1 || bits > 16) throw QuantError("bit width must lie in [1, 16], got " + std::to_string(bits));
}

double levels(int bits) { return std::ldexp(1.0, bits); }

}  // namespace

std::string_view to_string(Kind kind) {
  switch (kind) {
    case Kind::none: return "none";
    case Kind::mu_law: return "mu_law";
    case Kind::passing_gradient: return "passing_gradient";
    case Kind::soft_to_hard: return "soft_to_hard";
    case Kind::pqb: return "pqb";
  }
  return "none";
}

Kind kind_from_string(std::string_view name) {
  if (name == "none") return Kind::none;
  if (name == "mu_law") return Kind::mu_law;
  if (name == "passing_gradient") return Kind::passing_gradient;
  if (name == "soft_to_hard") return Kind::soft_to_hard;
  if (name == "pqb") return Kind::pqb;
  throw QuantError("unknown quantizer kind '" + std::string(name) + "'");
}

double bump_integral() {
  static const double value = [] {
    const double fm = bump(0.0);
    return adaptive_simpson(-1.0, 1.0, 0.0, fm, 0.0, simpson(-1.0, 1.0, 0.0, fm, 0.0), 1e-15, 40);
  }();
  return value;
}

void QuantizerSpec::validate() const {
  if (kind == Kind::none) return;
  check_bits(bits);
  if (!(mu > 0.0)) throw QuantError("mu must be positive");
  if (!(a > 0.0)) throw QuantError("soft-to-hard sharpness a must be positive");
  if (!(d_rel > 0.0 && d_rel <= 1.0)) throw QuantError("d_rel must lie in (0, 1]");
  if (C < 0.0) throw QuantError("normalization constant C must be positive");
  if (range_hi < range_lo) throw QuantError("mu-law range is inverted");
}

double QuantizerSpec::support() const { return d_rel / levels(bits + 1); }

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double inverse_sigmoid(double y) {
  const double c = std::clamp(y, kInverseSigmoidClip, 1.0 - kInverseSigmoidClip);
  return std::log(c / (1.0 - c));
}

double sigmoid_derivative(double x) {
  const double s = sigmoid(x);
  return s * (1.0 - s);
}

double inverse_sigmoid_derivative(double y) {
  if (y < kInverseSigmoidClip || y > 1.0 - kInverseSigmoidClip) return 0.0;
  return 1.0 / (y * (1.0 - y));
}

std::uint32_t quantize(double x, int bits) {
  check_bits(bits);
  const double top = levels(bits) - 1.0;
  const double clipped = std::clamp(x, 0.0, 1.0);
  const double symbol = std::round(levels(bits) * clipped - 0.5);
  return static_cast<std::uint32_t>(std::clamp(symbol, 0.0, top));
}

double dequantize(std::uint32_t symbol, int bits) {
  check_bits(bits);
  if (symbol >= static_cast<std::uint32_t>(levels(bits)))
    throw QuantError("symbol " + std::to_string(symbol) + " out of range for " + std::to_string(bits) + " bits");
  return (static_cast<double>(symbol) + 0.5) / levels(bits);
}

double pqb_surrogate_gradient(double x, int bits, double d, double C) {
  const double cell = 1.0 / levels(bits);
  const double offset = std::fmod(x, cell);
  const double m = (offset < 0.0 ? offset + cell : offset) - 0.5 * cell;
  if (std::abs(m) >= d) return 0.0;
  return bump(m / d) / (C * d);
}

double mu_law_compand(double x, double mu) { return std::log1p(mu * x) / std::log1p(mu); }

double mu_law_expand(double y, double mu) { return std::expm1(y * std::log1p(mu)) / mu; }

double soft_quantize(double x, int bits, double a) {
  const double scaled = levels(bits) * x;
  const int steps = (1 << bits) - 1;
  double sum = 0.0;
  for (int i = 1; i <= steps; ++i) sum += 0.5 * (std::tanh(a * (scaled - i)) + 1.0);
  return sum;
}

double soft_quantize_derivative(double x, int bits, double a) {
  const double scale = levels(bits);
  const double scaled = scale * x;
  const int steps = (1 << bits) - 1;
  double sum = 0.0;
  for (int i = 1; i <= steps; ++i) {
    const double t = std::tanh(a * (scaled - i));
    sum += 0.5 * a * scale * (1.0 - t * t);
  }
  return sum;
}

QuantizerOutput quantizer_forward(std::span<const double> values, const QuantizerSpec& spec, bool soft) {
  spec.validate();
  QuantizerOutput out;
  out.trace.input.assign(values.begin(), values.end());
  if (spec.kind == Kind::none) {
    out.values.assign(values.begin(), values.end());
    return out;
  }

  const std::size_t n = values.size();
  out.values.resize(n);
  out.payload.bits = spec.bits;
  out.payload.symbols.resize(n);
  out.trace.bounded.resize(n);
  out.trace.recovered.resize(n);

  if (spec.kind == Kind::mu_law) {
    if (!spec.has_range()) throw QuantError("mu-law quantizer requires a codeword range");
    const double width = spec.range_hi - spec.range_lo;
    for (std::size_t i = 0; i < n; ++i) {
      const double z = std::clamp((values[i] - spec.range_lo) / width, 0.0, 1.0);
      const double c = mu_law_compand(z, spec.mu);
      const std::uint32_t symbol = quantize(c, spec.bits);
      const double c_hat = dequantize(symbol, spec.bits);
      out.trace.bounded[i] = c;
      out.trace.recovered[i] = c_hat;
      out.payload.symbols[i] = symbol;
      out.values[i] = spec.range_lo + mu_law_expand(c_hat, spec.mu) * width;
    }
    return out;
  }

  out.trace.soft = soft && spec.kind == Kind::soft_to_hard;
  for (std::size_t i = 0; i < n; ++i) {
    const double y = sigmoid(values[i]);
    const std::uint32_t symbol = quantize(y, spec.bits);
    double y_hat = dequantize(symbol, spec.bits);
    if (out.trace.soft) y_hat = (soft_quantize(y, spec.bits, spec.a) + 0.5) / levels(spec.bits);
    out.trace.bounded[i] = y;
    out.trace.recovered[i] = y_hat;
    out.payload.symbols[i] = symbol;
    out.values[i] = inverse_sigmoid(y_hat);
  }
  return out;
}

std::vector<double> quantizer_backward(std::span<const double> grad_out, const QuantizerSpec& spec,
                                       const QuantizerTrace& trace) {
  if (grad_out.size() != trace.input.size())
    throw QuantError("gradient length does not match the forward pass");
  std::vector<double> grad(grad_out.begin(), grad_out.end());
  if (spec.kind == Kind::none || spec.kind == Kind::mu_law) return grad;
  if (trace.bounded.size() != grad.size())
    throw QuantError("forward trace was produced by a different quantizer kind");

  const double scale = levels(spec.bits);
  const double d = spec.support();
  const double C = spec.normalization();
  for (std::size_t i = 0; i < grad.size(); ++i) {
    const double x = trace.input[i];
    const double y = trace.bounded[i];
    double step = 1.0;  // passing gradient: quantize/dequantize treated as identity
    if (spec.kind == Kind::soft_to_hard) {
      step = soft_quantize_derivative(y, spec.bits, spec.a) / scale;
    } else if (spec.kind == Kind::pqb) {
      step = pqb_surrogate_gradient(y, spec.bits, d, C) / scale;
    }
    grad[i] *= inverse_sigmoid_derivative(trace.recovered[i]) * step * sigmoid_derivative(x);
  }
  return grad;
}

double empirical_entropy(std::span<const std::uint32_t> symbols, int bits) {
  if (symbols.empty()) throw QuantError("entropy of an empty symbol stream");
  check_bits(bits);
  std::map<std::uint32_t, std::size_t> counts;
  for (const auto s : symbols) ++counts[s];
  const double total = static_cast<double>(symbols.size());
  double h = 0.0;
  for (const auto& [symbol, count] : counts) {
    const double p = static_cast<double>(count) / total;
    h -= p * std::log2(p);
  }
  // Guard against -0.0 for constant streams.
  return std::max(h, 0.0);
}

std::vector<std::uint8_t> pack_bits(std::span<const std::uint32_t> symbols, int bits) {
  check_bits(bits);
  const std::uint32_t limit = 1u << bits;
  std::vector<std::uint8_t> out((symbols.size() * bits + 7) / 8, 0);
  std::size_t pos = 0;
  for (const auto s : symbols) {
    if (s >= limit) throw QuantError("symbol " + std::to_string(s) + " does not fit in " + std::to_string(bits) + " bits");
    for (int k = bits - 1; k >= 0; --k, ++pos) {
      if ((s >> k) & 1u) out[pos / 8] |= static_cast<std::uint8_t>(0x80u >> (pos % 8));
    }
  }
  return out;
}

std::vector<std::uint32_t> unpack_bits(std::span<const std::uint8_t> bytes, std::size_t count, int bits) {
  check_bits(bits);
  if (bytes.size() * 8 < count * bits)
    throw QuantError("truncated bit stream: need " + std::to_string(count * bits) + " bits, have " +
                     std::to_string(bytes.size() * 8));
  std::vector<std::uint32_t> out(count, 0);
  std::size_t pos = 0;
  for (auto& s : out) {
    for (int k = 0; k < bits; ++k, ++pos) s = (s << 1) | ((bytes[pos / 8] >> (7 - pos % 8)) & 1u);
  }
  return out;
}

std::size_t payload_size(std::size_t n, int bits) { return 3 + (n * bits + 7) / 8; }

std::vector<std::uint8_t> encode_payload(const QuantizedPayload& payload) {
  const std::size_t n = payload.symbols.size();
  if (n > 0xFFFF) throw QuantError("payload holds more than 65535 symbols");
  std::vector<std::uint8_t> out;
  out.reserve(payload_size(n, payload.bits));
  out.push_back(static_cast<std::uint8_t>(n & 0xFF));
  out.push_back(static_cast<std::uint8_t>(n >> 8));
  out.push_back(static_cast<std::uint8_t>(payload.bits));
  const auto body = pack_bits(payload.symbols, payload.bits);
  out.insert(out.end(), body.begin(), body.end());
  return out;
}

QuantizedPayload decode_payload(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 3) throw QuantError("payload shorter than its header");
  const std::size_t n = bytes[0] | (static_cast<std::size_t>(bytes[1]) << 8);
  QuantizedPayload payload;
  payload.bits = bytes[2];
  payload.symbols = unpack_bits(bytes.subspan(3), n, payload.bits);
  return payload;
}

}  // namespace varirate::quant
