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

#ifndef VARIRATE_CHANNEL_HPP
#define VARIRATE_CHANNEL_HPP

#include <complex>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace varirate::channel {

using cdouble = std::complex<double>;

class ChannelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Row-major dense matrix. Rows index subcarriers (or delay taps), columns
// index antennas (or angles).
template <typename Scalar>
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<Scalar> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c) {}

  Scalar& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  const Scalar& operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  std::size_t size() const { return data.size(); }
  bool same_shape(const Matrix& other) const { return rows == other.rows && cols == other.cols; }
  friend bool operator==(const Matrix&, const Matrix&) = default;
};

using ComplexMatrix = Matrix<cdouble>;
using RealMatrix = Matrix<double>;

double energy(const ComplexMatrix& m);
double energy(const RealMatrix& m);

enum class Scenario : std::uint8_t { indoor = 0, outdoor = 1 };

std::string_view to_string(Scenario s);
Scenario scenario_from_string(std::string_view name);

struct DatasetConfig {
  std::uint32_t n_antennas = 16;    // N_t
  std::uint32_t n_subcarriers = 64; // N_s
  std::uint32_t n_delay_kept = 16;  // truncated delay rows
  std::uint32_t num_paths = 6;
  std::uint64_t sample_count = 2000;
  Scenario scenario = Scenario::indoor;
  std::uint64_t master_seed = 1;

  void validate() const;
  friend bool operator==(const DatasetConfig&, const DatasetConfig&) = default;

  static DatasetConfig toy();
  static DatasetConfig full();
};

struct ChannelSample {
  ComplexMatrix downlink;  // N_s x N_t, spatial-frequency
  ComplexMatrix uplink;
  Scenario scenario = Scenario::indoor;
  std::uint64_t seed = 0;
  friend bool operator==(const ChannelSample&, const ChannelSample&) = default;
};

struct Dataset {
  DatasetConfig config;
  std::vector<ChannelSample> samples;
  friend bool operator==(const Dataset&, const Dataset&) = default;
};

// Multipath ULA generator. Entries are rounded to single precision so the
// on-disk float format holds every sample exactly.
Dataset generate_dataset(const DatasetConfig& config);
ChannelSample generate_sample(const DatasetConfig& config, std::uint64_t index);

// H = F_d * Ht * F_a^H with unitary DFT matrices, first `kept_rows` rows.
ComplexMatrix to_angular_delay(const ComplexMatrix& spatial_frequency, std::size_t kept_rows);
// Zero-pads back to `n_subcarriers` rows and inverts both transforms.
ComplexMatrix from_angular_delay(const ComplexMatrix& angular_delay, std::size_t n_subcarriers);

// Joint affine map of real and imaginary parts onto [0, 1]:
// normalized = (value + offset) / scale.
struct Normalization {
  double offset = 0.0;
  double scale = 1.0;
  double apply(double v) const { return (v + offset) / scale; }
  double invert(double v) const { return v * scale - offset; }
};

Normalization fit_normalization(std::span<const ComplexMatrix> train);
Normalization fit_normalization(std::span<const RealMatrix> train);

struct AngularDelayChannel {
  ComplexMatrix matrix;  // normalized
  Normalization norm;
};

AngularDelayChannel normalize(const ComplexMatrix& h, const Normalization& norm);
ComplexMatrix denormalize(const AngularDelayChannel& channel);

struct Polar {
  RealMatrix magnitude;
  RealMatrix phase;  // (-pi, pi], 0 for zero entries
};

Polar to_polar(const ComplexMatrix& h);
ComplexMatrix from_polar(const Polar& p);

// Average over samples of the share of angular-delay energy held in the first
// `kept_rows` delay rows.
double mean_kept_energy_fraction(const Dataset& dataset, std::size_t kept_rows);

inline constexpr std::uint32_t kDatasetFormatVersion = 1;

void save_dataset(const std::filesystem::path& path, const Dataset& dataset);
Dataset load_dataset(const std::filesystem::path& path);

}  // namespace varirate::channel

#endif  // VARIRATE_CHANNEL_HPP
