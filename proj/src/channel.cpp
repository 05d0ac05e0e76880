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

#include "varirate/channel.hpp"

#include <fftw3.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <mutex>
#include <numbers>
#include <random>

namespace varirate::channel {

namespace {

constexpr char kMagic[4] = {'V', 'R', 'D', 'S'};

// The FFTW planner is not re-entrant; execution is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

enum class Axis { columns, rows };

// In-place unitary DFT along one axis of a row-major matrix, restricted to the
// first `active_rows` rows when transforming along rows.
void dft_axis(ComplexMatrix& m, Axis axis, int sign, std::size_t active_rows) {
  if (m.size() == 0) return;
  auto* buf = reinterpret_cast<fftw_complex*>(m.data.data());
  const int n_rows = static_cast<int>(m.rows);
  const int n_cols = static_cast<int>(m.cols);
  fftw_plan plan;
  double scale;
  {
    std::lock_guard lock(planner_mutex());
    if (axis == Axis::columns) {
      const int n[] = {n_rows};
      plan = fftw_plan_many_dft(1, n, n_cols, buf, nullptr, n_cols, 1, buf, nullptr, n_cols, 1, sign,
                                FFTW_ESTIMATE);
      scale = 1.0 / std::sqrt(static_cast<double>(n_rows));
    } else {
      const int n[] = {n_cols};
      plan = fftw_plan_many_dft(1, n, static_cast<int>(active_rows), buf, nullptr, 1, n_cols, buf, nullptr, 1,
                                n_cols, sign, FFTW_ESTIMATE);
      scale = 1.0 / std::sqrt(static_cast<double>(n_cols));
    }
  }
  fftw_execute(plan);
  {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(plan);
  }
  const std::size_t limit = axis == Axis::columns ? m.size() : active_rows * m.cols;
  for (std::size_t i = 0; i < limit; ++i) m.data[i] *= scale;
}

double round_to_float(double v) { return static_cast<double>(static_cast<float>(v)); }

struct ScenarioPreset {
  double delay_spread;  // mean excess delay, as a fraction of kept rows
  double max_delay;     // as a fraction of kept rows
  double angle_spread;  // radians; 0 means uniform over the sector
};

ScenarioPreset preset(Scenario s) {
  switch (s) {
    case Scenario::indoor: return {0.12, 0.6, 0.0};
    case Scenario::outdoor: return {0.2, 0.7, std::numbers::pi / 18.0};
  }
  return {0.12, 0.6, 0.0};
}

// First delay tap kept clear of zero so sinc leakage does not wrap into the
// discarded tail rows.
constexpr double kMinDelay = 2.0;

template <typename T>
void write_pod(std::ostream& os, T value) {
  os.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is) {
  T value{};
  is.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!is) throw ChannelError("unexpected end of dataset file");
  return value;
}

void write_matrix(std::ostream& os, const ComplexMatrix& m) {
  std::vector<float> buf(2 * m.size());
  for (std::size_t i = 0; i < m.size(); ++i) {
    buf[2 * i] = static_cast<float>(m.data[i].real());
    buf[2 * i + 1] = static_cast<float>(m.data[i].imag());
  }
  os.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size() * sizeof(float)));
}

ComplexMatrix read_matrix(std::istream& is, std::size_t rows, std::size_t cols) {
  ComplexMatrix m(rows, cols);
  std::vector<float> buf(2 * m.size());
  is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size() * sizeof(float)));
  if (!is) throw ChannelError("dataset file truncated");
  for (std::size_t i = 0; i < m.size(); ++i) m.data[i] = {buf[2 * i], buf[2 * i + 1]};
  return m;
}

static_assert(std::numeric_limits<float>::is_iec559, "dataset files assume IEEE-754 floats");

}  // namespace

double energy(const ComplexMatrix& m) {
  double e = 0.0;
  for (const auto& v : m.data) e += std::norm(v);
  return e;
}

double energy(const RealMatrix& m) {
  double e = 0.0;
  for (const auto v : m.data) e += v * v;
  return e;
}

std::string_view to_string(Scenario s) { return s == Scenario::indoor ? "indoor" : "outdoor"; }

Scenario scenario_from_string(std::string_view name) {
  if (name == "indoor") return Scenario::indoor;
  if (name == "outdoor") return Scenario::outdoor;
  throw ChannelError("unknown scenario '" + std::string(name) + "'");
}

void DatasetConfig::validate() const {
  if (n_antennas < 1) throw ChannelError("N_t must be at least 1");
  if (n_subcarriers < 1) throw ChannelError("N_s must be at least 1");
  if (n_delay_kept < 1 || n_delay_kept > n_subcarriers) throw ChannelError("kept delay rows must lie in [1, N_s]");
  if (num_paths < 1) throw ChannelError("num_paths must be at least 1");
}

DatasetConfig DatasetConfig::toy() { return DatasetConfig{}; }

DatasetConfig DatasetConfig::full() {
  DatasetConfig c;
  c.n_antennas = 32;
  c.n_subcarriers = 1024;
  c.n_delay_kept = 32;
  c.num_paths = 20;
  c.sample_count = 100000;
  return c;
}

ChannelSample generate_sample(const DatasetConfig& config, std::uint64_t index) {
  const std::uint64_t seed = config.master_seed + index;
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 0x5eedu};
  std::mt19937_64 rng(seq);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  const auto p = preset(config.scenario);
  const double kept = config.n_delay_kept;
  const double max_delay = std::max(kMinDelay, p.max_delay * kept);
  const double mean_excess = p.delay_spread * kept;
  const double cluster_center = (unit(rng) - 0.5) * std::numbers::pi;

  struct Path {
    double delay, sin_angle;
    cdouble gain_dl, gain_ul;
  };
  std::vector<Path> paths(config.num_paths);
  for (auto& path : paths) {
    const double excess = -mean_excess * std::log(1.0 - unit(rng));
    path.delay = std::min(kMinDelay + excess, max_delay);
    const double angle = p.angle_spread > 0.0 ? cluster_center + p.angle_spread * gauss(rng)
                                              : (unit(rng) - 0.5) * std::numbers::pi;
    path.sin_angle = std::sin(angle);
    const double power = std::exp(-(path.delay - kMinDelay) / std::max(mean_excess, 1e-9));
    const double amp = std::sqrt(power / 2.0);
    path.gain_dl = {amp * gauss(rng), amp * gauss(rng)};
    // Uplink keeps the geometry; magnitude is perturbed, phase redrawn.
    const double mag = std::abs(path.gain_dl) * std::max(0.0, 1.0 + 0.1 * gauss(rng));
    path.gain_ul = std::polar(mag, 2.0 * std::numbers::pi * unit(rng));
  }

  const std::size_t ns = config.n_subcarriers;
  const std::size_t nt = config.n_antennas;
  ChannelSample sample{ComplexMatrix(ns, nt), ComplexMatrix(ns, nt), config.scenario, seed};
  for (const auto& path : paths) {
    for (std::size_t k = 0; k < ns; ++k) {
      const cdouble freq = std::polar(1.0, 2.0 * std::numbers::pi * static_cast<double>(k) * path.delay / ns);
      for (std::size_t m = 0; m < nt; ++m) {
        const cdouble steer = std::polar(1.0, -std::numbers::pi * static_cast<double>(m) * path.sin_angle);
        sample.downlink(k, m) += path.gain_dl * freq * steer;
        sample.uplink(k, m) += path.gain_ul * freq * steer;
      }
    }
  }

  // Unit average entry power on the downlink; uplink shares the factor.
  const double e = energy(sample.downlink);
  const double gain = e > 0.0 ? std::sqrt(static_cast<double>(ns * nt) / e) : 1.0;
  for (auto* m : {&sample.downlink, &sample.uplink}) {
    for (auto& v : m->data) v = {round_to_float(v.real() * gain), round_to_float(v.imag() * gain)};
  }
  return sample;
}

Dataset generate_dataset(const DatasetConfig& config) {
  config.validate();
  Dataset ds{config, {}};
  ds.samples.reserve(config.sample_count);
  for (std::uint64_t i = 0; i < config.sample_count; ++i) ds.samples.push_back(generate_sample(config, i));
  return ds;
}

ComplexMatrix to_angular_delay(const ComplexMatrix& spatial_frequency, std::size_t kept_rows) {
  if (kept_rows > spatial_frequency.rows)
    throw ChannelError("cannot keep " + std::to_string(kept_rows) + " of " + std::to_string(spatial_frequency.rows) +
                       " delay rows");
  ComplexMatrix work = spatial_frequency;
  dft_axis(work, Axis::columns, FFTW_FORWARD, work.rows);
  dft_axis(work, Axis::rows, FFTW_BACKWARD, kept_rows);
  work.data.resize(kept_rows * work.cols);
  work.rows = kept_rows;
  return work;
}

ComplexMatrix from_angular_delay(const ComplexMatrix& angular_delay, std::size_t n_subcarriers) {
  if (angular_delay.rows > n_subcarriers)
    throw ChannelError("angular-delay matrix has more rows than subcarriers");
  ComplexMatrix work(n_subcarriers, angular_delay.cols);
  std::copy(angular_delay.data.begin(), angular_delay.data.end(), work.data.begin());
  dft_axis(work, Axis::rows, FFTW_FORWARD, angular_delay.rows);
  dft_axis(work, Axis::columns, FFTW_BACKWARD, work.rows);
  return work;
}

Normalization fit_normalization(std::span<const ComplexMatrix> train) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const auto& m : train) {
    for (const auto& v : m.data) {
      lo = std::min({lo, v.real(), v.imag()});
      hi = std::max({hi, v.real(), v.imag()});
    }
  }
  if (!(hi > lo)) throw ChannelError("normalization needs a non-zero dynamic range");
  return {-lo, hi - lo};
}

Normalization fit_normalization(std::span<const RealMatrix> train) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const auto& m : train) {
    for (const auto v : m.data) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  if (!(hi > lo)) throw ChannelError("normalization needs a non-zero dynamic range");
  return {-lo, hi - lo};
}

AngularDelayChannel normalize(const ComplexMatrix& h, const Normalization& norm) {
  if (!(norm.scale > 0.0)) throw ChannelError("normalization scale must be positive");
  AngularDelayChannel out{h, norm};
  for (auto& v : out.matrix.data) v = {norm.apply(v.real()), norm.apply(v.imag())};
  return out;
}

ComplexMatrix denormalize(const AngularDelayChannel& channel) {
  ComplexMatrix out = channel.matrix;
  for (auto& v : out.data) v = {channel.norm.invert(v.real()), channel.norm.invert(v.imag())};
  return out;
}

Polar to_polar(const ComplexMatrix& h) {
  Polar p{RealMatrix(h.rows, h.cols), RealMatrix(h.rows, h.cols)};
  for (std::size_t i = 0; i < h.size(); ++i) {
    p.magnitude.data[i] = std::abs(h.data[i]);
    // atan2 returns -pi for (-x, -0.0); fold onto the half-open interval.
    double phase = h.data[i] == cdouble{} ? 0.0 : std::arg(h.data[i]);
    if (phase <= -std::numbers::pi) phase = std::numbers::pi;
    p.phase.data[i] = phase;
  }
  return p;
}

ComplexMatrix from_polar(const Polar& p) {
  ComplexMatrix h(p.magnitude.rows, p.magnitude.cols);
  for (std::size_t i = 0; i < h.size(); ++i) h.data[i] = std::polar(p.magnitude.data[i], p.phase.data[i]);
  return h;
}

double mean_kept_energy_fraction(const Dataset& dataset, std::size_t kept_rows) {
  if (dataset.samples.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& s : dataset.samples) {
    const auto full = to_angular_delay(s.downlink, s.downlink.rows);
    double kept = 0.0;
    for (std::size_t i = 0; i < kept_rows * full.cols; ++i) kept += std::norm(full.data[i]);
    sum += kept / energy(full);
  }
  return sum / static_cast<double>(dataset.samples.size());
}

void save_dataset(const std::filesystem::path& path, const Dataset& dataset) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ChannelError("cannot open " + path.string() + " for writing");
  const auto& c = dataset.config;
  os.write(kMagic, sizeof(kMagic));
  write_pod(os, kDatasetFormatVersion);
  write_pod(os, c.n_antennas);
  write_pod(os, c.n_subcarriers);
  write_pod(os, c.n_delay_kept);
  write_pod(os, c.num_paths);
  write_pod(os, static_cast<std::uint64_t>(dataset.samples.size()));
  write_pod(os, static_cast<std::uint8_t>(c.scenario));
  write_pod(os, c.master_seed);
  for (const auto& s : dataset.samples) {
    if (s.downlink.rows != c.n_subcarriers || s.downlink.cols != c.n_antennas || !s.downlink.same_shape(s.uplink))
      throw ChannelError("sample shape does not match the dataset config");
    write_matrix(os, s.downlink);
    write_matrix(os, s.uplink);
  }
  if (!os) throw ChannelError("write failed for " + path.string());
}

Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ChannelError("cannot open " + path.string());
  char magic[4] = {};
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) throw ChannelError("not a dataset file: bad magic");
  const auto version = read_pod<std::uint32_t>(is);
  if (version != kDatasetFormatVersion)
    throw ChannelError("unsupported dataset format version " + std::to_string(version));
  Dataset ds;
  auto& c = ds.config;
  c.n_antennas = read_pod<std::uint32_t>(is);
  c.n_subcarriers = read_pod<std::uint32_t>(is);
  c.n_delay_kept = read_pod<std::uint32_t>(is);
  c.num_paths = read_pod<std::uint32_t>(is);
  c.sample_count = read_pod<std::uint64_t>(is);
  const auto scenario = read_pod<std::uint8_t>(is);
  if (scenario > 1) throw ChannelError("corrupt dataset header: scenario " + std::to_string(scenario));
  c.scenario = static_cast<Scenario>(scenario);
  c.master_seed = read_pod<std::uint64_t>(is);
  c.validate();
  ds.samples.reserve(c.sample_count);
  for (std::uint64_t i = 0; i < c.sample_count; ++i) {
    ChannelSample s;
    s.downlink = read_matrix(is, c.n_subcarriers, c.n_antennas);
    s.uplink = read_matrix(is, c.n_subcarriers, c.n_antennas);
    s.scenario = c.scenario;
    s.seed = c.master_seed + i;
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

}  // namespace varirate::channel
