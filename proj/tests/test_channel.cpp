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

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>

#include "varirate/channel.hpp"

using namespace varirate::channel;

namespace {

ComplexMatrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  ComplexMatrix m(rows, cols);
  for (auto& v : m.data) v = {g(rng), g(rng)};
  return m;
}

// Direct O(N^4) evaluation of the unitary 2-D DFT: forward along the
// subcarrier (row index) axis, inverse along the antenna axis.
ComplexMatrix brute_force_ad(const ComplexMatrix& h, std::size_t kept) {
  const double pi = std::numbers::pi;
  const auto Ns = static_cast<double>(h.rows), Nt = static_cast<double>(h.cols);
  ComplexMatrix out(kept, h.cols);
  for (std::size_t p = 0; p < kept; ++p) {
    for (std::size_t q = 0; q < h.cols; ++q) {
      cdouble acc = 0;
      for (std::size_t k = 0; k < h.rows; ++k)
        for (std::size_t j = 0; j < h.cols; ++j)
          acc += h(k, j) * std::polar(1.0, -2 * pi * p * k / Ns + 2 * pi * q * j / Nt);
      out(p, q) = acc / std::sqrt(Ns * Nt);
    }
  }
  return out;
}

double max_abs_diff(const ComplexMatrix& a, const ComplexMatrix& b) {
  REQUIRE(a.same_shape(b));
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a.data[i] - b.data[i]));
  return worst;
}

}  // namespace

TEST_CASE("angular-delay transform agrees with a direct DFT") {
  const auto h = random_matrix(12, 8, 1);
  CHECK(max_abs_diff(to_angular_delay(h, 12), brute_force_ad(h, 12)) < 1e-12);
  CHECK(max_abs_diff(to_angular_delay(h, 5), brute_force_ad(h, 5)) < 1e-12);
}

TEST_CASE("the full transform is unitary and invertible") {
  const auto h = random_matrix(64, 16, 2);
  const auto ad = to_angular_delay(h, 64);
  CHECK(std::abs(energy(ad) - energy(h)) <= 1e-9 * energy(h));
  CHECK(max_abs_diff(from_angular_delay(ad, 64), h) < 1e-12);
  CHECK_THROWS_AS(to_angular_delay(h, 65), ChannelError);
}

TEST_CASE("truncation loses exactly the discarded delay energy") {
  const auto cfg = DatasetConfig::toy();
  const auto s = generate_sample(cfg, 3);
  const auto full = to_angular_delay(s.downlink, cfg.n_subcarriers);
  for (const std::size_t kept : {1u, 8u, 16u, 40u}) {
    double discarded = 0.0;
    for (std::size_t i = kept * full.cols; i < full.size(); ++i) discarded += std::norm(full.data[i]);
    const auto back = from_angular_delay(to_angular_delay(s.downlink, kept), cfg.n_subcarriers);
    double err = 0.0;
    for (std::size_t i = 0; i < back.size(); ++i) err += std::norm(back.data[i] - s.downlink.data[i]);
    CHECK(std::abs(err / energy(s.downlink) - discarded / energy(full)) <= 1e-9);
  }
}

TEST_CASE("generated channels concentrate in the kept delay rows") {
  for (const auto scenario : {Scenario::indoor, Scenario::outdoor}) {
    auto cfg = DatasetConfig::toy();
    cfg.sample_count = 40;
    cfg.scenario = scenario;
    const auto d = generate_dataset(cfg);
    CHECK(d.samples.size() == 40);
    CHECK(mean_kept_energy_fraction(d, cfg.n_delay_kept) > 0.9);
    for (const auto& s : d.samples) {
      CHECK(s.downlink.rows == cfg.n_subcarriers);
      CHECK(s.downlink.cols == cfg.n_antennas);
      // Unit average entry power, up to float rounding.
      CHECK(energy(s.downlink) / s.downlink.size() == doctest::Approx(1.0).epsilon(1e-5));
      CHECK(s.uplink.same_shape(s.downlink));
      CHECK(s.uplink != s.downlink);
    }
  }
}

TEST_CASE("generation is deterministic per index") {
  auto cfg = DatasetConfig::toy();
  cfg.sample_count = 5;
  const auto a = generate_dataset(cfg);
  const auto b = generate_dataset(cfg);
  CHECK(a == b);
  CHECK(generate_sample(cfg, 3) == a.samples[3]);
  cfg.master_seed = 2;
  CHECK(generate_sample(cfg, 3) != a.samples[3]);
  cfg.sample_count = 0;
  CHECK(generate_dataset(cfg).samples.empty());
}

TEST_CASE("config validation") {
  auto cfg = DatasetConfig::toy();
  cfg.n_delay_kept = cfg.n_subcarriers + 1;
  CHECK_THROWS_AS(cfg.validate(), ChannelError);
  cfg = DatasetConfig::toy();
  cfg.num_paths = 0;
  CHECK_THROWS_AS(cfg.validate(), ChannelError);
  CHECK_NOTHROW(DatasetConfig::full().validate());
  CHECK(scenario_from_string(to_string(Scenario::outdoor)) == Scenario::outdoor);
  CHECK_THROWS_AS(scenario_from_string("tunnel"), ChannelError);
}

TEST_CASE("normalization maps the training range onto [0, 1]") {
  std::vector<ComplexMatrix> train = {random_matrix(4, 4, 5), random_matrix(4, 4, 6)};
  const auto n = fit_normalization(std::span<const ComplexMatrix>(train));
  double lo = 1e9, hi = -1e9;
  for (const auto& m : train) {
    const auto t = normalize(m, n);
    CHECK(max_abs_diff(denormalize(t), m) < 1e-12);
    for (const auto& v : t.matrix.data) {
      lo = std::min({lo, v.real(), v.imag()});
      hi = std::max({hi, v.real(), v.imag()});
    }
  }
  CHECK(lo == doctest::Approx(0.0));
  CHECK(hi == doctest::Approx(1.0));
  std::vector<RealMatrix> flat = {RealMatrix(2, 2)};
  CHECK_THROWS_AS(fit_normalization(std::span<const RealMatrix>(flat)), ChannelError);
}

TEST_CASE("polar round trip") {
  auto h = random_matrix(16, 16, 7);
  h(0, 0) = 0.0;
  h(0, 1) = {-1.0, 0.0};
  const auto p = to_polar(h);
  CHECK(p.phase(0, 0) == 0.0);
  CHECK(p.phase(0, 1) == doctest::Approx(std::numbers::pi));
  for (const auto v : p.magnitude.data) CHECK(v >= 0.0);
  for (const auto v : p.phase.data) {
    CHECK(v > -std::numbers::pi);
    CHECK(v <= std::numbers::pi);
  }
  CHECK(max_abs_diff(from_polar(p), h) <= 1e-9);
}

TEST_CASE("dataset files round trip losslessly") {
  auto cfg = DatasetConfig::toy();
  cfg.sample_count = 6;
  cfg.scenario = Scenario::outdoor;
  cfg.master_seed = 44;
  const auto d = generate_dataset(cfg);
  const auto path = std::filesystem::temp_directory_path() / "varirate_test_dataset.bin";
  save_dataset(path, d);
  CHECK(std::filesystem::file_size(path) ==
        4 + 4 * 5 + 8 + 1 + 8 + cfg.sample_count * 2 * cfg.n_subcarriers * cfg.n_antennas * 8);
  CHECK(load_dataset(path) == d);
  std::filesystem::resize_file(path, 100);
  CHECK_THROWS_AS(load_dataset(path), ChannelError);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(load_dataset(path), ChannelError);
}
