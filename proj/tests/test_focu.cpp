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
#include <random>

#include "varirate/focu.hpp"
#include "varirate/models.hpp"

using namespace varirate;
using namespace varirate::focu;
using netcore::Mode;
using netcore::Shape;
using netcore::Tensor;

TEST_CASE("truncate and zero-pad") {
  const auto c = make_codeword({1, 2, 3, 4});
  CHECK(c.capacity() == 4);
  const auto t = truncate(c, 2);
  CHECK(t.values == std::vector<double>{1, 2, 0, 0});
  CHECK(t.active_length == 2);
  CHECK(truncate(c, 0).values == std::vector<double>(4, 0.0));
  CHECK(truncate(c, 4).values == c.values);
  CHECK_THROWS_AS(truncate(c, 5), FocuError);
  CHECK_THROWS_AS(truncate(c, -1), FocuError);
  const auto p = zero_pad(t.payload(), 4);
  CHECK(p.values == t.values);
  CHECK_THROWS_AS(zero_pad(c.values, 3), FocuError);
}

TEST_CASE("float payload round trip") {
  const auto c = truncate(make_codeword({0.25, -1.5, 3.0}), 2);
  const auto bytes = encode_float_payload(c);
  CHECK(bytes.size() == 2 + 2 * 4);
  const auto back = decode_float_payload(bytes, 3);
  CHECK(back.values == c.values);
  CHECK_THROWS_AS(decode_float_payload(std::vector<std::uint8_t>{2, 0, 1}, 3), FocuError);
}

TEST_CASE("overhead sampling is uniform over 0..M") {
  const int M = 8;
  const std::size_t draws = 1'000'000;
  std::vector<std::size_t> counts(M + 1, 0);
  std::mt19937_64 rng(17);
  const auto policy = OverheadPolicy::uniform(M);
  for (std::size_t i = 0; i < draws; ++i) ++counts.at(sample_overhead(policy, M, rng));
  const double p = 1.0 / (M + 1);
  const double expected = draws * p;
  const double sigma = std::sqrt(draws * p * (1 - p));
  for (const auto c : counts) CHECK(std::abs(static_cast<double>(c) - expected) < 3 * sigma);
}

TEST_CASE("overhead policies") {
  std::mt19937_64 rng(1);
  CHECK(sample_overhead(OverheadPolicy::fixed(5), 8, rng) == 5);
  CHECK(sample_overhead(OverheadPolicy{}, 0, rng) == 0);
  CHECK_THROWS_AS(OverheadPolicy::fixed(9).validate(8), FocuError);
  OverheadPolicy w;
  w.weights = {0, 0, 1};
  CHECK_NOTHROW(w.validate(2));
  for (int i = 0; i < 20; ++i) CHECK(sample_overhead(w, 2, rng) == 2);
  w.weights = {0, 0, 0};
  CHECK_THROWS_AS(w.validate(2), FocuError);
  w.weights = {1, 1};
  CHECK_THROWS_AS(w.validate(2), FocuError);
}

TEST_CASE("mse loss and its gradient") {
  Tensor<double> a({1, 1, 1, 2}, {1.0, 3.0});
  Tensor<double> b({1, 1, 1, 2}, {0.0, 1.0});
  const auto e = mse_loss(a, b);
  CHECK(e.loss == doctest::Approx(2.5));
  CHECK(e.grad.data == std::vector<double>{1.0, 2.0});
  CHECK_THROWS_AS(mse_loss(a, Tensor<double>({1, 1, 1, 3})), FocuError);
}

TEST_CASE("codeword path truncates, pads and blocks the discarded gradient") {
  CodewordPath<double> path(4, true);
  Tensor<double> c({2, 4, 1, 1}, {1, 2, 3, 4, 5, 6, 7, 8});
  const std::vector<int> lengths = {1, 3};
  const auto y = path.forward(c, lengths, Mode::train);
  CHECK(y.data == std::vector<double>{1, 0, 0, 0, 5, 6, 7, 0});
  const auto g = path.backward(Tensor<double>(c.shape, std::vector<double>(8, 1.0)));
  CHECK(g.data == std::vector<double>{1, 0, 0, 0, 1, 1, 1, 0});
  CHECK_THROWS_AS(path.forward(c, std::vector<int>{5, 1}, Mode::train), FocuError);
  CHECK_THROWS_AS(path.forward(c, std::vector<int>{1}, Mode::train), FocuError);

  CodewordPath<double> fixed(4, false);
  CHECK_NOTHROW(fixed.forward(c, std::vector<int>{4, 4}, Mode::eval));
  CHECK_THROWS_AS(fixed.forward(c, lengths, Mode::eval), FocuError);
}

TEST_CASE("quantized codeword path emits the payload symbols") {
  CodewordPath<double> path(3, true, quant::QuantizerSpec{quant::Kind::pqb, 2});
  Tensor<double> c({1, 3, 1, 1}, {-3.0, 0.1, 3.0});
  const auto y = path.forward(c, std::vector<int>{2}, Mode::eval);
  REQUIRE(path.payloads().size() == 1);
  CHECK(path.payloads()[0].symbols == std::vector<std::uint32_t>{0, 2});
  CHECK(y.data[2] == 0.0);
  CHECK(y.data[0] == doctest::Approx(quant::inverse_sigmoid(0.125)));
}

TEST_CASE("soft-to-hard codeword layer passes a gradient check") {
  CodewordLayer<double> layer(CodewordPath<double>(6, true, quant::QuantizerSpec{quant::Kind::soft_to_hard, 3, 255, 2.0}));
  CHECK(layer.differentiable());
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  Tensor<double> x({2, 6, 1, 1});
  for (auto& v : x.data) v = g(rng);
  const auto r = netcore::gradient_check(layer, x);
  CHECK(r.coordinates_checked == 12);
  CHECK(r.max_rel_error < 1e-4);
}

TEST_CASE("hard quantizers are skipped by the gradient check and reported") {
  netcore::Network<double> net({netcore::LayerSpec::dense(4, 3)});
  std::mt19937_64 rng(1);
  net.initialize(rng);
  net.add(std::make_unique<CodewordLayer<double>>(CodewordPath<double>(3, false, quant::QuantizerSpec{quant::Kind::pqb, 4})));
  Tensor<double> x({2, 4, 1, 1}, {0.1, -0.2, 0.3, 0.5, 1.0, 0.0, -1.0, 0.2});
  const auto r = netcore::gradient_check(net, x);
  REQUIRE(r.skipped.size() == 1);
  CHECK(r.skipped[0] == "codeword_path(pqb)");
  CHECK(r.max_rel_error < 1e-4);
}

TEST_CASE("changeable-rate loss samples one kept length per sample") {
  models::ModelVariant v{models::Family::csinetpro, true, {}, 8, models::Scale::toy};
  models::Autoencoder<float> model(v, 5);
  Tensor<float> x({3, 2, 16, 16});
  std::mt19937_64 data_rng(2);
  std::uniform_real_distribution<float> u(0.f, 1.f);
  for (auto& e : x.data) e = u(data_rng);
  std::mt19937_64 rng(4);
  const auto e = changeable_rate_loss(model, x, static_cast<const Tensor<float>*>(nullptr), x,
                                      OverheadPolicy::uniform(8), rng, Mode::eval);
  CHECK(e.lengths.size() == 3);
  for (const int k : e.lengths) {
    CHECK(k >= 0);
    CHECK(k <= 8);
  }
  CHECK(std::isfinite(e.loss));
  const auto fixed = changeable_rate_loss(model, x, static_cast<const Tensor<float>*>(nullptr), x,
                                          OverheadPolicy::fixed(8), rng, Mode::eval);
  CHECK(fixed.lengths == std::vector<int>(3, 8));
}
