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

#include <filesystem>
#include <random>

#include "varirate/models.hpp"

using namespace varirate;
using namespace varirate::models;
using netcore::Mode;
using netcore::Tensor;

namespace {

Tensor<float> uniform_tensor(netcore::Shape s, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(0.f, 1.f);
  Tensor<float> t(s);
  for (auto& v : t.data) v = u(rng);
  return t;
}

}  // namespace

TEST_CASE("full-scale parameter counts match the reference counts") {
  struct Row {
    Family f;
    int M;
    std::int64_t enc, dec;
  };
  const Row rows[] = {
      {Family::csinetpro, 32, 75'654, 77'606},         {Family::csinetpro, 64, 141'222, 143'142},
      {Family::csinetpro, 128, 272'358, 274'214},      {Family::csinetpro, 256, 534'630, 536'358},
      {Family::csinetpro, 512, 1'059'174, 1'060'646},  {Family::dualnetsph, 16, 25'505, 27'233},
      {Family::dualnetsph, 32, 41'905, 43'617},        {Family::dualnetsph, 64, 74'705, 76'385},
      {Family::dualnetsph, 128, 140'305, 141'921},     {Family::dualnetsph, 256, 271'505, 272'993},
  };
  for (const auto& r : rows) {
    const auto p = netcore::count_params(build_config({r.f, false, {}, r.M, Scale::full}));
    CHECK(p.encoder_total == r.enc);
    CHECK(p.decoder_total == r.dec);
    CHECK(p.total == r.enc + r.dec);
  }
}

TEST_CASE("architecture layout") {
  const auto c = build_csinetpro(32, Scale::full);
  CHECK(c.input_channels == 2);
  CHECK(c.height == 32);
  CHECK(c.width == 32);
  CHECK(!c.auxiliary_input);
  CHECK(c.encoder.back().kind == netcore::LayerKind::fully_connected);
  CHECK(c.encoder.back().in_features == 2048);
  CHECK(c.decoder.back().activation == netcore::Activation::sigmoid);
  const auto d = build_dualnetsph(16, Scale::toy);
  CHECK(d.auxiliary_input);
  CHECK(d.input_channels == 1);
  // The first decoder conv also sees the uplink magnitude.
  const auto first_conv = std::find_if(d.decoder.begin(), d.decoder.end(),
                                       [](const auto& s) { return s.kind == netcore::LayerKind::conv2d; });
  CHECK(first_conv->in_channels == 2);
  CHECK_THROWS_AS(build_csinetpro(0, Scale::toy), ModelError);
}

TEST_CASE("fc flops: changeable rate costs the same as fixed rate at every length") {
  for (const auto family : {Family::csinetpro, Family::dualnetsph}) {
    for (const auto scale : {Scale::toy, Scale::full}) {
      const auto dm = dims(family, scale);
      const auto ch = build_config({family, true, {}, 0, scale});
      const std::int64_t F = static_cast<std::int64_t>(family == Family::csinetpro ? 2 : 1) * dm.rows * dm.cols;
      for (int L = 1; L <= dm.max_M; L += std::max(1, dm.max_M / 16)) {
        const auto fixed = build_config({family, false, {}, L, scale});
        const auto a = fc_flops_at_length(ch, L, true);
        const auto b = fc_flops_at_length(fixed, L, false);
        CHECK(a.encoder == b.encoder);
        CHECK(a.decoder == b.decoder);
        CHECK(a.encoder == 2 * F * L);
        CHECK(a.decoder == 2 * L * F);
      }
    }
  }
  const auto fixed = build_config({Family::csinetpro, false, {}, 16, Scale::toy});
  CHECK_THROWS_AS(fc_flops_at_length(fixed, 8, false), ModelError);
}

TEST_CASE("autoencoder forward shapes and the auxiliary input contract") {
  Autoencoder<float> pro({Family::csinetpro, true, {}, 16, Scale::toy}, 1);
  const auto x = uniform_tensor({2, 2, 16, 16}, 1);
  const std::vector<int> lengths = {16, 4};
  const auto y = pro.forward(x, nullptr, lengths, Mode::eval);
  CHECK(y.shape == x.shape);
  for (const auto v : y.data) {
    CHECK(v > 0.f);
    CHECK(v < 1.f);
  }
  CHECK_THROWS_AS(pro.encode(uniform_tensor({1, 1, 16, 16}, 2), Mode::eval), ModelError);

  Autoencoder<float> sph({Family::dualnetsph, true, {}, 0, Scale::toy}, 2);
  CHECK(sph.codeword_length() == dims(Family::dualnetsph, Scale::toy).max_M);
  const auto m = uniform_tensor({2, 1, 16, 16}, 3);
  CHECK_THROWS_AS(sph.forward(m, nullptr, lengths, Mode::eval), ModelError);
  const auto aux = uniform_tensor({2, 1, 16, 16}, 4);
  CHECK(sph.forward(m, &aux, lengths, Mode::eval).shape == m.shape);
}

TEST_CASE("zero kept length makes the decoder independent of the input") {
  Autoencoder<float> model({Family::csinetpro, true, {}, 16, Scale::toy}, 3);
  const std::vector<int> zero = {0};
  const auto a = model.forward(uniform_tensor({1, 2, 16, 16}, 5), nullptr, zero, Mode::eval);
  const auto b = model.forward(uniform_tensor({1, 2, 16, 16}, 6), nullptr, zero, Mode::eval);
  CHECK(a.data == b.data);
}

TEST_CASE("gradients reach both halves; the decoder-only pass leaves the encoder alone") {
  Autoencoder<double> model({Family::dualnetsph, true, {}, 8, Scale::toy}, 4);
  Tensor<double> x({2, 1, 16, 16}), aux({2, 1, 16, 16});
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u;
  for (auto& v : x.data) v = u(rng);
  for (auto& v : aux.data) v = u(rng);
  const auto y = model.forward(x, &aux, std::vector<int>{8, 3}, Mode::train);
  model.backward(Tensor<double>(y.shape, std::vector<double>(y.data.size(), 1e-2)), false);
  auto enc_grad = model.encoder().layer(0).gradients();
  CHECK(std::all_of(enc_grad.begin(), enc_grad.end(), [](double g) { return g == 0.0; }));
  model.forward(x, &aux, std::vector<int>{8, 3}, Mode::train);
  model.backward(Tensor<double>(y.shape, std::vector<double>(y.data.size(), 1e-2)), true);
  enc_grad = model.encoder().layer(0).gradients();
  CHECK(std::any_of(enc_grad.begin(), enc_grad.end(), [](double g) { return g != 0.0; }));
}

TEST_CASE("same seed, same weights; attaching FOCU and PQB") {
  const ModelVariant v{Family::csinetpro, false, {}, 32, Scale::toy};
  Autoencoder<float> a(v, 9), b(v, 9), c(v, 10);
  CHECK(a.state() == b.state());
  CHECK(a.state() != c.state());
  CHECK(a.parameter_count() < a.state_size());
  auto ch = attach_focu(a);
  CHECK(ch.variant().changeable_rate);
  CHECK(ch.state() == a.state());
  auto q = attach_pqb(ch, quant::QuantizerSpec{quant::Kind::pqb, 4});
  CHECK(q.codeword_path().quantizer().kind == quant::Kind::pqb);
  CHECK_THROWS_AS(attach_pqb(ch, quant::QuantizerSpec{quant::Kind::mu_law, 4}), ModelError);
}

TEST_CASE("checkpoint round trip") {
  ModelVariant v{Family::dualnetsph, true, quant::QuantizerSpec{quant::Kind::pqb, 3}, 16, Scale::toy};
  Autoencoder<float> model(v, 12);
  const auto path = std::filesystem::temp_directory_path() / "varirate_test_checkpoint.bin";
  save_checkpoint(path, model);
  const auto back = load_checkpoint(path);
  CHECK(back.state() == model.state());
  CHECK(back.config() == model.config());
  CHECK(back.variant().quantizer.kind == quant::Kind::pqb);
  CHECK(back.variant().quantizer.bits == 3);
  CHECK(back.variant().changeable_rate);
  std::filesystem::resize_file(path, 30);
  CHECK_THROWS_AS(load_checkpoint(path), ModelError);
  std::filesystem::remove(path);
}

TEST_CASE("variant validation and names") {
  CHECK(family_from_string("dualnetsph") == Family::dualnetsph);
  CHECK(scale_from_string("full") == Scale::full);
  CHECK_THROWS_AS(family_from_string("csinet"), ModelError);
  ModelVariant v{Family::csinetpro, false, {}, 70000, Scale::toy};
  CHECK_THROWS_AS(v.validate(), ModelError);
}
