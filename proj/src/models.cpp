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

#include "varirate/models.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>

#include "varirate/json_io.hpp"

namespace varirate::models {

using netcore::Activation;
using netcore::LayerKind;
using netcore::LayerSpec;
using netcore::Mode;
using netcore::NetworkConfig;
using netcore::Tensor;

namespace {

constexpr int kKernel = 7;
constexpr char kCheckpointMagic[4] = {'V', 'R', 'C', 'K'};

void conv_block(std::vector<LayerSpec>& layers, int cin, int cout, bool normalize) {
  layers.push_back(LayerSpec::conv(cin, cout, kKernel));
  if (normalize) {
    layers.push_back(LayerSpec::batch_norm(cout));
    layers.push_back(LayerSpec::act(Activation::leaky_relu));
  }
}

NetworkConfig build(Family family, int M, Scale scale) {
  if (M < 1) throw ModelError("codeword length M must be >= 1, got " + std::to_string(M));
  const auto d = dims(family, scale);
  const bool polar = family == Family::dualnetsph;
  const int in_channels = polar ? 1 : 2;
  const int out_maps = d.feature_maps[3];
  const int flat = out_maps * d.rows * d.cols;

  NetworkConfig c;
  c.M = M;
  c.auxiliary_input = polar;
  c.input_channels = in_channels;
  c.height = d.rows;
  c.width = d.cols;

  int cin = in_channels;
  for (const int maps : d.feature_maps) {
    conv_block(c.encoder, cin, maps, true);
    cin = maps;
  }
  c.encoder.push_back(LayerSpec::reshape(flat, 1, 1));
  c.encoder.push_back(LayerSpec::dense(flat, M));

  c.decoder.push_back(LayerSpec::dense(M, flat));
  c.decoder.push_back(LayerSpec::reshape(out_maps, d.rows, d.cols));
  cin = out_maps + (polar ? 1 : 0);
  for (std::size_t i = 0; i < d.feature_maps.size(); ++i) {
    const bool last = i + 1 == d.feature_maps.size();
    conv_block(c.decoder, cin, d.feature_maps[i], !last);
    cin = d.feature_maps[i];
  }
  c.decoder.push_back(LayerSpec::act(Activation::sigmoid));
  c.validate();
  return c;
}

const LayerSpec& first_fc(const std::vector<LayerSpec>& layers) {
  const auto it = std::find_if(layers.begin(), layers.end(),
                               [](const LayerSpec& s) { return s.kind == LayerKind::fully_connected; });
  if (it == layers.end()) throw ModelError("network has no fully connected layer");
  return *it;
}

const LayerSpec& last_fc(const std::vector<LayerSpec>& layers) {
  const auto it = std::find_if(layers.rbegin(), layers.rend(),
                               [](const LayerSpec& s) { return s.kind == LayerKind::fully_connected; });
  if (it == layers.rend()) throw ModelError("network has no fully connected layer");
  return *it;
}

}  // namespace

std::string_view to_string(Family f) { return f == Family::csinetpro ? "csinetpro" : "dualnetsph"; }
std::string_view to_string(Scale s) { return s == Scale::full ? "full" : "toy"; }

Family family_from_string(std::string_view s) {
  if (s == "csinetpro") return Family::csinetpro;
  if (s == "dualnetsph") return Family::dualnetsph;
  throw ModelError("unknown model family '" + std::string(s) + "'");
}

Scale scale_from_string(std::string_view s) {
  if (s == "full") return Scale::full;
  if (s == "toy") return Scale::toy;
  throw ModelError("unknown scale '" + std::string(s) + "'");
}

ScaleDims dims(Family family, Scale scale) {
  const bool polar = family == Family::dualnetsph;
  if (scale == Scale::full) return {32, 32, {16, 8, 4, polar ? 1 : 2}, polar ? 256 : 512};
  return {16, 16, {8, 4, 2, polar ? 1 : 2}, polar ? 32 : 64};
}

void ModelVariant::validate() const {
  if (M < 0) throw ModelError("codeword length must be non-negative");
  // The feedback payload carries the kept length in 16 bits.
  if (codeword_length() > 65535) throw ModelError("codeword length exceeds the 16-bit payload field");
  quantizer.validate();
}

NetworkConfig build_csinetpro(int M, Scale scale) { return build(Family::csinetpro, M, scale); }
NetworkConfig build_dualnetsph(int M, Scale scale) { return build(Family::dualnetsph, M, scale); }

NetworkConfig build_config(const ModelVariant& variant) {
  variant.validate();
  return build(variant.family, variant.codeword_length(), variant.scale);
}

FcFlops fc_flops_at_length(const NetworkConfig& config, int L, bool changeable_rate) {
  if (L < 0 || L > config.M)
    throw ModelError("active length " + std::to_string(L) + " outside [0, " + std::to_string(config.M) + "]");
  const auto& enc = last_fc(config.encoder);
  const auto& dec = first_fc(config.decoder);
  if (!changeable_rate) {
    if (L != config.M) throw ModelError("a fixed-rate network only runs at its own length M");
    return {netcore::count_fc_flops(enc.in_features, enc.out_features),
            netcore::count_fc_flops(dec.in_features, dec.out_features)};
  }
  return {netcore::count_fc_flops(enc.in_features, L), netcore::count_fc_flops(L, dec.out_features)};
}

// --- Autoencoder ------------------------------------------------------------

template <typename T>
Autoencoder<T>::Autoencoder(const ModelVariant& variant, std::uint64_t seed)
    : variant_(variant),
      config_(build_config(variant)),
      path_(config_.M, variant.changeable_rate, variant.quantizer) {
  variant_.M = config_.M;
  encoder_ = netcore::Network<T>(config_.encoder);
  // The decoder splits where the auxiliary channel joins: FC + reshape, then
  // the conv stack.
  const auto split = std::find_if(config_.decoder.begin(), config_.decoder.end(),
                                  [](const LayerSpec& s) { return s.kind == LayerKind::reshape; });
  head_ = netcore::Network<T>({config_.decoder.begin(), split + 1});
  body_ = netcore::Network<T>({split + 1, config_.decoder.end()});
  std::mt19937_64 rng(seed);
  encoder_.initialize(rng);
  head_.initialize(rng);
  body_.initialize(rng);
}

template <typename T>
void Autoencoder<T>::set_changeable_rate(bool on) {
  variant_.changeable_rate = on;
  path_.set_changeable_rate(on);
}

template <typename T>
void Autoencoder<T>::set_quantizer(const quant::QuantizerSpec& spec) {
  path_.set_quantizer(spec);
  variant_.quantizer = spec;
}

template <typename T>
Tensor<T> Autoencoder<T>::encode(const Tensor<T>& input, Mode mode) {
  const netcore::Shape expected{input.shape.n, static_cast<std::size_t>(config_.input_channels),
                                static_cast<std::size_t>(config_.height), static_cast<std::size_t>(config_.width)};
  if (input.shape != expected)
    throw ModelError("input shape " + netcore::to_string(input.shape) + " does not match " +
                     netcore::to_string(expected));
  return encoder_.forward(input, mode);
}

template <typename T>
Tensor<T> Autoencoder<T>::decode(const Tensor<T>& padded, const Tensor<T>* aux, Mode mode) {
  auto h = head_.forward(padded, mode);
  if (config_.auxiliary_input) {
    if (aux == nullptr) throw ModelError("this model needs the uplink magnitude as auxiliary input");
    if (aux->shape.n != h.shape.n || aux->shape.c != 1 || aux->shape.h != h.shape.h || aux->shape.w != h.shape.w)
      throw ModelError("auxiliary input " + netcore::to_string(aux->shape) + " does not match " +
                       netcore::to_string(h.shape));
    Tensor<T> joined({h.shape.n, h.shape.c + 1, h.shape.h, h.shape.w});
    const std::size_t hs = h.shape.sample_size();
    const std::size_t as = aux->shape.sample_size();
    for (std::size_t n = 0; n < h.shape.n; ++n) {
      std::copy_n(h.sample(n), hs, joined.sample(n));
      std::copy_n(aux->sample(n), as, joined.sample(n) + hs);
    }
    h = std::move(joined);
  }
  body_in_shape_ = h.shape;
  return body_.forward(h, mode);
}

template <typename T>
Tensor<T> Autoencoder<T>::forward(const Tensor<T>& input, const Tensor<T>* aux, std::span<const int> lengths,
                                  Mode encoder_mode, Mode decoder_mode) {
  if (config_.auxiliary_input && aux == nullptr)
    throw ModelError("this model needs the uplink magnitude as auxiliary input");
  const auto codewords = encode(input, encoder_mode);
  const auto padded = path_.forward(codewords, lengths, decoder_mode);
  return decode(padded, aux, decoder_mode);
}

template <typename T>
void Autoencoder<T>::backward(const Tensor<T>& grad, bool through_encoder) {
  auto g = body_.backward(grad);
  if (config_.auxiliary_input) {
    // Drop the gradient of the auxiliary channel.
    const netcore::Shape s{g.shape.n, g.shape.c - 1, g.shape.h, g.shape.w};
    Tensor<T> trimmed(s);
    for (std::size_t n = 0; n < s.n; ++n) std::copy_n(g.sample(n), s.sample_size(), trimmed.sample(n));
    g = std::move(trimmed);
  }
  g = head_.backward(g);
  g = path_.backward(g);
  if (through_encoder) encoder_.backward(g);
}

template <typename T>
std::size_t Autoencoder<T>::parameter_count() const {
  return encoder_.parameter_count() + head_.parameter_count() + body_.parameter_count();
}

template <typename T>
std::size_t Autoencoder<T>::state_size() const {
  return encoder_.state_size() + head_.state_size() + body_.state_size();
}

template <typename T>
std::vector<T> Autoencoder<T>::state() const {
  auto out = encoder_.state();
  for (const auto* net : {&head_, &body_}) {
    const auto s = net->state();
    out.insert(out.end(), s.begin(), s.end());
  }
  return out;
}

template <typename T>
void Autoencoder<T>::load_state(std::span<const T> values) {
  if (values.size() != state_size()) throw ModelError("checkpoint state does not match the model");
  std::size_t pos = 0;
  for (auto* net : {&encoder_, &head_, &body_}) {
    const std::size_t n = net->state_size();
    net->load_state(values.subspan(pos, n));
    pos += n;
  }
}

template <typename T>
Autoencoder<T> attach_focu(Autoencoder<T> model) {
  model.set_changeable_rate(true);
  return model;
}

template <typename T>
Autoencoder<T> attach_pqb(Autoencoder<T> model, const quant::QuantizerSpec& spec) {
  spec.validate();
  if (spec.kind == quant::Kind::mu_law && !spec.has_range())
    throw ModelError("a mu-law quantizer needs the codeword range of a trained encoder");
  model.set_quantizer(spec);
  return model;
}

// --- checkpoints ------------------------------------------------------------

void save_checkpoint(const std::filesystem::path& path, const Autoencoder<float>& model) {
  static_assert(std::endian::native == std::endian::little, "checkpoints are written little-endian");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ModelError("cannot open " + path.string() + " for writing");
  const nlohmann::json header = {{"variant", model.variant()}, {"network", model.config()}};
  const std::string text = header.dump();
  const auto values = model.state();
  const auto header_len = static_cast<std::uint32_t>(text.size());
  const auto count = static_cast<std::uint64_t>(values.size());
  os.write(kCheckpointMagic, 4);
  os.write(reinterpret_cast<const char*>(&kCheckpointFormatVersion), 4);
  os.write(reinterpret_cast<const char*>(&header_len), 4);
  os.write(text.data(), static_cast<std::streamsize>(text.size()));
  os.write(reinterpret_cast<const char*>(&count), 8);
  os.write(reinterpret_cast<const char*>(values.data()), static_cast<std::streamsize>(values.size() * sizeof(float)));
  if (!os) throw ModelError("write failed for " + path.string());
}

Autoencoder<float> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ModelError("cannot open " + path.string());
  char magic[4] = {};
  std::uint32_t version = 0, header_len = 0;
  is.read(magic, 4);
  is.read(reinterpret_cast<char*>(&version), 4);
  is.read(reinterpret_cast<char*>(&header_len), 4);
  if (!is || std::memcmp(magic, kCheckpointMagic, 4) != 0) throw ModelError("not a checkpoint file");
  if (version != kCheckpointFormatVersion)
    throw ModelError("unsupported checkpoint version " + std::to_string(version));
  std::string text(header_len, '\0');
  is.read(text.data(), header_len);
  std::uint64_t count = 0;
  is.read(reinterpret_cast<char*>(&count), 8);
  if (!is) throw ModelError("checkpoint header truncated");
  const auto header = nlohmann::json::parse(text);
  const auto variant = header.at("variant").get<ModelVariant>();
  Autoencoder<float> model(variant, 0);
  if (header.at("network").get<NetworkConfig>() != model.config())
    throw ModelError("checkpoint network does not match its declared variant");
  std::vector<float> values(count);
  is.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(count * sizeof(float)));
  if (!is) throw ModelError("checkpoint parameters truncated");
  model.load_state(values);
  return model;
}

template class Autoencoder<float>;
template class Autoencoder<double>;
template Autoencoder<float> attach_focu(Autoencoder<float>);
template Autoencoder<double> attach_focu(Autoencoder<double>);
template Autoencoder<float> attach_pqb(Autoencoder<float>, const quant::QuantizerSpec&);
template Autoencoder<double> attach_pqb(Autoencoder<double>, const quant::QuantizerSpec&);

}  // namespace varirate::models
