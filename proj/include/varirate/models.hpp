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

#ifndef VARIRATE_MODELS_HPP
#define VARIRATE_MODELS_HPP

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "varirate/focu.hpp"
#include "varirate/netcore.hpp"
#include "varirate/quant.hpp"

namespace varirate::models {

class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Family { csinetpro, dualnetsph };
enum class Scale { full, toy };

std::string_view to_string(Family f);
std::string_view to_string(Scale s);
Family family_from_string(std::string_view s);
Scale scale_from_string(std::string_view s);

struct ScaleDims {
  int rows = 0;  // kept delay rows
  int cols = 0;  // antennas
  std::array<int, 4> feature_maps{};
  int max_M = 0;
};

ScaleDims dims(Family family, Scale scale);

struct ModelVariant {
  Family family = Family::csinetpro;
  bool changeable_rate = false;
  quant::QuantizerSpec quantizer;
  int M = 0;  // 0 selects the scale's maximum
  Scale scale = Scale::toy;

  int codeword_length() const { return M > 0 ? M : dims(family, scale).max_M; }
  void validate() const;
};

// Encoder: four same-padded 7x7 convs (batch norm + leaky ReLU after each),
// flatten, linear FC to M. Decoder: FC back to the flattened size, reshape,
// four convs with batch norm after the first three, sigmoid output.
netcore::NetworkConfig build_csinetpro(int M, Scale scale);
// Magnitude path; the decoder's first conv also sees the uplink magnitude.
netcore::NetworkConfig build_dualnetsph(int M, Scale scale);
netcore::NetworkConfig build_config(const ModelVariant& variant);

struct FcFlops {
  std::int64_t encoder = 0;  // UE
  std::int64_t decoder = 0;  // BS
};

// FC FLOPs when L codeword entries are active. A fixed-rate config must have
// M == L; a changeable-rate config computes only the first L encoder outputs
// and the decoder only touches the first L inputs.
FcFlops fc_flops_at_length(const netcore::NetworkConfig& config, int L, bool changeable_rate);

template <typename T>
class Autoencoder {
 public:
  Autoencoder(const ModelVariant& variant, std::uint64_t seed);

  const ModelVariant& variant() const { return variant_; }
  const netcore::NetworkConfig& config() const { return config_; }
  int codeword_length() const { return config_.M; }
  bool needs_auxiliary() const { return config_.auxiliary_input; }

  netcore::Network<T>& encoder() { return encoder_; }
  netcore::Network<T>& decoder_head() { return head_; }
  netcore::Network<T>& decoder_body() { return body_; }
  focu::CodewordPath<T>& codeword_path() { return path_; }
  const focu::CodewordPath<T>& codeword_path() const { return path_; }

  void set_changeable_rate(bool on);
  void set_quantizer(const quant::QuantizerSpec& spec);

  netcore::Tensor<T> encode(const netcore::Tensor<T>& input, netcore::Mode mode);
  netcore::Tensor<T> decode(const netcore::Tensor<T>& padded, const netcore::Tensor<T>* aux, netcore::Mode mode);

  netcore::Tensor<T> forward(const netcore::Tensor<T>& input, const netcore::Tensor<T>* aux,
                             std::span<const int> lengths, netcore::Mode mode) {
    return forward(input, aux, lengths, mode, mode);
  }
  netcore::Tensor<T> forward(const netcore::Tensor<T>& input, const netcore::Tensor<T>* aux,
                             std::span<const int> lengths, netcore::Mode encoder_mode, netcore::Mode decoder_mode);
  // Propagates the reconstruction gradient; stops at the codeword when
  // `through_encoder` is false.
  void backward(const netcore::Tensor<T>& grad, bool through_encoder = true);

  // Trainable parameter count of the instantiated layers (batch norm holds 2C).
  std::size_t parameter_count() const;
  std::vector<T> state() const;
  void load_state(std::span<const T> values);
  std::size_t state_size() const;

 private:
  ModelVariant variant_;
  netcore::NetworkConfig config_;
  netcore::Network<T> encoder_, head_, body_;
  focu::CodewordPath<T> path_;
  netcore::Shape body_in_shape_;
};

template <typename T>
Autoencoder<T> attach_focu(Autoencoder<T> model);
template <typename T>
Autoencoder<T> attach_pqb(Autoencoder<T> model, const quant::QuantizerSpec& spec);

inline constexpr std::uint32_t kCheckpointFormatVersion = 1;

void save_checkpoint(const std::filesystem::path& path, const Autoencoder<float>& model);
Autoencoder<float> load_checkpoint(const std::filesystem::path& path);

}  // namespace varirate::models

#endif  // VARIRATE_MODELS_HPP
