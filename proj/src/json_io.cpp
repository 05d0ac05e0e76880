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

#include "varirate/json_io.hpp"

namespace varirate::quant {

void to_json(nlohmann::json& j, const QuantizerSpec& s) {
  j = {{"kind", to_string(s.kind)}, {"bits", s.bits}, {"mu", s.mu},           {"a", s.a},
       {"d_rel", s.d_rel},         {"C", s.C},       {"range_lo", s.range_lo}, {"range_hi", s.range_hi}};
}

void from_json(const nlohmann::json& j, QuantizerSpec& s) {
  QuantizerSpec d;
  s.kind = kind_from_string(j.value("kind", std::string("none")));
  s.bits = j.value("bits", d.bits);
  s.mu = j.value("mu", d.mu);
  s.a = j.value("a", d.a);
  s.d_rel = j.value("d_rel", d.d_rel);
  s.C = j.value("C", d.C);
  s.range_lo = j.value("range_lo", d.range_lo);
  s.range_hi = j.value("range_hi", d.range_hi);
}

}  // namespace varirate::quant

namespace varirate::netcore {

void to_json(nlohmann::json& j, const LayerSpec& s) {
  j = {{"kind", to_string(s.kind)}};
  switch (s.kind) {
    case LayerKind::conv2d:
      j["in_channels"] = s.in_channels;
      j["out_channels"] = s.out_channels;
      j["kernel"] = s.kernel;
      break;
    case LayerKind::fully_connected:
      j["in_features"] = s.in_features;
      j["out_features"] = s.out_features;
      break;
    case LayerKind::batch_norm: j["channels"] = s.out_channels; break;
    case LayerKind::activation: j["activation"] = to_string(s.activation); break;
    case LayerKind::reshape: j["shape"] = {s.channels, s.height, s.width}; break;
  }
}

void from_json(const nlohmann::json& j, LayerSpec& s) {
  const auto kind = layer_kind_from_string(j.at("kind").get<std::string>());
  switch (kind) {
    case LayerKind::conv2d:
      s = LayerSpec::conv(j.at("in_channels"), j.at("out_channels"), j.at("kernel"));
      break;
    case LayerKind::fully_connected: s = LayerSpec::dense(j.at("in_features"), j.at("out_features")); break;
    case LayerKind::batch_norm: s = LayerSpec::batch_norm(j.at("channels")); break;
    case LayerKind::activation: s = LayerSpec::act(activation_from_string(j.at("activation").get<std::string>())); break;
    case LayerKind::reshape: {
      const auto& sh = j.at("shape");
      s = LayerSpec::reshape(sh.at(0), sh.at(1), sh.at(2));
      break;
    }
  }
}

void to_json(nlohmann::json& j, const NetworkConfig& c) {
  j = {{"encoder", c.encoder},
       {"decoder", c.decoder},
       {"M", c.M},
       {"auxiliary_input", c.auxiliary_input},
       {"input_shape", {c.input_channels, c.height, c.width}}};
}

void from_json(const nlohmann::json& j, NetworkConfig& c) {
  c.encoder = j.at("encoder").get<std::vector<LayerSpec>>();
  c.decoder = j.at("decoder").get<std::vector<LayerSpec>>();
  c.M = j.at("M");
  c.auxiliary_input = j.at("auxiliary_input");
  const auto& sh = j.at("input_shape");
  c.input_channels = sh.at(0);
  c.height = sh.at(1);
  c.width = sh.at(2);
}

void to_json(nlohmann::json& j, const ParamBreakdown& p) {
  auto layers = [](const std::vector<LayerCount>& v) {
    auto arr = nlohmann::json::array();
    for (const auto& l : v) {
      nlohmann::json e = l.spec;
      e["params"] = l.params;
      arr.push_back(std::move(e));
    }
    return arr;
  };
  j = {{"encoder", layers(p.encoder)},
       {"decoder", layers(p.decoder)},
       {"encoder_total", p.encoder_total},
       {"decoder_total", p.decoder_total},
       {"total", p.total}};
}

}  // namespace varirate::netcore

namespace varirate::channel {

void to_json(nlohmann::json& j, const DatasetConfig& c) {
  j = {{"n_antennas", c.n_antennas},     {"n_subcarriers", c.n_subcarriers},   {"n_delay_kept", c.n_delay_kept},
       {"num_paths", c.num_paths},       {"sample_count", c.sample_count},     {"scenario", to_string(c.scenario)},
       {"master_seed", c.master_seed}};
}

void from_json(const nlohmann::json& j, DatasetConfig& c) {
  DatasetConfig d;
  c.n_antennas = j.value("n_antennas", d.n_antennas);
  c.n_subcarriers = j.value("n_subcarriers", d.n_subcarriers);
  c.n_delay_kept = j.value("n_delay_kept", d.n_delay_kept);
  c.num_paths = j.value("num_paths", d.num_paths);
  c.sample_count = j.value("sample_count", d.sample_count);
  c.scenario = scenario_from_string(j.value("scenario", std::string("indoor")));
  c.master_seed = j.value("master_seed", d.master_seed);
}

}  // namespace varirate::channel

namespace varirate::focu {

void to_json(nlohmann::json& j, const OverheadPolicy& p) {
  if (p.distribution == OverheadPolicy::Distribution::fixed) {
    j = {{"distribution", "fixed"}, {"n", p.fixed_length}};
  } else {
    j = {{"distribution", "uniform"}};
    if (!p.weights.empty()) j["weights"] = p.weights;
  }
}

void from_json(const nlohmann::json& j, OverheadPolicy& p) {
  const auto dist = j.value("distribution", std::string("uniform"));
  if (dist == "fixed") {
    p = OverheadPolicy::fixed(j.at("n"));
  } else if (dist == "uniform") {
    p = OverheadPolicy{};
    p.weights = j.value("weights", std::vector<double>{});
  } else {
    throw FocuError("unknown overhead distribution '" + dist + "'");
  }
}

}  // namespace varirate::focu

namespace varirate::models {

void to_json(nlohmann::json& j, const ModelVariant& v) {
  j = {{"family", to_string(v.family)},
       {"changeable_rate", v.changeable_rate},
       {"quantizer", v.quantizer},
       {"M", v.codeword_length()},
       {"scale", to_string(v.scale)}};
}

void from_json(const nlohmann::json& j, ModelVariant& v) {
  v.family = family_from_string(j.at("family").get<std::string>());
  v.scale = scale_from_string(j.value("scale", std::string("toy")));
  v.changeable_rate = j.value("changeable_rate", false);
  v.quantizer = j.value("quantizer", quant::QuantizerSpec{});
  v.M = j.value("M", 0);
}

}  // namespace varirate::models
