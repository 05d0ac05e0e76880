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

// nlohmann::json bindings for the declarative records that end up in
// checkpoints, experiment configs and results.

#ifndef VARIRATE_JSON_IO_HPP
#define VARIRATE_JSON_IO_HPP

#include <json.hpp>

#include "varirate/channel.hpp"
#include "varirate/focu.hpp"
#include "varirate/models.hpp"
#include "varirate/netcore.hpp"
#include "varirate/quant.hpp"

namespace varirate::quant {
void to_json(nlohmann::json& j, const QuantizerSpec& s);
void from_json(const nlohmann::json& j, QuantizerSpec& s);
}  // namespace varirate::quant

namespace varirate::netcore {
void to_json(nlohmann::json& j, const LayerSpec& s);
void from_json(const nlohmann::json& j, LayerSpec& s);
void to_json(nlohmann::json& j, const NetworkConfig& c);
void from_json(const nlohmann::json& j, NetworkConfig& c);
void to_json(nlohmann::json& j, const ParamBreakdown& p);
}  // namespace varirate::netcore

namespace varirate::channel {
void to_json(nlohmann::json& j, const DatasetConfig& c);
void from_json(const nlohmann::json& j, DatasetConfig& c);
}  // namespace varirate::channel

namespace varirate::focu {
void to_json(nlohmann::json& j, const OverheadPolicy& p);
void from_json(const nlohmann::json& j, OverheadPolicy& p);
}  // namespace varirate::focu

namespace varirate::models {
void to_json(nlohmann::json& j, const ModelVariant& v);
void from_json(const nlohmann::json& j, ModelVariant& v);
}  // namespace varirate::models

#endif  // VARIRATE_JSON_IO_HPP
