// Copyright 2026 The fsct Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// JSON forms of the configuration structs. Readers start from the defaults,
// overwrite only the keys present, and reject unknown keys.

#include <optional>
#include <string>

#include "json.hpp"

#include "fsct/losses.hpp"
#include "fsct/model.hpp"
#include "fsct/trainer.hpp"

namespace fsct {

using Json = nlohmann::ordered_json;

Json to_json(const ModelConfig& c);
Json to_json(const SplitConfig& c);
Json to_json(const LossWeights& w);
Json to_json(const TrainConfig& c);

ModelConfig model_config_from_json(const Json& j, ModelConfig base = {});
SplitConfig split_config_from_json(const Json& j, SplitConfig base = {});
LossWeights loss_weights_from_json(const Json& j, LossWeights base = {});
TrainConfig train_config_from_json(const Json& j, TrainConfig base = {});

/// Everything a training run is parameterized by.
struct RunConfig {
  ModelConfig model;
  std::optional<SplitConfig> split;  // unset: whole down/upsampling stacks are specific
  TrainConfig train;
  LossWeights weights;
  std::string data;

  SplitConfig resolved_split() const {
    return split.value_or(SplitConfig::defaults_for(model.generator));
  }
};

/// {"model": {...}, "split": {...}, "train": {...}, "weights": {...}, "data": "..."}
Json to_json(const RunConfig& c);
RunConfig run_config_from_json(const Json& j, RunConfig base = {});
/// Parses JSON text; errors carry ErrorCode::kInvalidArgument.
Json parse_json(const std::string& text, const std::string& what);

}  // namespace fsct
