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

#include "fsct/config.hpp"

#include <set>

namespace fsct {

namespace {

[[noreturn]] void bad(const std::string& m) { throw Error(ErrorCode::kInvalidArgument, m); }

void require_object(const Json& j, const char* what) {
  if (!j.is_object()) bad(std::string(what) + ": expected a JSON object");
}

void reject_unknown(const Json& j, const char* what, std::initializer_list<const char*> keys) {
  const std::set<std::string> known(keys.begin(), keys.end());
  for (const auto& [k, v] : j.items()) {
    if (!known.count(k)) bad(std::string(what) + ": unknown key '" + k + "'");
  }
}

template <typename V>
void read(const Json& j, const char* key, V& out, const char* what) {
  auto it = j.find(key);
  if (it == j.end()) return;
  try {
    out = it->template get<V>();
  } catch (const nlohmann::json::exception&) {
    bad(std::string(what) + "." + key + ": wrong type");
  }
}

}  // namespace

Json to_json(const ModelConfig& c) {
  return {{"image_size", c.generator.image_size},
          {"channels", c.generator.channels},
          {"n_down", c.generator.n_down},
          {"n_res", c.generator.n_res},
          {"n_hourglass", c.generator.n_hourglass},
          {"mlp_input", c.generator.mlp_input == MlpInput::kFlatten ? "flatten" : "pool"},
          {"disc_channels", c.discriminator.channels},
          {"disc_layers", c.discriminator.n_layers},
          {"disc_max_mult", c.discriminator.max_channels_mult}};
}

ModelConfig model_config_from_json(const Json& j, ModelConfig c) {
  require_object(j, "model");
  reject_unknown(j, "model", {"image_size", "channels", "n_down", "n_res", "n_hourglass",
                              "mlp_input", "disc_channels", "disc_layers", "disc_max_mult"});
  read(j, "image_size", c.generator.image_size, "model");
  read(j, "channels", c.generator.channels, "model");
  read(j, "n_down", c.generator.n_down, "model");
  read(j, "n_res", c.generator.n_res, "model");
  read(j, "n_hourglass", c.generator.n_hourglass, "model");
  std::string mlp = c.generator.mlp_input == MlpInput::kFlatten ? "flatten" : "pool";
  read(j, "mlp_input", mlp, "model");
  if (mlp == "flatten") {
    c.generator.mlp_input = MlpInput::kFlatten;
  } else if (mlp == "pool") {
    c.generator.mlp_input = MlpInput::kPool;
  } else {
    bad("model.mlp_input: expected 'flatten' or 'pool'");
  }
  read(j, "disc_channels", c.discriminator.channels, "model");
  read(j, "disc_layers", c.discriminator.n_layers, "model");
  read(j, "disc_max_mult", c.discriminator.max_channels_mult, "model");
  return c;
}

Json to_json(const SplitConfig& c) {
  return {{"enc_specific", c.enc_specific}, {"dec_specific", c.dec_specific}};
}

SplitConfig split_config_from_json(const Json& j, SplitConfig c) {
  require_object(j, "split");
  reject_unknown(j, "split", {"enc_specific", "dec_specific"});
  read(j, "enc_specific", c.enc_specific, "split");
  read(j, "dec_specific", c.dec_specific, "split");
  return c;
}

Json to_json(const LossWeights& w) {
  return {{"adv", w.adv},   {"cycle", w.cycle}, {"identity", w.identity},
          {"cam", w.cam},   {"face", w.face},   {"cls", w.cls}};
}

LossWeights loss_weights_from_json(const Json& j, LossWeights w) {
  require_object(j, "weights");
  reject_unknown(j, "weights", {"adv", "cycle", "identity", "cam", "face", "cls"});
  read(j, "adv", w.adv, "weights");
  read(j, "cycle", w.cycle, "weights");
  read(j, "identity", w.identity, "weights");
  read(j, "cam", w.cam, "weights");
  read(j, "face", w.face, "weights");
  read(j, "cls", w.cls, "weights");
  return w;
}

Json to_json(const TrainConfig& c) {
  return {{"lr", c.lr},
          {"beta1", c.beta1},
          {"beta2", c.beta2},
          {"weight_decay", c.weight_decay},
          {"resize", c.augment.resize},
          {"crop", c.augment.crop},
          {"flip_prob", c.augment.flip_prob},
          {"init_std", c.init_std},
          {"iterations", c.iterations},
          {"seed", c.seed},
          {"stage", to_string(c.stage)},
          {"ablation", to_string(c.ablation)},
          {"groups", c.groups},
          {"checkpoint_every", c.checkpoint_every}};
}

TrainConfig train_config_from_json(const Json& j, TrainConfig c) {
  require_object(j, "train");
  reject_unknown(j, "train", {"lr", "beta1", "beta2", "weight_decay", "resize", "crop", "flip_prob",
                              "init_std", "iterations", "seed", "stage", "ablation", "groups",
                              "checkpoint_every"});
  read(j, "lr", c.lr, "train");
  read(j, "beta1", c.beta1, "train");
  read(j, "beta2", c.beta2, "train");
  read(j, "weight_decay", c.weight_decay, "train");
  read(j, "resize", c.augment.resize, "train");
  read(j, "crop", c.augment.crop, "train");
  read(j, "flip_prob", c.augment.flip_prob, "train");
  read(j, "init_std", c.init_std, "train");
  read(j, "iterations", c.iterations, "train");
  read(j, "seed", c.seed, "train");
  std::string stage = to_string(c.stage), ablation = to_string(c.ablation);
  read(j, "stage", stage, "train");
  read(j, "ablation", ablation, "train");
  c.stage = parse_stage(stage);
  c.ablation = parse_ablation(ablation);
  read(j, "groups", c.groups, "train");
  read(j, "checkpoint_every", c.checkpoint_every, "train");
  return c;
}

Json to_json(const RunConfig& c) {
  Json j;
  j["model"] = to_json(c.model);
  j["split"] = to_json(c.resolved_split());
  j["train"] = to_json(c.train);
  j["weights"] = to_json(c.weights);
  j["data"] = c.data;
  return j;
}

RunConfig run_config_from_json(const Json& j, RunConfig c) {
  require_object(j, "config");
  reject_unknown(j, "config", {"model", "split", "train", "weights", "data"});
  if (j.contains("model")) c.model = model_config_from_json(j["model"], c.model);
  if (j.contains("split")) {
    c.split = split_config_from_json(j["split"], c.split.value_or(c.resolved_split()));
  }
  if (j.contains("train")) c.train = train_config_from_json(j["train"], c.train);
  if (j.contains("weights")) c.weights = loss_weights_from_json(j["weights"], c.weights);
  read(j, "data", c.data, "config");
  return c;
}

Json parse_json(const std::string& text, const std::string& what) {
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    bad(what + ": invalid JSON: " + e.what());
  }
}

}  // namespace fsct
