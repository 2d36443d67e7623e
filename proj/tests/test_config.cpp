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

#include <functional>
#include <string>

#include "doctest.h"

#include "fsct/config.hpp"

using namespace fsct;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error raised");
  return ErrorCode::kIo;
}

}  // namespace

TEST_CASE("run configuration survives a JSON round trip") {
  RunConfig c;
  c.model.generator.image_size = 64;
  c.model.generator.channels = 12;
  c.model.generator.n_down = 3;
  c.model.generator.n_res = 5;
  c.model.generator.n_hourglass = 1;
  c.model.generator.mlp_input = MlpInput::kPool;
  c.model.discriminator.channels = 10;
  c.model.discriminator.n_layers = 4;
  c.model.discriminator.max_channels_mult = 4;
  c.split = SplitConfig{2, 1};
  c.train.lr = 2.5e-4;
  c.train.beta1 = 0.3;
  c.train.weight_decay = 0;
  c.train.augment = AugmentConfig{70, 64, 0.25};
  c.train.init_std = 0.05;
  c.train.iterations = 77;
  c.train.seed = 123456789012345ull;
  c.train.stage = Stage::kFewshot;
  c.train.ablation = AblationMode::kFinetuneAll;
  c.train.groups = 4;
  c.train.checkpoint_every = 10;
  c.weights = LossWeights{2, 3, 4, 5, 6, 7};
  c.data = "some/dir";

  const RunConfig back = run_config_from_json(parse_json(to_json(c).dump(2), "test"));
  CHECK(back.model == c.model);
  REQUIRE(back.split.has_value());
  CHECK(*back.split == *c.split);
  CHECK(back.train == c.train);
  CHECK(back.weights == c.weights);
  CHECK(back.data == c.data);
}

TEST_CASE("readers keep defaults for absent keys") {
  const RunConfig c = run_config_from_json(parse_json(R"({"train": {"lr": 0.001}})", "test"));
  CHECK(c.train.lr == 0.001);
  CHECK(c.train.beta1 == 0.5);
  CHECK(c.train.beta2 == 0.999);
  CHECK(c.weights == LossWeights{});
  CHECK(c.model == ModelConfig{});
  CHECK_FALSE(c.split.has_value());
  CHECK(c.resolved_split() == SplitConfig::defaults_for(c.model.generator));

  const LossWeights w = loss_weights_from_json(Json::object());
  CHECK(w.adv == 1);
  CHECK(w.cycle == 10);
  CHECK(w.identity == 10);
  CHECK(w.cam == 1000);
  CHECK(w.face == 1);
  CHECK(w.cls == 100);
}

TEST_CASE("unknown keys, wrong types and bad text are rejected") {
  CHECK(code_of([] { run_config_from_json(parse_json(R"({"trian": {}})", "t")); }) ==
        ErrorCode::kInvalidArgument);
  CHECK(code_of([] { train_config_from_json(parse_json(R"({"learning_rate": 1})", "t")); }) ==
        ErrorCode::kInvalidArgument);
  CHECK(code_of([] { model_config_from_json(parse_json(R"({"channels": "wide"})", "t")); }) ==
        ErrorCode::kInvalidArgument);
  CHECK(code_of([] { loss_weights_from_json(parse_json(R"([1, 2])", "t")); }) ==
        ErrorCode::kInvalidArgument);
  CHECK(code_of([] { parse_json("{\"a\": ", "t"); }) == ErrorCode::kInvalidArgument);
  CHECK(code_of([] { train_config_from_json(parse_json(R"({"stage": "third"})", "t")); }) ==
        ErrorCode::kInvalidArgument);
}
