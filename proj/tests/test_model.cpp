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

#include <cmath>
#include <random>
#include <set>
#include <string>

#include "doctest.h"
#include "support.hpp"

#include "fsct/branch.hpp"
#include "fsct/model.hpp"

using namespace fsct;
using fsct::testing::random_tensor;
using fsct::testing::tiny_config;

TEST_CASE("generator output shapes at 16x16") {
  const ModelConfig cfg = tiny_config(16);
  TranslationModel<float> m(cfg, SplitConfig::defaults_for(cfg.generator));
  fsct::testing::randomize(m, 1);
  std::mt19937_64 rng(2);
  const auto x = random_tensor<float>({3, 16, 16}, rng);
  for (Direction d : kDirections) {
    const auto t = translate(m, x, GroupId(0), d);
    CHECK(t.image->shape() == Shape{3, 16, 16});
    CHECK(t.cam_logit->shape() == Shape{2});
    CHECK(t.attention->shape() == Shape{1, 4, 4});
    for (float v : t.image->value().data) {
      CHECK(v >= -1.0f);
      CHECK(v <= 1.0f);
    }
  }
}

TEST_CASE("inference forward is deterministic and records no graph") {
  const ModelConfig cfg = tiny_config(16);
  TranslationModel<float> m(cfg, SplitConfig::defaults_for(cfg.generator));
  fsct::testing::randomize(m, 3);
  std::mt19937_64 rng(4);
  const auto x = random_tensor<float>({3, 16, 16}, rng);
  const auto a = translate(m, x, GroupId(0), Direction::kRealToCartoon);
  const auto b = translate(m, x, GroupId(0), Direction::kRealToCartoon);
  CHECK(a.image->value().data == b.image->value().data);
  CHECK_FALSE(a.image->requires_grad);
}

TEST_CASE("detaching the shared core leaves forward values unchanged") {
  const ModelConfig cfg = tiny_config(16);
  TranslationModel<double> m(cfg, SplitConfig::defaults_for(cfg.generator));
  fsct::testing::randomize(m, 5);
  std::mt19937_64 rng(6);
  const auto x = ad::constant(random_tensor<double>({3, 16, 16}, rng));
  for (Direction d : kDirections) {
    const auto live = translate(m, x, GroupId(0), d, ForwardMode::kTrain, false);
    const auto cut = translate(m, x, GroupId(0), d, ForwardMode::kTrain, true);
    CHECK(live.image->value().data == cut.image->value().data);
    CHECK(live.cam_logit->value().data == cut.cam_logit->value().data);
    CHECK(live.attention->value().data == cut.attention->value().data);
  }
}

TEST_CASE("discriminator patch size follows the conv arithmetic") {
  for (int size : {16, 32, 64}) {
    for (int layers : {1, 2, 3}) {
      if ((size >> layers) < 2) continue;
      CAPTURE(size);
      CAPTURE(layers);
      DiscriminatorConfig dc;
      dc.channels = 4;
      dc.n_layers = layers;
      Discriminator<float> d(dc, size, 3);
      int s = size;
      for (int i = 0; i < layers; ++i) s = fsct::testing::conv_out(s, 4, 2, 1);
      s = fsct::testing::conv_out(s, 4, 1, 1);
      CHECK(d.patch_size() == s);
      std::mt19937_64 rng(7);
      const auto j = d.forward(ad::constant(random_tensor<float>({3, size, size}, rng)), false);
      CHECK(j.patch_logits->shape() == Shape{1, s, s});
      CHECK(j.cam_logit->shape() == Shape{2});
      CHECK(j.group_logits->shape() == Shape{3});
    }
  }
}

TEST_CASE("trunk width saturates at the channel multiplier") {
  DiscriminatorConfig dc;
  dc.channels = 4;
  dc.n_layers = 5;
  dc.max_channels_mult = 4;
  Discriminator<float> d(dc, 64, 1);
  CHECK(d.trunk_channels() == 16);
}

TEST_CASE("face embedder is unit norm and frozen") {
  FaceEmbedder<double> f;
  std::mt19937_64 rng(8);
  Parameter<double> img(ParamKind::kWeight, {3, 16, 16});
  img.value = random_tensor<double>({3, 16, 16}, rng);
  auto e = f.embed(ad::leaf(img, true));
  CHECK(e->shape() == Shape{FaceEmbedder<double>::kEmbeddingDim});
  double sq = 0;
  for (double v : e->value().data) sq += v * v;
  CHECK(std::sqrt(sq) == doctest::Approx(1.0).epsilon(1e-12));

  ad::backward(ad::sum(e));
  CHECK(img.touched);
  f.visit([](const std::string&, Parameter<double>& p) { CHECK_FALSE(p.touched); });

  FaceEmbedder<double> g;
  auto e2 = g.embed(ad::constant(img.value));
  CHECK(e2->value().data == e->value().data);
}

TEST_CASE("configuration validation") {
  ModelConfig cfg = tiny_config(16);
  CHECK_NOTHROW(cfg.validate());
  cfg.generator.image_size = 18;
  CHECK_THROWS_AS(cfg.validate(), ShapeError);
  cfg = tiny_config(16);
  cfg.discriminator.n_layers = 4;
  CHECK_THROWS_AS(cfg.validate(), ShapeError);
  cfg = tiny_config(16);
  cfg.generator.channels = 0;
  CHECK_THROWS_AS(cfg.validate(), ShapeError);

  const GeneratorConfig g = tiny_config(16).generator;
  CHECK_THROWS_AS((SplitConfig{g.encoder_blocks() + 1, 0}.validate(g)), ShapeError);
  CHECK_THROWS_AS((SplitConfig{0, -1}.validate(g)), ShapeError);
  CHECK_NOTHROW((SplitConfig{0, 0}.validate(g)));
  CHECK_NOTHROW((SplitConfig{g.encoder_blocks(), g.decoder_blocks()}.validate(g)));
}

TEST_CASE("wrong input shape and unknown group are rejected") {
  const ModelConfig cfg = tiny_config(16);
  TranslationModel<float> m(cfg, SplitConfig::defaults_for(cfg.generator));
  CHECK_THROWS_AS(translate(m, Tensor<float>({3, 32, 32}), GroupId(0), Direction::kRealToCartoon),
                  ShapeError);
  CHECK_THROWS_AS(translate(m, Tensor<float>({1, 16, 16}), GroupId(0), Direction::kRealToCartoon),
                  ShapeError);
  CHECK_THROWS_AS(translate(m, Tensor<float>({3, 16, 16}), GroupId(1), Direction::kRealToCartoon),
                  RegistryError);
}

TEST_CASE("parameter names are unique and carry their partition") {
  const ModelConfig cfg = tiny_config(16);
  TranslationModel<float> m(cfg, SplitConfig::defaults_for(cfg.generator));
  m.generator(Direction::kRealToCartoon).add_branch();
  m.generator(Direction::kCartoonToReal).add_branch();
  std::set<std::string> names;
  m.visit_generator([&](const std::string& n, Parameter<float>&, const ParamSite& site) {
    CHECK(names.insert(n).second);
    if (site.partition == Partition::kShared) {
      CHECK(n.find("/shared/") != std::string::npos);
    } else {
      CHECK(n.find("/specific/g" + std::to_string(site.group.value) + "/") != std::string::npos);
    }
  });
  m.visit_discriminator([&](const std::string& n, Parameter<float>&, Domain) {
    CHECK(names.insert(n).second);
  });
}

TEST_CASE("moving the split preserves the function") {
  const ModelConfig cfg = tiny_config(16);
  TranslationModel<float> m(cfg, SplitConfig::defaults_for(cfg.generator));
  fsct::testing::randomize(m, 9);
  std::mt19937_64 rng(10);
  const auto x = random_tensor<float>({3, 16, 16}, rng);
  const auto before = translate(m, x, GroupId(0), Direction::kRealToCartoon).image->value();
  for (SplitConfig s : {SplitConfig{0, 0}, SplitConfig{1, 2}, SplitConfig{5, 5}}) {
    m.generator(Direction::kRealToCartoon).resplit(s);
    CHECK(translate(m, x, GroupId(0), Direction::kRealToCartoon).image->value().data == before.data);
  }
}

TEST_CASE("precision cast preserves values") {
  const ModelConfig cfg = tiny_config(16);
  TranslationModel<float> m(cfg, SplitConfig::defaults_for(cfg.generator));
  fsct::testing::randomize(m, 11);
  const TranslationModel<double> d = m.cast<double>();
  std::mt19937_64 rng(12);
  const auto x = random_tensor<float>({3, 16, 16}, rng);
  const auto yf = translate(m, x, GroupId(0), Direction::kCartoonToReal).image->value();
  const auto yd = translate(d, x.cast<double>(), GroupId(0), Direction::kCartoonToReal).image->value();
  for (std::size_t i = 0; i < yf.size(); ++i) CHECK(std::abs(yf[i] - yd[i]) < 1e-4);
}

TEST_CASE("hourglass and pooled mlp variants build and run") {
  ModelConfig cfg = tiny_config(32);
  cfg.generator.n_hourglass = 1;
  cfg.generator.mlp_input = MlpInput::kPool;
  cfg.validate();
  TranslationModel<float> m(cfg, SplitConfig::defaults_for(cfg.generator));
  fsct::testing::randomize(m, 13);
  std::mt19937_64 rng(14);
  const auto t = translate(m, random_tensor<float>({3, 32, 32}, rng), GroupId(0),
                           Direction::kRealToCartoon);
  CHECK(t.image->shape() == Shape{3, 32, 32});
}
