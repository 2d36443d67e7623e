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
#include <vector>

#include "doctest.h"
#include "loss_table.hpp"
#include "support.hpp"

#include "fsct/losses.hpp"
#include "fsct/objective.hpp"

using namespace fsct;
using fsct::testing::random_tensor;
using D = double;

namespace {

D val(const ad::Var<D>& v) { return v->value()[0]; }
ad::Var<D> cst(const Tensor<D>& t) { return ad::constant(t); }

double mean_sq(const std::vector<D>& v, D target) {
  double s = 0;
  for (D x : v) s += (x - target) * (x - target);
  return s / static_cast<double>(v.size());
}

}  // namespace

TEST_CASE("closed-form loss values") {
  for (const auto& row : fsct::testing::loss_table()) {
    CAPTURE(row.name);
    CHECK(std::abs(row.got - row.expected) <= 1e-6);
  }
}

TEST_CASE("losses agree with direct recomputation on random inputs") {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 5; ++trial) {
    const auto a = random_tensor<D>({1, 5, 5}, rng, -1, 2);
    const auto b = random_tensor<D>({1, 5, 5}, rng, -1, 2);
    CHECK(val(adv_loss_d(cst(a), cst(b))) == doctest::Approx(mean_sq(a.data, 1) + mean_sq(b.data, 0)));
    CHECK(val(adv_loss_g(cst(b))) == doctest::Approx(mean_sq(b.data, 1)));

    const auto x = random_tensor<D>({3, 6, 6}, rng);
    const auto y = random_tensor<D>({3, 6, 6}, rng);
    double mad = 0;
    for (std::size_t i = 0; i < x.size(); ++i) mad += std::abs(x[i] - y[i]);
    mad /= static_cast<double>(x.size());
    CHECK(val(cycle_loss(cst(x), cst(y))) == doctest::Approx(mad));
    CHECK(val(identity_loss(cst(x), cst(y))) == doctest::Approx(mad));

    const auto es = random_tensor<D>({2}, rng, 0.01, 0.99);
    const auto et = random_tensor<D>({2}, rng, 0.01, 0.99);
    const double bce = -((std::log(es[0]) + std::log(es[1])) / 2 +
                         (std::log(1 - et[0]) + std::log(1 - et[1])) / 2);
    CHECK(val(cam_loss_g(cst(es), cst(et))) == doctest::Approx(bce));

    const auto logits = random_tensor<D>({4}, rng, -3, 3);
    for (int g = 0; g < 4; ++g) {
      CHECK(val(group_cls_loss(cst(logits), GroupId(g))) ==
            doctest::Approx(fsct::testing::softmax_cross_entropy(logits.data, g)));
    }

    LossBundle r;
    r.adv_g = logits[0] + 3;
    r.cycle = es[0];
    r.identity = es[1];
    r.cam_g = et[0];
    r.face = et[1];
    r.cls_fake = logits[1] + 3;
    r.adv_d = 0.5;
    r.cam_d = 0.25;
    r.cls_real = 0.125;
    const LossWeights w;
    const double manual = 1.0 * r.adv_g + 10.0 * r.cycle + 10.0 * r.identity + 1000.0 * r.cam_g +
                          1.0 * r.face + 100.0 * r.cls_fake;
    CHECK(std::abs(total_g(r, w) - manual) < 1e-7);
    CHECK(total_d(r) == 0.875);
  }
}

TEST_CASE("total_g is linear in each weight") {
  LossBundle b{0.3, 0.0, 0.2, 0.7, 0.05, 0.0, 1.5, 0.0, 0.9};
  const LossWeights base;
  double LossWeights::*fields[] = {&LossWeights::adv, &LossWeights::cycle, &LossWeights::identity,
                                   &LossWeights::cam, &LossWeights::face, &LossWeights::cls};
  for (auto f : fields) {
    LossWeights zero = base, scaled = base;
    zero.*f = 0.0;
    scaled.*f = 3.0 * (base.*f);
    const double contribution = total_g(b, base) - total_g(b, zero);
    CHECK(total_g(b, scaled) - total_g(b, zero) == doctest::Approx(3.0 * contribution));
  }
}

TEST_CASE("loss contracts") {
  auto c = [](Shape s, D v) { return ad::constant(Tensor<D>(std::move(s), v)); };
  CHECK_THROWS_AS(cam_loss_g(c({2}, 1.5), c({2}, 0.5)), ContractError);
  CHECK_THROWS_AS(cam_loss_g(c({2}, 0.5), c({2}, -0.1)), ContractError);
  CHECK_THROWS_AS(face_id_loss(c({4}, 0.0), c({4}, 0.5), c({4}, 0.5), c({4}, 0.5)), ContractError);
  CHECK_THROWS_AS(group_cls_loss(c({4}, 0.0), GroupId(4)), RegistryError);
  CHECK_THROWS_AS(group_cls_loss(c({4}, 0.0), GroupId(-1)), RegistryError);
  CHECK_THROWS_AS(cycle_loss(c({3, 4, 4}, 0.0), c({3, 4, 5}, 0.0)), ShapeError);
  CHECK_THROWS_AS(adv_loss_g(ad::constant(Tensor<D>({0}))), ShapeError);
  LossWeights w;
  w.cam = -1;
  CHECK_THROWS_AS(w.validate(), Error);
  LossBundle b;
  CHECK(b.finite());
  b.face = std::nan("");
  CHECK_FALSE(b.finite());
}

TEST_CASE("loss terms on a random model are nonnegative and bounded") {
  const ModelConfig cfg = fsct::testing::tiny_config(16);
  TranslationModel<D> m(cfg, SplitConfig::defaults_for(cfg.generator));
  fsct::testing::randomize(m, 2);
  FaceEmbedder<D> emb;
  std::mt19937_64 rng(3);
  for (int i = 0; i < 3; ++i) {
    const auto real = random_tensor<D>({3, 16, 16}, rng);
    const auto cartoon = random_tensor<D>({3, 16, 16}, rng);
    const Routing r{GroupId(0), GroupId(0), false};
    const LossBundle b = to_bundle(generator_terms(m, emb, real, cartoon, r),
                                   discriminator_terms(m, real, cartoon, r));
    CHECK(b.finite());
    for (double v : {b.adv_g, b.adv_d, b.cycle, b.identity, b.cam_g, b.cam_d, b.cls_real, b.cls_fake}) {
      CHECK(v >= 0.0);
    }
    CHECK(b.face >= 0.0);
    CHECK(b.face <= 4.0);
  }
}

TEST_CASE("swapping domains and directions preserves the total on a symmetric model") {
  // Both directions share the same weights, and both discriminators too, so
  // exchanging the real and cartoon inputs only reorders the summed terms.
  const ModelConfig cfg = fsct::testing::tiny_config(16);
  TranslationModel<D> m(cfg, SplitConfig::defaults_for(cfg.generator));
  fsct::testing::randomize(m, 4);
  m.generator(Direction::kCartoonToReal) = m.generator(Direction::kRealToCartoon);
  m.discriminator(Domain::kReal) = m.discriminator(Domain::kCartoon);
  FaceEmbedder<D> emb;
  std::mt19937_64 rng(5);
  const auto a = random_tensor<D>({3, 16, 16}, rng);
  const auto b = random_tensor<D>({3, 16, 16}, rng);
  const Routing r{GroupId(0), GroupId(0), false};
  const LossWeights w;
  const double ab = total_g(to_bundle(generator_terms(m, emb, a, b, r), discriminator_terms(m, a, b, r)), w);
  const double ba = total_g(to_bundle(generator_terms(m, emb, b, a, r), discriminator_terms(m, b, a, r)), w);
  CHECK(ab == doctest::Approx(ba).epsilon(1e-12));
}
