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
#include <string>
#include <vector>

#include "doctest.h"
#include "support.hpp"

#include "fsct/branch.hpp"
#include "fsct/data.hpp"
#include "fsct/trainer.hpp"

using namespace fsct;
using fsct::testing::TempDir;
using fsct::testing::tiny_config;

namespace {

struct Fixture {
  TempDir dir{"trainer"};
  Dataset data;
  explicit Fixture(int groups = 4, int per_group = 2, int size = 20)
      : data(generate_synthetic(dir.path() / "data", SyntheticSpec{groups, per_group, size, 3})) {}
};

TrainConfig small_train(int iterations) {
  TrainConfig c;
  c.augment = AugmentConfig{18, 16, 0.5};
  c.iterations = iterations;
  c.seed = 42;
  return c;
}

std::vector<std::vector<float>> shared_values(TranslationModel<float>& m) {
  std::vector<std::vector<float>> out;
  m.visit_generator([&](const std::string&, Parameter<float>& p, const ParamSite& s) {
    if (s.partition == Partition::kShared) out.push_back(p.value.data);
  });
  return out;
}

std::vector<std::vector<float>> all_values(TranslationModel<float>& m) {
  std::vector<std::vector<float>> out;
  m.visit_all([&](const std::string&, Parameter<float>& p) { out.push_back(p.value.data); });
  return out;
}

TranslationModel<float> grafted_tiny(std::uint64_t seed) {
  const ModelConfig cfg = tiny_config(16);
  TranslationModel<float> basic(cfg, SplitConfig::defaults_for(cfg.generator));
  init_params(basic, 0.02, seed);
  const GroupId fresh[] = {GroupId(1), GroupId(2), GroupId(3)};
  std::mt19937_64 rng(seed);
  return graft(basic, std::span<const GroupId>(fresh), SplitConfig::defaults_for(cfg.generator), rng,
               0.02);
}

}  // namespace

TEST_CASE("weight initialization statistics") {
  ModelConfig cfg = tiny_config(32, 16);
  TranslationModel<float> m(cfg, SplitConfig::defaults_for(cfg.generator));
  const double std_target = 0.02;
  init_params(m, std_target, 7);
  double sum = 0, sq = 0;
  std::size_t n = 0;
  m.visit_all([&](const std::string& name, Parameter<float>& p) {
    CAPTURE(name);
    switch (p.kind) {
      case ParamKind::kWeight:
        for (float v : p.value.data) {
          sum += v;
          sq += static_cast<double>(v) * v;
          ++n;
        }
        break;
      case ParamKind::kBias:
      case ParamKind::kNormShift:
        for (float v : p.value.data) CHECK(v == 0.0f);
        break;
      case ParamKind::kNormScale:
        for (float v : p.value.data) CHECK(v == 1.0f);
        break;
      case ParamKind::kMixRatio: {
        const float expected = name.find("/shared/") != std::string::npos ? 1.0f : 0.0f;
        for (float v : p.value.data) CHECK(v == expected);
        break;
      }
    }
  });
  const double mean = sum / n;
  const double sd = std::sqrt(sq / n - mean * mean);
  CHECK(std::abs(mean) < 3.0 * std_target / std::sqrt(static_cast<double>(n)));
  CHECK(std::abs(sd - std_target) < 0.05 * std_target);

  TranslationModel<float> again(cfg, SplitConfig::defaults_for(cfg.generator));
  init_params(again, std_target, 7);
  CHECK(all_values(again) == all_values(m));

  auto multi = grafted_tiny(1);
  CHECK_THROWS_AS(init_params(multi, 0.02, 1), ContractError);
}

TEST_CASE("adam skips parameters no backward pass reached") {
  Parameter<float> hit(ParamKind::kWeight, {2}, 1.0f), idle(ParamKind::kWeight, {2}, 1.0f);
  Adam opt(AdamConfig{0.1, 0.5, 0.999, 1e-8, 0.5});
  hit.zero_grad();
  idle.zero_grad();
  hit.grad.fill(1.0f);
  hit.touched = true;
  opt.step({&hit, &idle});
  CHECK(opt.steps_taken(0) == 1);
  CHECK(opt.steps_taken(1) == 0);
  CHECK(idle.value.data == std::vector<float>{1.0f, 1.0f});
  // The first bias-corrected Adam step moves by lr in the gradient's sign.
  CHECK(hit.value[0] == doctest::Approx(0.9f).epsilon(1e-6));
}

TEST_CASE("adam clamps mixing ratios to the unit interval") {
  Parameter<float> rho(ParamKind::kMixRatio, {2}, 0.99f);
  Adam opt(AdamConfig{0.5, 0.5, 0.999, 1e-8, 0.0});
  rho.zero_grad();
  rho.grad[0] = -1.0f;
  rho.grad[1] = 1.0f;
  rho.touched = true;
  opt.step({&rho});
  CHECK(rho.value[0] == 1.0f);
  CHECK(rho.value[1] == doctest::Approx(0.49f));
}

TEST_CASE("a few-shot-only step leaves the shared core bitwise unchanged") {
  Fixture fx;
  auto m = grafted_tiny(2);
  TrainConfig c = small_train(1);
  c.weight_decay = 0.0;
  Trainer t(m, c, LossWeights{});
  const auto before = shared_values(m);
  std::mt19937_64 rng(3);
  const GroupId few[] = {GroupId(1), GroupId(2), GroupId(3)};
  for (int i = 0; i < 2; ++i) {
    const MetricRecord rec = t.step(sample_batch(fx.data, rng, few, c.augment));
    for (const auto& g : rec.groups) CHECK(g.shared_grad_norm == 0.0);
  }
  CHECK(shared_values(m) == before);
}

TEST_CASE("shared gradients of a full batch equal those of its group-0 sample") {
  Fixture fx;
  auto m = grafted_tiny(4);
  const TrainConfig c = small_train(1);
  Trainer t(m, c, LossWeights{});
  std::mt19937_64 rng(5);
  const GroupId all[] = {GroupId(0), GroupId(1), GroupId(2), GroupId(3)};
  TrainBatch full = sample_batch(fx.data, rng, all, c.augment);
  TrainBatch only0;
  only0.samples.push_back(full.samples[0]);

  t.generator_gradients(full);
  const auto full_grads = [&] {
    std::vector<std::vector<float>> out;
    m.visit_generator([&](const std::string&, Parameter<float>& p, const ParamSite& s) {
      if (s.partition == Partition::kShared) out.push_back(p.grad.data);
    });
    return out;
  }();
  t.generator_gradients(only0);
  std::size_t i = 0;
  double worst = 0.0;
  m.visit_generator([&](const std::string&, Parameter<float>& p, const ParamSite& s) {
    if (s.partition != Partition::kShared) return;
    for (std::size_t k = 0; k < p.grad.size(); ++k) {
      worst = std::max(worst, std::abs(static_cast<double>(p.grad[k]) - full_grads[i][k]));
    }
    ++i;
  });
  CHECK(worst <= 1e-6);
}

TEST_CASE("routing under each ablation mode") {
  auto m = grafted_tiny(6);
  TrainConfig c = small_train(1);
  auto check = [&](AblationMode mode, GroupId g, Routing want) {
    c.ablation = mode;
    Trainer t(m, c, LossWeights{});
    const Routing r = t.route(g);
    CHECK(r.branch == want.branch);
    CHECK(r.label == want.label);
    CHECK(r.detach_shared == want.detach_shared);
  };
  check(AblationMode::kDefault, GroupId(0), {GroupId(0), GroupId(0), false});
  check(AblationMode::kDefault, GroupId(2), {GroupId(2), GroupId(2), true});
  check(AblationMode::kNoSelective, GroupId(2), {GroupId(2), GroupId(2), false});
  check(AblationMode::kMixed, GroupId(3), {GroupId(0), GroupId(3), false});
  check(AblationMode::kFinetuneAll, GroupId(1), {GroupId(0), GroupId(1), false});

  c.ablation = AblationMode::kFinetuneAll;
  CHECK(Trainer(m, c, LossWeights{}).active_groups() ==
        std::vector<GroupId>{GroupId(1), GroupId(2), GroupId(3)});
  c.ablation = AblationMode::kDefault;
  CHECK(Trainer(m, c, LossWeights{}).active_groups().size() == 4);
}

TEST_CASE("training runs are deterministic and traces have one record per step") {
  Fixture fx;
  const ModelConfig cfg = tiny_config(16);
  const TrainConfig c = small_train(3);
  auto run = [&] {
    TrainResult basic = train_basic(fx.data, cfg, c, LossWeights{});
    TrainResult few = train_fewshot(fx.data, basic.model, c, LossWeights{},
                                    SplitConfig::defaults_for(cfg.generator));
    return std::make_pair(std::move(basic), std::move(few));
  };
  auto [b1, f1] = run();
  auto [b2, f2] = run();
  REQUIRE(b1.trace.records.size() == 3);
  REQUIRE(f1.trace.records.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(b1.trace.records[i].step == static_cast<int>(i));
    CHECK(to_json_line(b1.trace.records[i], false) == to_json_line(b2.trace.records[i], false));
    CHECK(to_json_line(f1.trace.records[i], false) == to_json_line(f2.trace.records[i], false));
    CHECK(f1.trace.records[i].groups.size() == 4);
  }
  CHECK(all_values(b1.model) == all_values(b2.model));
  CHECK(all_values(f1.model) == all_values(f2.model));
}

TEST_CASE("zero iterations return the initialization and the graft") {
  Fixture fx;
  const ModelConfig cfg = tiny_config(16);
  TrainConfig c = small_train(0);
  TrainResult basic = train_basic(fx.data, cfg, c, LossWeights{});
  TranslationModel<float> init(cfg, SplitConfig::defaults_for(cfg.generator));
  init_params(init, c.init_std, c.seed);
  CHECK(all_values(basic.model) == all_values(init));
  CHECK(basic.trace.records.empty());

  TrainResult few = train_fewshot(fx.data, basic.model, c, LossWeights{},
                                  SplitConfig::defaults_for(cfg.generator));
  std::mt19937_64 rng = graft_stream(c.seed);
  const GroupId fresh[] = {GroupId(1), GroupId(2), GroupId(3)};
  auto expect = graft(basic.model, std::span<const GroupId>(fresh),
                      SplitConfig::defaults_for(cfg.generator), rng, c.init_std);
  CHECK(all_values(few.model) == all_values(expect));
}

TEST_CASE("few-shot group count and split checks") {
  Fixture fx;
  const ModelConfig cfg = tiny_config(16);
  TrainConfig c = small_train(0);
  TrainResult basic = train_basic(fx.data, cfg, c, LossWeights{});
  const SplitConfig split = SplitConfig::defaults_for(cfg.generator);

  c.groups = 5;
  try {
    fewshot_group_count(fx.data, c);
    FAIL("more groups than the dataset accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kData);
  }
  c.groups = 2;
  TrainResult two = train_fewshot(fx.data, basic.model, c, LossWeights{}, split);
  CHECK(two.model.group_count() == 2);
  c.groups = 3;
  try {
    train_fewshot(fx.data, two.model, c, LossWeights{}, split);
    FAIL("group mismatch accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kUnknownGroup);
  }
  c.groups = 2;
  try {
    train_fewshot(fx.data, two.model, c, LossWeights{}, SplitConfig{1, 1});
    FAIL("split mismatch accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kInvalidArgument);
  }
  c.groups = 1;
  c.ablation = AblationMode::kFinetuneAll;
  CHECK_THROWS_AS(train_fewshot(fx.data, basic.model, c, LossWeights{}, split), Error);
}

TEST_CASE("mixed and finetune runs publish branch 0 under every group") {
  Fixture fx;
  const ModelConfig cfg = tiny_config(16);
  TrainConfig c = small_train(2);
  TrainResult basic = train_basic(fx.data, cfg, c, LossWeights{});
  for (AblationMode mode : {AblationMode::kMixed, AblationMode::kFinetuneAll}) {
    CAPTURE(to_string(mode));
    c.ablation = mode;
    TrainResult r = train_fewshot(fx.data, basic.model, c, LossWeights{},
                                  SplitConfig::defaults_for(cfg.generator));
    std::mt19937_64 rng(8);
    const auto x = fsct::testing::random_tensor<float>({3, 16, 16}, rng);
    const auto ref = translate(r.model, x, GroupId(0), Direction::kRealToCartoon).image->value();
    for (int g = 1; g < 4; ++g) {
      CHECK(translate(r.model, x, GroupId(g), Direction::kRealToCartoon).image->value().data == ref.data);
    }
    if (mode == AblationMode::kFinetuneAll) {
      for (const auto& rec : r.trace.records) CHECK(rec.groups.size() == 3);
    }
  }
}

TEST_CASE("the face embedder stays frozen through training") {
  Fixture fx;
  auto m = grafted_tiny(9);
  const TrainConfig c = small_train(1);
  Trainer t(m, c, LossWeights{});
  std::vector<std::vector<float>> before;
  t.embedder().visit([&](const std::string&, Parameter<float>& p) { before.push_back(p.value.data); });
  std::mt19937_64 rng(10);
  const GroupId all[] = {GroupId(0), GroupId(1), GroupId(2), GroupId(3)};
  for (int i = 0; i < 2; ++i) t.step(sample_batch(fx.data, rng, all, c.augment));
  std::vector<std::vector<float>> after;
  t.embedder().visit([&](const std::string&, Parameter<float>& p) {
    after.push_back(p.value.data);
    CHECK_FALSE(p.touched);
  });
  CHECK(after == before);
}

TEST_CASE("non-finite losses abort the step before any update") {
  Fixture fx;
  auto m = grafted_tiny(11);
  const TrainConfig c = small_train(1);
  Trainer t(m, c, LossWeights{});
  std::mt19937_64 rng(12);
  const GroupId g0[] = {GroupId(0)};
  TrainBatch b = sample_batch(fx.data, rng, g0, c.augment);
  b.samples[0].real[0] = std::nanf("");
  const auto before = all_values(m);
  try {
    t.step(b);
    FAIL("step accepted a NaN input");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kNumeric);
  }
  CHECK(all_values(m) == before);
}

TEST_CASE("metric lines are stable JSON") {
  MetricRecord r;
  r.step = 3;
  r.losses.cycle = 0.5;
  r.d_accuracy = 0.25;
  r.wall_ms = 12.0;
  GroupMetrics g;
  g.group = GroupId(1);
  g.specific_grad_norms = {0.0, 1.5};
  r.groups.push_back(g);
  const std::string with = to_json_line(r, true);
  const std::string without = to_json_line(r, false);
  CHECK(with.find("\"wall_ms\"") != std::string::npos);
  CHECK(without.find("wall_ms") == std::string::npos);
  CHECK(without.find('\n') == std::string::npos);
  CHECK(without.rfind("{\"step\":3", 0) == 0);
}

TEST_CASE("configuration parsing") {
  CHECK(parse_ablation("no_selective") == AblationMode::kNoSelective);
  CHECK(parse_ablation("finetune_all") == AblationMode::kFinetuneAll);
  CHECK(std::string(to_string(AblationMode::kMixed)) == "mixed");
  CHECK(parse_stage("fewshot") == Stage::kFewshot);
  CHECK_THROWS_AS(parse_ablation("bogus"), Error);
  TrainConfig c;
  c.lr = 0;
  CHECK_THROWS_AS(c.validate(), Error);
  c = TrainConfig{};
  c.beta2 = 1.0;
  CHECK_THROWS_AS(c.validate(), Error);
  c = TrainConfig{};
  c.iterations = -1;
  CHECK_THROWS_AS(c.validate(), Error);
}

TEST_CASE("overfit probe on a single pair") {
  TempDir dir("overfit");
  Dataset data(generate_synthetic(dir.path() / "data", SyntheticSpec{1, 1, 32, 5}));
  ModelConfig cfg = tiny_config(32, 8, 4);
  cfg.discriminator.n_layers = 3;
  TrainConfig c;
  c.augment = AugmentConfig{32, 32, 0.0};
  c.iterations = 300;
  c.seed = 1;
  const TrainResult r = train_basic(data, cfg, c, LossWeights{});
  double tail = 0;
  for (std::size_t i = r.trace.records.size() - 10; i < r.trace.records.size(); ++i) {
    tail += r.trace.records[i].losses.cycle;
  }
  tail /= 10;
  MESSAGE("final cycle loss " << tail);
  CHECK(tail < 0.05);
}
