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

#include "fsct/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>

#include "json.hpp"

namespace fsct {

const char* to_string(Stage s) { return s == Stage::kBasic ? "basic" : "fewshot"; }

const char* to_string(AblationMode m) {
  switch (m) {
    case AblationMode::kDefault: return "default";
    case AblationMode::kMixed: return "mixed";
    case AblationMode::kFinetuneAll: return "finetune_all";
    case AblationMode::kNoSelective: return "no_selective";
  }
  return "default";
}

Stage parse_stage(std::string_view s) {
  if (s == "basic") return Stage::kBasic;
  if (s == "fewshot") return Stage::kFewshot;
  throw Error(ErrorCode::kInvalidArgument, "unknown stage '" + std::string(s) + "'");
}

AblationMode parse_ablation(std::string_view s) {
  for (AblationMode m : {AblationMode::kDefault, AblationMode::kMixed, AblationMode::kFinetuneAll,
                         AblationMode::kNoSelective}) {
    if (s == to_string(m)) return m;
  }
  throw Error(ErrorCode::kInvalidArgument,
              "unknown ablation mode '" + std::string(s) +
                  "' (expected default, mixed, finetune_all or no_selective)");
}

void TrainConfig::validate() const {
  auto fail = [](const std::string& m) { throw Error(ErrorCode::kInvalidArgument, m); };
  if (!(lr > 0.0) || !std::isfinite(lr)) fail("lr must be positive");
  if (!(weight_decay >= 0.0) || !std::isfinite(weight_decay)) fail("weight_decay must be >= 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    fail("adam betas must lie in [0, 1)");
  }
  if (!(init_std > 0.0)) fail("init_std must be positive");
  if (iterations < 0) fail("iterations must be >= 0");
  if (groups < 0) fail("groups must be >= 0");
  if (checkpoint_every < 0) fail("checkpoint_every must be >= 0");
  augment.validate();
}

namespace {

std::mt19937_64 stream(std::uint64_t seed, std::uint32_t tag) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), tag};
  return std::mt19937_64(seq);
}

constexpr std::uint32_t kGraftStream = 1;
constexpr std::uint32_t kDataStream = 2;

}  // namespace

std::mt19937_64 graft_stream(std::uint64_t seed) { return stream(seed, kGraftStream); }

void init_params(TranslationModel<float>& model, double init_std, std::uint64_t seed) {
  if (model.group_count() != 1) {
    throw ContractError("init_params: model has " + std::to_string(model.group_count()) +
                        " branches; grafted models are initialized from their basic model");
  }
  TranslationModel<float> fresh(model.config, model.split(),
                                model.discriminator(Domain::kReal).group_count());
  std::vector<Parameter<float>*> defaults;
  fresh.visit_all([&](const std::string&, Parameter<float>& p) { defaults.push_back(&p); });

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, init_std);
  std::size_t i = 0;
  model.visit_all([&](const std::string&, Parameter<float>& p) {
    switch (p.kind) {
      case ParamKind::kWeight:
        for (auto& v : p.value.data) v = static_cast<float>(normal(rng));
        break;
      case ParamKind::kBias: p.value.fill(0.0f); break;
      case ParamKind::kNormScale:
      case ParamKind::kNormShift:
      case ParamKind::kMixRatio: p.value = defaults[i]->value; break;
    }
    p.zero_grad();
    ++i;
  });
}

void Adam::step(const std::vector<Parameter<float>*>& params) {
  if (state_.empty()) state_.resize(params.size());
  if (state_.size() != params.size()) {
    throw ContractError("optimizer bound to " + std::to_string(state_.size()) +
                        " parameters, got " + std::to_string(params.size()));
  }
  const double b1 = config_.beta1, b2 = config_.beta2;
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter<float>& p = *params[i];
    if (!p.touched) continue;
    State& s = state_[i];
    if (s.m.empty()) {
      s.m.assign(p.value.size(), 0.0);
      s.v.assign(p.value.size(), 0.0);
    }
    ++s.t;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(s.t));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(s.t));
    for (std::size_t k = 0; k < p.value.size(); ++k) {
      const double w = p.value[k];
      const double g = static_cast<double>(p.grad[k]) + config_.weight_decay * w;
      s.m[k] = b1 * s.m[k] + (1.0 - b1) * g;
      s.v[k] = b2 * s.v[k] + (1.0 - b2) * g * g;
      const double update = config_.lr * (s.m[k] / c1) / (std::sqrt(s.v[k] / c2) + config_.eps);
      p.value[k] = static_cast<float>(w - update);
    }
    if (p.kind == ParamKind::kMixRatio) {
      for (auto& v : p.value.data) v = std::clamp(v, 0.0f, 1.0f);
    }
  }
}

namespace {

nlohmann::ordered_json bundle_json(const LossBundle& b) {
  return {{"adv_g", b.adv_g},       {"adv_d", b.adv_d}, {"cycle", b.cycle},
          {"identity", b.identity}, {"cam_g", b.cam_g}, {"cam_d", b.cam_d},
          {"face", b.face},         {"cls_real", b.cls_real}, {"cls_fake", b.cls_fake}};
}

}  // namespace

std::string to_json_line(const MetricRecord& r, bool with_time) {
  nlohmann::ordered_json j;
  j["step"] = r.step;
  j["losses"] = bundle_json(r.losses);
  j["d_accuracy"] = r.d_accuracy;
  auto groups = nlohmann::ordered_json::array();
  for (const auto& g : r.groups) {
    groups.push_back({{"group", g.group.value},
                      {"shared_grad_norm", g.shared_grad_norm},
                      {"specific_grad_norms", g.specific_grad_norms},
                      {"d_correct", g.d_correct},
                      {"d_total", g.d_total},
                      {"losses", bundle_json(g.losses)}});
  }
  j["groups"] = std::move(groups);
  if (with_time) j["wall_ms"] = r.wall_ms;
  return j.dump();
}

Trainer::Trainer(TranslationModel<float>& model, const TrainConfig& config, const LossWeights& weights)
    : model_(model),
      config_(config),
      weights_(weights),
      g_opt_({config.lr, config.beta1, config.beta2, 1e-8, config.weight_decay}),
      d_opt_({config.lr, config.beta1, config.beta2, 1e-8, config.weight_decay}) {
  config_.validate();
  weights_.validate();
  if (model.config.generator.image_size != config.augment.crop) {
    throw Error(ErrorCode::kInvalidArgument,
                "model image size " + std::to_string(model.config.generator.image_size) +
                    " differs from crop size " + std::to_string(config.augment.crop));
  }
}

Routing Trainer::route(GroupId g) const {
  switch (config_.ablation) {
    case AblationMode::kDefault: return {g, g, !g.is_common()};
    case AblationMode::kNoSelective: return {g, g, false};
    case AblationMode::kMixed:
    case AblationMode::kFinetuneAll: return {GroupId(0), g, false};
  }
  return {g, g, false};
}

std::vector<GroupId> Trainer::active_groups() const {
  std::vector<GroupId> out;
  const int first = config_.ablation == AblationMode::kFinetuneAll ? 1 : 0;
  for (int g = first; g < model_.group_count(); ++g) out.emplace_back(g);
  return out;
}

std::vector<Parameter<float>*> Trainer::generator_params() {
  std::vector<Parameter<float>*> out;
  model_.visit_generator([&](const std::string&, Parameter<float>& p, const ParamSite&) { out.push_back(&p); });
  return out;
}

std::vector<Parameter<float>*> Trainer::discriminator_params() {
  std::vector<Parameter<float>*> out;
  model_.visit_discriminator([&](const std::string&, Parameter<float>& p, Domain) { out.push_back(&p); });
  return out;
}

std::vector<GroupMetrics> Trainer::discriminator_gradients(const TrainBatch& batch) {
  zero_discriminator_grads(model_);
  std::vector<GroupMetrics> out;
  for (const GroupSample& s : batch.samples) {
    DiscriminatorTerms<float> t = discriminator_terms(model_, s.real, s.cartoon, route(s.group));
    ad::backward(t.total());
    GroupMetrics m;
    m.group = s.group;
    m.losses.adv_d = t.adv->value()[0];
    m.losses.cam_d = t.cam->value()[0];
    m.losses.cls_real = t.cls->value()[0];
    m.d_correct = t.cls_correct;
    m.d_total = t.cls_total;
    out.push_back(std::move(m));
  }
  return out;
}

std::vector<GroupMetrics> Trainer::generator_gradients(const TrainBatch& batch) {
  std::vector<Parameter<float>*> params = generator_params();
  std::vector<Tensor<float>> acc;
  std::vector<char> touched(params.size(), 0);
  for (auto* p : params) acc.emplace_back(p->value.shape);

  std::vector<GroupMetrics> out;
  for (const GroupSample& s : batch.samples) {
    const Routing r = route(s.group);
    GeneratorTerms<float> t = generator_terms(model_, embedder_, s.real, s.cartoon, r);
    const DetachPolicy policy{r.detach_shared};
    GradientReport report = routed_loss_backward(t.weighted(weights_), r.branch, policy, model_);
    GroupMetrics m;
    m.group = s.group;
    m.losses.adv_g = t.adv->value()[0];
    m.losses.cycle = t.cycle->value()[0];
    m.losses.identity = t.identity->value()[0];
    m.losses.cam_g = t.cam->value()[0];
    m.losses.face = t.face->value()[0];
    m.losses.cls_fake = t.cls->value()[0];
    m.shared_grad_norm = report.shared_norm;
    m.specific_grad_norms = report.specific_norms;
    out.push_back(std::move(m));
    for (std::size_t i = 0; i < params.size(); ++i) {
      if (!params[i]->touched) continue;
      touched[i] = 1;
      for (std::size_t k = 0; k < acc[i].size(); ++k) acc[i][k] += params[i]->grad[k];
    }
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    params[i]->grad = std::move(acc[i]);
    params[i]->touched = touched[i] != 0;
  }
  return out;
}

namespace {

void require_finite(const LossBundle& b, int step, GroupId g, const char* phase) {
  if (!b.finite()) {
    throw Error(ErrorCode::kNumeric, std::string("non-finite ") + phase + " loss at step " +
                                         std::to_string(step) + " for group " +
                                         std::to_string(g.value));
  }
}

}  // namespace

MetricRecord Trainer::step(const TrainBatch& batch) {
  if (batch.samples.empty()) throw Error(ErrorCode::kInvalidArgument, "empty training batch");
  const auto start = std::chrono::steady_clock::now();
  MetricRecord rec;
  rec.step = steps_;

  std::vector<GroupMetrics> d = discriminator_gradients(batch);
  for (const auto& m : d) require_finite(m.losses, steps_, m.group, "discriminator");
  d_opt_.step(discriminator_params());

  std::vector<GroupMetrics> g = generator_gradients(batch);
  for (const auto& m : g) require_finite(m.losses, steps_, m.group, "generator");
  g_opt_.step(generator_params());

  int correct = 0, total = 0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    GroupMetrics m = std::move(g[i]);
    m.losses.adv_d = d[i].losses.adv_d;
    m.losses.cam_d = d[i].losses.cam_d;
    m.losses.cls_real = d[i].losses.cls_real;
    m.d_correct = d[i].d_correct;
    m.d_total = d[i].d_total;
    correct += m.d_correct;
    total += m.d_total;
    rec.losses += m.losses;
    rec.groups.push_back(std::move(m));
  }
  rec.d_accuracy = total > 0 ? static_cast<double>(correct) / total : 0.0;
  rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  ++steps_;
  return rec;
}

namespace {

void run_loop(Trainer& trainer, TranslationModel<float>& model, const Dataset& data,
              const TrainConfig& config, const std::vector<GroupId>& groups, MetricTrace& trace,
              const TrainHooks& hooks) {
  std::mt19937_64 rng = stream(config.seed, kDataStream);
  for (int i = 0; i < config.iterations; ++i) {
    TrainBatch batch = sample_batch(data, rng, groups, config.augment);
    MetricRecord rec = trainer.step(batch);
    if (hooks.on_record) hooks.on_record(rec);
    trace.records.push_back(std::move(rec));
    if (hooks.on_checkpoint && config.checkpoint_every > 0 && (i + 1) % config.checkpoint_every == 0 &&
        i + 1 < config.iterations) {
      hooks.on_checkpoint(i + 1, model);
    }
  }
}

}  // namespace

TrainResult train_basic(const Dataset& data, const ModelConfig& model_config, const TrainConfig& config,
                        const LossWeights& weights, const TrainHooks& hooks) {
  config.validate();
  model_config.validate();
  if (data.group_count() < 1) throw DataError(data.manifest().root.string(), "dataset has no group 0");
  TrainResult res{TranslationModel<float>(model_config, SplitConfig::defaults_for(model_config.generator)),
                  {}};
  init_params(res.model, config.init_std, config.seed);
  Trainer trainer(res.model, config, weights);
  run_loop(trainer, res.model, data, config, {GroupId(0)}, res.trace, hooks);
  return res;
}

int fewshot_group_count(const Dataset& data, const TrainConfig& config) {
  if (config.groups == 0) return data.group_count();
  if (config.groups > data.group_count()) {
    throw Error(ErrorCode::kData, "config asks for " + std::to_string(config.groups) +
                                      " groups but the dataset has " +
                                      std::to_string(data.group_count()));
  }
  return config.groups;
}

TrainResult train_fewshot(const Dataset& data, const TranslationModel<float>& basic,
                          const TrainConfig& config, const LossWeights& weights,
                          const SplitConfig& split, const TrainHooks& hooks) {
  config.validate();
  const int groups = fewshot_group_count(data, config);
  if (config.ablation == AblationMode::kFinetuneAll && groups < 2) {
    throw Error(ErrorCode::kInvalidArgument, "finetune_all needs at least one group besides group 0");
  }
  TrainResult res;
  if (basic.group_count() == 1) {
    std::vector<GroupId> fresh;
    for (int g = 1; g < groups; ++g) fresh.emplace_back(g);
    std::mt19937_64 rng = graft_stream(config.seed);
    res.model = graft(basic, fresh, split, rng, config.init_std);
  } else {
    if (basic.group_count() != groups) {
      throw Error(ErrorCode::kUnknownGroup, "model has " + std::to_string(basic.group_count()) +
                                        " groups but the run uses " + std::to_string(groups));
    }
    if (basic.split() != split) {
      throw Error(ErrorCode::kInvalidArgument, "split config differs from the grafted model's split");
    }
    res.model = basic;
    zero_generator_grads(res.model);
    zero_discriminator_grads(res.model);
  }

  Trainer trainer(res.model, config, weights);
  run_loop(trainer, res.model, data, config, trainer.active_groups(), res.trace, hooks);

  if (config.ablation == AblationMode::kMixed || config.ablation == AblationMode::kFinetuneAll) {
    // One set of weights served every group; publish it under every branch.
    for (Direction d : kDirections) {
      auto& gen = res.model.generator(d);
      for (int g = 1; g < gen.group_count(); ++g) gen.branch(GroupId(g)) = gen.branch(GroupId(0));
    }
  }
  return res;
}

}  // namespace fsct
