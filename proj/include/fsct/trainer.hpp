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

// Two-stage training: basic single-branch training on group 0, then grafted
// multi-group training with one (real, cartoon) pair per group per step.

#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "fsct/branch.hpp"
#include "fsct/data.hpp"
#include "fsct/losses.hpp"
#include "fsct/model.hpp"
#include "fsct/objective.hpp"

namespace fsct {

enum class Stage { kBasic, kFewshot };

enum class AblationMode {
  kDefault,      // selective backpropagation: shared core detached for groups >= 1
  kMixed,        // every group routed through branch 0, no detach
  kFinetuneAll,  // only groups >= 1, routed through branch 0, no detach
  kNoSelective,  // per-group branches, shared core live for every group
};

const char* to_string(Stage s);
const char* to_string(AblationMode m);
Stage parse_stage(std::string_view s);
AblationMode parse_ablation(std::string_view s);

struct TrainConfig {
  double lr = 1e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double weight_decay = 1e-4;
  AugmentConfig augment;
  double init_std = 0.02;
  int iterations = 1;
  std::uint64_t seed = 0;
  Stage stage = Stage::kBasic;
  AblationMode ablation = AblationMode::kDefault;
  int groups = 0;            // stage 2 group count; 0 takes it from the dataset
  int checkpoint_every = 0;  // 0 writes only the final checkpoint

  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

/// Draws every weight N(0, init_std^2) and zeroes every bias from a
/// generator seeded with `seed`, in parameter enumeration order. Norm scales
/// are set to 1, shifts to 0, and mixing ratios to their architectural
/// defaults (1 in the shared decoder, 0 in upsampling blocks). Throws
/// ContractError on a grafted (multi-branch) model.
void init_params(TranslationModel<float>& model, double init_std, std::uint64_t seed);

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-4;
};

/// Adam with L2 weight decay added to the gradient. Parameters that no
/// backward pass reached since their last zero_grad() are skipped entirely:
/// no decay, no moment update, no step count. Mixing ratios are clamped to
/// [0, 1] after every update.
class Adam {
 public:
  explicit Adam(const AdamConfig& config) : config_(config) {}

  void step(const std::vector<Parameter<float>*>& params);
  /// Number of updates applied to the i-th parameter.
  long steps_taken(std::size_t i) const { return i < state_.size() ? state_[i].t : 0; }

 private:
  struct State {
    std::vector<double> m, v;
    long t = 0;
  };
  AdamConfig config_;
  std::vector<State> state_;
};

struct GroupMetrics {
  GroupId group;
  LossBundle losses;
  double shared_grad_norm = 0.0;       // generator shared core, this group's loss only
  std::vector<double> specific_grad_norms;  // per branch, this group's loss only
  int d_correct = 0;
  int d_total = 0;
};

/// One training step. `losses` is the sum of the per-group bundles.
struct MetricRecord {
  int step = 0;
  LossBundle losses;
  std::vector<GroupMetrics> groups;
  double d_accuracy = 0.0;  // D group accuracy on this step's real images
  double wall_ms = 0.0;
};

/// One JSON object per line; `wall_ms` is omitted when `with_time` is false.
std::string to_json_line(const MetricRecord& r, bool with_time = true);

struct MetricTrace {
  std::vector<MetricRecord> records;
};

class Trainer {
 public:
  Trainer(TranslationModel<float>& model, const TrainConfig& config, const LossWeights& weights);

  /// Branch, label and detach decision for a group under the ablation mode.
  Routing route(GroupId g) const;
  /// Groups that take part in a stage-2 step under the ablation mode.
  std::vector<GroupId> active_groups() const;

  /// Accumulates discriminator gradients for every sample; returns per-group
  /// metrics with the discriminator-side losses filled in.
  std::vector<GroupMetrics> discriminator_gradients(const TrainBatch& batch);
  /// Accumulates generator gradients group by group. Each group's loss is
  /// backpropagated on its own so its partition norms can be reported.
  std::vector<GroupMetrics> generator_gradients(const TrainBatch& batch);

  /// Discriminator update, then generator update.
  MetricRecord step(const TrainBatch& batch);

  const FaceEmbedder<float>& embedder() const { return embedder_; }

 private:
  std::vector<Parameter<float>*> generator_params();
  std::vector<Parameter<float>*> discriminator_params();

  TranslationModel<float>& model_;
  TrainConfig config_;
  LossWeights weights_;
  FaceEmbedder<float> embedder_;
  Adam g_opt_;
  Adam d_opt_;
  int steps_ = 0;
};

struct TrainHooks {
  std::function<void(const MetricRecord&)> on_record;
  std::function<void(int step, const TranslationModel<float>&)> on_checkpoint;
};

struct TrainResult {
  TranslationModel<float> model;
  MetricTrace trace;
};

/// Stage 1: fresh single-branch model trained on group 0.
TrainResult train_basic(const Dataset& data, const ModelConfig& model_config,
                        const TrainConfig& config, const LossWeights& weights,
                        const TrainHooks& hooks = {});

/// Stage 2: grafts `basic` when it has a single branch (a multi-branch model
/// continues training as is) and trains on groups 0..G-1.
TrainResult train_fewshot(const Dataset& data, const TranslationModel<float>& basic,
                          const TrainConfig& config, const LossWeights& weights,
                          const SplitConfig& split, const TrainHooks& hooks = {});

/// Random stream a stage-2 run with `seed` uses to graft its basic model.
std::mt19937_64 graft_stream(std::uint64_t seed);

/// Group count a stage-2 run uses for `data` under `config`.
int fewshot_group_count(const Dataset& data, const TrainConfig& config);

}  // namespace fsct
