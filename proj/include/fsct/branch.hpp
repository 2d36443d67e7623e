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

#include <cstdint>
#include <map>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "fsct/model.hpp"

namespace fsct {

/// Decides whether the shared core is detached for a group's losses. In
/// selective mode only group 0 updates the shared parameters.
struct DetachPolicy {
  bool selective = true;

  bool detach(GroupId g) const { return selective && !g.is_common(); }

  static DetachPolicy selective_backprop() { return {true}; }
  static DetachPolicy disabled() { return {false}; }
};

/// Full generator parameter names split into the shared set and one
/// specific set per group. Order follows model enumeration order.
struct ParamPartition {
  std::vector<std::string> shared;
  std::map<int, std::vector<std::string>> specific;

  std::size_t size() const;
};

/// Per-partition L2 norms of the generator gradient buffers.
struct GradientReport {
  double shared_norm = 0.0;
  std::vector<double> specific_norms;  // indexed by group id

  double specific_norm(GroupId g) const { return specific_norms.at(static_cast<std::size_t>(g.value)); }
};

template <typename T>
ParamPartition partition(TranslationModel<T>& model);

/// Number of scalar generator parameters per partition cell.
struct PartitionCounts {
  std::size_t shared = 0;
  std::vector<std::size_t> specific;  // indexed by group id
};

template <typename T>
PartitionCounts count_parameters(TranslationModel<T>& model);

template <typename T>
void zero_generator_grads(TranslationModel<T>& model);

template <typename T>
void zero_discriminator_grads(TranslationModel<T>& model);

template <typename T>
GradientReport gradient_report(TranslationModel<T>& model);

/// Zeroes generator gradients, backpropagates `loss`, and reports the
/// per-partition gradient norms. Throws ContractError when the loss is not
/// connected to the model or when the policy demands a detached shared core
/// but shared parameters received gradient.
template <typename T>
GradientReport routed_loss_backward(const Var<T>& loss, GroupId group, const DetachPolicy& policy,
                                    TranslationModel<T>& model);

/// Builds a multi-branch model from a single-branch basic model: the shared
/// core and group-0 branch keep the basic parameters and every new group gets
/// a value copy of the group-0 branch. When new groups are added the
/// discriminators' group heads are re-created with 1 + |new_groups| outputs,
/// drawn N(0, init_std^2) from `rng`.
template <typename T>
TranslationModel<T> graft(const TranslationModel<T>& basic, std::span<const GroupId> new_groups,
                          const SplitConfig& split, std::mt19937_64& rng, double init_std);

}  // namespace fsct
