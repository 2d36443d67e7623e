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

#include "fsct/branch.hpp"

#include <algorithm>
#include <cmath>

namespace fsct {

std::size_t ParamPartition::size() const {
  std::size_t n = shared.size();
  for (const auto& [g, names] : specific) n += names.size();
  return n;
}

template <typename T>
ParamPartition partition(TranslationModel<T>& model) {
  ParamPartition out;
  for (int g = 0; g < model.group_count(); ++g) out.specific[g];
  model.visit_generator([&](const std::string& name, Parameter<T>&, const ParamSite& site) {
    if (site.partition == Partition::kShared) {
      out.shared.push_back(name);
    } else {
      out.specific[site.group.value].push_back(name);
    }
  });
  return out;
}

template <typename T>
PartitionCounts count_parameters(TranslationModel<T>& model) {
  PartitionCounts out;
  out.specific.assign(static_cast<std::size_t>(model.group_count()), 0);
  model.visit_generator([&](const std::string&, Parameter<T>& p, const ParamSite& site) {
    if (site.partition == Partition::kShared) {
      out.shared += p.value.size();
    } else {
      out.specific[static_cast<std::size_t>(site.group.value)] += p.value.size();
    }
  });
  return out;
}

template <typename T>
void zero_generator_grads(TranslationModel<T>& model) {
  model.visit_generator([](const std::string&, Parameter<T>& p, const ParamSite&) { p.zero_grad(); });
}

template <typename T>
void zero_discriminator_grads(TranslationModel<T>& model) {
  model.visit_discriminator([](const std::string&, Parameter<T>& p, Domain) { p.zero_grad(); });
}

template <typename T>
GradientReport gradient_report(TranslationModel<T>& model) {
  GradientReport r;
  std::vector<double> sq(static_cast<std::size_t>(model.group_count()), 0.0);
  double shared_sq = 0.0;
  model.visit_generator([&](const std::string&, Parameter<T>& p, const ParamSite& site) {
    double acc = 0.0;
    for (T v : p.grad.data) acc += static_cast<double>(v) * static_cast<double>(v);
    if (site.partition == Partition::kShared) {
      shared_sq += acc;
    } else {
      sq[static_cast<std::size_t>(site.group.value)] += acc;
    }
  });
  r.shared_norm = std::sqrt(shared_sq);
  for (double s : sq) r.specific_norms.push_back(std::sqrt(s));
  return r;
}

template <typename T>
GradientReport routed_loss_backward(const Var<T>& loss, GroupId group, const DetachPolicy& policy,
                                    TranslationModel<T>& model) {
  if (group.value < 0 || group.value >= model.group_count()) {
    throw RegistryError("group " + std::to_string(group.value) + " is not registered");
  }
  zero_generator_grads(model);
  ad::backward(loss);
  GradientReport r = gradient_report(model);
  if (policy.detach(group) && r.shared_norm != 0.0) {
    throw ContractError("shared parameters received gradient from a loss on group " +
                        std::to_string(group.value) + " under selective backpropagation");
  }
  return r;
}

template <typename T>
TranslationModel<T> graft(const TranslationModel<T>& basic, std::span<const GroupId> new_groups,
                          const SplitConfig& split, std::mt19937_64& rng, double init_std) {
  if (basic.group_count() != 1) {
    throw ContractError("graft expects a single-branch basic model, got " +
                        std::to_string(basic.group_count()) + " branches");
  }
  std::vector<int> ids;
  for (GroupId g : new_groups) ids.push_back(g.value);
  std::sort(ids.begin(), ids.end());
  if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) {
    throw Error(ErrorCode::kInvalidArgument, "graft: duplicate group ids");
  }
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] != static_cast<int>(i) + 1) {
      throw Error(ErrorCode::kInvalidArgument,
                  "graft: new group ids must be dense 1..k, got " + std::to_string(ids[i]));
    }
  }
  split.validate(basic.config.generator);

  TranslationModel<T> out = basic;
  for (Direction d : kDirections) {
    auto& gen = out.generator(d);
    gen.resplit(split);
    for (std::size_t i = 0; i < ids.size(); ++i) gen.add_branch();
  }
  if (!ids.empty()) {
    for (Domain d : kDomains) {
      out.discriminator(d).reset_group_head(static_cast<int>(ids.size()) + 1, rng, init_std);
    }
  }
  zero_generator_grads(out);
  zero_discriminator_grads(out);
  return out;
}

#define FSCT_INSTANTIATE(T)                                                                   \
  template ParamPartition partition(TranslationModel<T>&);                                    \
  template PartitionCounts count_parameters(TranslationModel<T>&);                            \
  template void zero_generator_grads(TranslationModel<T>&);                                   \
  template void zero_discriminator_grads(TranslationModel<T>&);                               \
  template GradientReport gradient_report(TranslationModel<T>&);                              \
  template GradientReport routed_loss_backward(const Var<T>&, GroupId, const DetachPolicy&,   \
                                               TranslationModel<T>&);                         \
  template TranslationModel<T> graft(const TranslationModel<T>&, std::span<const GroupId>,    \
                                     const SplitConfig&, std::mt19937_64&, double);

FSCT_INSTANTIATE(float)
FSCT_INSTANTIATE(double)

#undef FSCT_INSTANTIATE

}  // namespace fsct
