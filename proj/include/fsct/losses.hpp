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

// Loss families of the translation objective and their weighted totals.
// Adversarial and CAM-discriminator terms use least-squares targets
// (real -> 1, fake -> 0 for the critic; fake -> 1 for the generator).

#include <cmath>
#include <string>

#include "fsct/autograd.hpp"
#include "fsct/model.hpp"

namespace fsct {

/// Clamp applied to probabilities before every log.
inline constexpr double kLogEps = 1e-7;

struct LossWeights {
  double adv = 1.0;
  double cycle = 10.0;
  double identity = 10.0;
  double cam = 1000.0;
  double face = 1.0;
  double cls = 100.0;

  void validate() const;
  auto operator<=>(const LossWeights&) const = default;
};

/// Scalar values of every loss component. Each component is the sum over both
/// translation directions where the family is directional.
struct LossBundle {
  double adv_g = 0, adv_d = 0;
  double cycle = 0, identity = 0;
  double cam_g = 0, cam_d = 0;
  double face = 0;
  double cls_real = 0, cls_fake = 0;

  bool finite() const;
  LossBundle& operator+=(const LossBundle& o);
};

double total_g(const LossBundle& b, const LossWeights& w);
/// adv_d + cam_d + cls_real
double total_d(const LossBundle& b);

/// mean((real - 1)^2) + mean(fake^2)
template <typename T>
Var<T> adv_loss_d(const Var<T>& real_logits, const Var<T>& fake_logits) {
  if (real_logits->value().empty() || fake_logits->value().empty()) {
    throw ShapeError("adv_loss_d: empty logit map");
  }
  return ad::mean(ad::square(real_logits - T(1))) + ad::mean(ad::square(fake_logits));
}

/// mean((fake - 1)^2)
template <typename T>
Var<T> adv_loss_g(const Var<T>& fake_logits) {
  if (fake_logits->value().empty()) throw ShapeError("adv_loss_g: empty logit map");
  return ad::mean(ad::square(fake_logits - T(1)));
}

/// Mean absolute elementwise difference.
template <typename T>
Var<T> cycle_loss(const Var<T>& x, const Var<T>& reconstructed) {
  return ad::mean(ad::abs(x - reconstructed));
}

template <typename T>
Var<T> identity_loss(const Var<T>& x, const Var<T>& translated) {
  return cycle_loss(x, translated);
}

/// -(mean log eta(source) + mean log(1 - eta(target))) on probabilities from
/// the generator's own CAM classifier.
template <typename T>
Var<T> cam_loss_g(const Var<T>& eta_on_source, const Var<T>& eta_on_target) {
  for (const auto* v : {&eta_on_source, &eta_on_target}) {
    for (T e : (*v)->value().data) {
      if (!(e >= T(0) && e <= T(1))) {
        throw ContractError("cam_loss_g: probability outside [0, 1]: " +
                            std::to_string(static_cast<double>(e)));
      }
    }
  }
  const T lo = static_cast<T>(kLogEps), hi = T(1) - static_cast<T>(kLogEps);
  Var<T> src = ad::mean(ad::log(ad::clamp(eta_on_source, lo, hi)));
  Var<T> tgt = ad::mean(ad::log(ad::clamp(T(1) - eta_on_target, lo, hi)));
  return T(-1) * (src + tgt);
}

/// mean((eta_real - 1)^2) + mean(eta_fake^2) on raw discriminator CAM logits.
template <typename T>
Var<T> cam_loss_d(const Var<T>& eta_real, const Var<T>& eta_fake) {
  return adv_loss_d(eta_real, eta_fake);
}

/// (1 - cos(e_s, e_fake)) + (1 - cos(e_t, e_back)) on unit-norm embeddings.
template <typename T>
Var<T> face_id_loss(const Var<T>& emb_source, const Var<T>& emb_translated,
                    const Var<T>& emb_target, const Var<T>& emb_translated_back) {
  for (const auto* v : {&emb_source, &emb_translated, &emb_target, &emb_translated_back}) {
    double sq = 0.0;
    for (T e : (*v)->value().data) sq += static_cast<double>(e) * static_cast<double>(e);
    if (std::abs(std::sqrt(sq) - 1.0) > 1e-3) {
      throw ContractError("face_id_loss: embedding is not unit norm (norm " +
                          std::to_string(std::sqrt(sq)) + ")");
    }
  }
  return (T(1) - ad::dot(emb_source, emb_translated)) +
         (T(1) - ad::dot(emb_target, emb_translated_back));
}

/// Embeds the four images with the frozen embedder and applies face_id_loss.
template <typename T>
Var<T> face_id_loss(const Var<T>& x_s, const Var<T>& y_fake, const Var<T>& x_t,
                    const Var<T>& x_fake_back, const FaceEmbedder<T>& embedder) {
  return face_id_loss(embedder.embed(x_s), embedder.embed(y_fake), embedder.embed(x_t),
                      embedder.embed(x_fake_back));
}

/// -log softmax(logits)[group]
template <typename T>
Var<T> group_cls_loss(const Var<T>& group_logits, GroupId group) {
  const auto n = static_cast<int>(group_logits->value().size());
  if (group.value < 0 || group.value >= n) {
    throw RegistryError("group_cls_loss: group " + std::to_string(group.value) +
                        " out of range for " + std::to_string(n) + " logits");
  }
  return T(-1) * ad::pick(ad::log_softmax(group_logits), static_cast<std::size_t>(group.value));
}

}  // namespace fsct
