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

// Per-group assembly of the generator and discriminator objectives from the
// loss families. Both translation directions are evaluated for one
// (real, cartoon) pair of a group.

#include <algorithm>

#include "fsct/losses.hpp"
#include "fsct/model.hpp"

namespace fsct {

template <typename T>
struct GeneratorTerms {
  Var<T> adv, cycle, identity, cam, face, cls;

  Var<T> weighted(const LossWeights& w) const {
    return adv * static_cast<T>(w.adv) + cycle * static_cast<T>(w.cycle) +
           identity * static_cast<T>(w.identity) + cam * static_cast<T>(w.cam) +
           face * static_cast<T>(w.face) + cls * static_cast<T>(w.cls);
  }
};

template <typename T>
struct DiscriminatorTerms {
  Var<T> adv, cam, cls;
  int cls_correct = 0;  // real images whose group was predicted correctly
  int cls_total = 0;

  Var<T> total() const { return adv + cam + cls; }
};

/// Which branch a group's sample is routed through, its class label, and
/// whether the shared core is detached for it.
struct Routing {
  GroupId branch;
  GroupId label;
  bool detach_shared = false;
};

/// Generator-side terms. Discriminator and embedder parameters are used as
/// constants; generator parameters are live except the shared core when
/// `route.detach_shared` is set.
template <typename T>
GeneratorTerms<T> generator_terms(TranslationModel<T>& model, const FaceEmbedder<T>& embedder,
                                  const Tensor<T>& real, const Tensor<T>& cartoon,
                                  const Routing& route) {
  const Var<T> images[2] = {ad::constant(real), ad::constant(cartoon)};
  GeneratorTerms<T> t;
  Var<T> forward_image[2];
  for (Direction dir : kDirections) {
    const Var<T>& x_s = images[index(source_domain(dir))];
    const Var<T>& x_t = images[index(target_domain(dir))];
    Translation<T> fwd = translate(model, x_s, route.branch, dir, ForwardMode::kTrain,
                                   route.detach_shared);
    Translation<T> back = translate(model, fwd.image, route.branch, reverse(dir),
                                    ForwardMode::kTrain, route.detach_shared);
    Translation<T> ident = translate(model, x_t, route.branch, dir, ForwardMode::kTrain,
                                     route.detach_shared);
    Judgement<T> judged = discriminate(model, fwd.image, target_domain(dir), false);

    Var<T> adv = adv_loss_g(judged.patch_logits) + adv_loss_g(judged.cam_logit);
    Var<T> cyc = cycle_loss(x_s, back.image);
    Var<T> idt = identity_loss(x_t, ident.image);
    Var<T> cam = cam_loss_g(ad::sigmoid(fwd.cam_logit), ad::sigmoid(ident.cam_logit));
    Var<T> cls = group_cls_loss(judged.group_logits, route.label);

    t.adv = t.adv ? t.adv + adv : adv;
    t.cycle = t.cycle ? t.cycle + cyc : cyc;
    t.identity = t.identity ? t.identity + idt : idt;
    t.cam = t.cam ? t.cam + cam : cam;
    t.cls = t.cls ? t.cls + cls : cls;
    forward_image[index(dir)] = fwd.image;
  }
  t.face = face_id_loss(images[index(Domain::kReal)], forward_image[index(Direction::kRealToCartoon)],
                        images[index(Domain::kCartoon)],
                        forward_image[index(Direction::kCartoonToReal)], embedder);
  return t;
}

/// Discriminator-side terms. Translated images are produced in inference
/// mode, so no generator parameter takes part.
template <typename T>
DiscriminatorTerms<T> discriminator_terms(TranslationModel<T>& model, const Tensor<T>& real,
                                          const Tensor<T>& cartoon, const Routing& route) {
  const Tensor<T>* images[2] = {&real, &cartoon};
  DiscriminatorTerms<T> t;
  for (Direction dir : kDirections) {
    const Domain tgt = target_domain(dir);
    Translation<T> fake =
        translate(static_cast<const TranslationModel<T>&>(model), *images[index(source_domain(dir))],
                  route.branch, dir);
    Judgement<T> on_real = discriminate(model, ad::constant(*images[index(tgt)]), tgt, true);
    Judgement<T> on_fake = discriminate(model, ad::detach(fake.image), tgt, true);

    Var<T> adv = adv_loss_d(on_real.patch_logits, on_fake.patch_logits);
    Var<T> cam = cam_loss_d(on_real.cam_logit, on_fake.cam_logit);
    Var<T> cls = group_cls_loss(on_real.group_logits, route.label);
    t.adv = t.adv ? t.adv + adv : adv;
    t.cam = t.cam ? t.cam + cam : cam;
    t.cls = t.cls ? t.cls + cls : cls;

    const auto& logits = on_real.group_logits->value().data;
    const auto best = std::max_element(logits.begin(), logits.end()) - logits.begin();
    t.cls_correct += best == route.label.value ? 1 : 0;
    t.cls_total += 1;
  }
  return t;
}

template <typename T>
LossBundle to_bundle(const GeneratorTerms<T>& g, const DiscriminatorTerms<T>& d) {
  auto v = [](const Var<T>& x) { return x ? static_cast<double>(x->value()[0]) : 0.0; };
  LossBundle b;
  b.adv_g = v(g.adv);
  b.cycle = v(g.cycle);
  b.identity = v(g.identity);
  b.cam_g = v(g.cam);
  b.face = v(g.face);
  b.cls_fake = v(g.cls);
  b.adv_d = v(d.adv);
  b.cam_d = v(d.cam);
  b.cls_real = v(d.cls);
  return b;
}

}  // namespace fsct
