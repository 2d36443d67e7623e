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

#include "fsct/losses.hpp"

namespace fsct {

void LossWeights::validate() const {
  for (double w : {adv, cycle, identity, cam, face, cls}) {
    if (!(w >= 0.0) || !std::isfinite(w)) {
      throw Error(ErrorCode::kInvalidArgument, "loss weights must be finite and nonnegative");
    }
  }
}

bool LossBundle::finite() const {
  for (double v : {adv_g, adv_d, cycle, identity, cam_g, cam_d, face, cls_real, cls_fake}) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

LossBundle& LossBundle::operator+=(const LossBundle& o) {
  adv_g += o.adv_g;
  adv_d += o.adv_d;
  cycle += o.cycle;
  identity += o.identity;
  cam_g += o.cam_g;
  cam_d += o.cam_d;
  face += o.face;
  cls_real += o.cls_real;
  cls_fake += o.cls_fake;
  return *this;
}

double total_g(const LossBundle& b, const LossWeights& w) {
  return w.adv * b.adv_g + w.cycle * b.cycle + w.identity * b.identity + w.cam * b.cam_g +
         w.face * b.face + w.cls * b.cls_fake;
}

double total_d(const LossBundle& b) { return b.adv_d + b.cam_d + b.cls_real; }

}  // namespace fsct
