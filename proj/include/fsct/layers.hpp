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

// Building blocks of the generator and discriminator. Every block is a
// copyable value type; `visit` enumerates its parameters under block-local
// names so that the owner can compose the full, partition-aware name.

#include <string>
#include <variant>

#include "fsct/autograd.hpp"

namespace fsct {

template <typename T>
using Var = ad::Var<T>;

/// Convolution with reflection padding.
template <typename T>
struct Conv2d {
  int in_channels = 0;
  int out_channels = 0;
  int kernel = 1;
  int stride = 1;
  int pad = 0;
  bool has_bias = false;
  Parameter<T> weight;
  Parameter<T> bias;

  Conv2d() = default;
  Conv2d(int in, int out, int k, int s, int p, bool with_bias)
      : in_channels(in), out_channels(out), kernel(k), stride(s), pad(p), has_bias(with_bias),
        weight(ParamKind::kWeight, {out, in, k, k}) {
    if (with_bias) bias = Parameter<T>(ParamKind::kBias, {out});
  }

  Var<T> forward(const Var<T>& x, bool live) {
    Var<T> in = pad > 0 ? ad::reflect_pad(x, pad) : x;
    Var<T> b = has_bias ? ad::leaf(bias, live) : nullptr;
    return ad::conv2d(in, ad::leaf(weight, live), b, stride);
  }

  template <typename F>
  void visit(const std::string& prefix, F&& f) {
    f(prefix + "weight", weight);
    if (has_bias) f(prefix + "bias", bias);
  }
};

template <typename T>
struct Linear {
  bool has_bias = false;
  Parameter<T> weight;
  Parameter<T> bias;

  Linear() = default;
  Linear(int in, int out, bool with_bias)
      : has_bias(with_bias), weight(ParamKind::kWeight, {out, in}) {
    if (with_bias) bias = Parameter<T>(ParamKind::kBias, {out});
  }

  int in_features() const { return weight.value.dim(1); }
  int out_features() const { return weight.value.dim(0); }

  Var<T> forward(const Var<T>& x, bool live) {
    Var<T> b = has_bias ? ad::leaf(bias, live) : nullptr;
    return ad::linear(x, ad::leaf(weight, live), b);
  }

  template <typename F>
  void visit(const std::string& prefix, F&& f) {
    f(prefix + "weight", weight);
    if (has_bias) f(prefix + "bias", bias);
  }
};

/// Adaptive layer-instance normalization: rho * IN(f) + (1 - rho) * LN(f),
/// then per-channel scale by gamma and shift by beta. rho must lie in [0, 1].
template <typename T>
Var<T> adalin(const Var<T>& f, const Var<T>& gamma, const Var<T>& beta, const Var<T>& rho) {
  const int c = f->shape().at(0);
  for (const auto* v : {&gamma, &beta, &rho}) {
    if ((*v)->value().size() != static_cast<std::size_t>(c)) {
      throw ShapeError("adalin: parameter length " + std::to_string((*v)->value().size()) +
                       " != channels " + std::to_string(c));
    }
  }
  for (T r : rho->value().data) {
    if (!(r >= T(0) && r <= T(1))) {
      throw ContractError("adalin: rho outside [0, 1]: " + std::to_string(static_cast<double>(r)));
    }
  }
  Var<T> mixed = ad::channel_mul(ad::instance_norm(f), rho) +
                 ad::channel_mul(ad::layer_norm(f), T(1) - rho);
  return ad::channel_add(ad::channel_mul(mixed, gamma), beta);
}

// ---- encoder blocks ----------------------------------------------------------

/// 7x7 conv, instance norm, ReLU.
template <typename T>
struct InputBlock {
  Conv2d<T> conv;
  InputBlock() = default;
  InputBlock(int in, int out) : conv(in, out, 7, 1, 3, false) {}
  Var<T> forward(const Var<T>& x, bool live) {
    return ad::relu(ad::instance_norm(conv.forward(x, live)));
  }
  template <typename F>
  void visit(const std::string& p, F&& f) { conv.visit(p + "conv.", f); }
};

/// Stride-2 3x3 conv, instance norm, ReLU.
template <typename T>
struct DownBlock {
  Conv2d<T> conv;
  DownBlock() = default;
  DownBlock(int in, int out) : conv(in, out, 3, 2, 1, false) {}
  Var<T> forward(const Var<T>& x, bool live) {
    return ad::relu(ad::instance_norm(conv.forward(x, live)));
  }
  template <typename F>
  void visit(const std::string& p, F&& f) { conv.visit(p + "conv.", f); }
};

template <typename T>
struct ResBlock {
  Conv2d<T> conv1, conv2;
  ResBlock() = default;
  explicit ResBlock(int c) : conv1(c, c, 3, 1, 1, false), conv2(c, c, 3, 1, 1, false) {}
  Var<T> forward(const Var<T>& x, bool live) {
    Var<T> h = ad::relu(ad::instance_norm(conv1.forward(x, live)));
    return x + ad::instance_norm(conv2.forward(h, live));
  }
  template <typename F>
  void visit(const std::string& p, F&& f) {
    conv1.visit(p + "conv1.", f);
    conv2.visit(p + "conv2.", f);
  }
};

/// Single-level hourglass: stride-2 contraction, a 3x3 conv at half
/// resolution, nearest upsampling and a 3x3 conv, added back to the input.
template <typename T>
struct HourglassBlock {
  Conv2d<T> down, mid, up;
  HourglassBlock() = default;
  explicit HourglassBlock(int c)
      : down(c, c, 3, 2, 1, false), mid(c, c, 3, 1, 1, false), up(c, c, 3, 1, 1, false) {}
  Var<T> forward(const Var<T>& x, bool live) {
    Var<T> h = ad::relu(ad::instance_norm(down.forward(x, live)));
    h = ad::relu(ad::instance_norm(mid.forward(h, live)));
    h = ad::instance_norm(up.forward(ad::upsample_nearest2(h), live));
    return x + h;
  }
  template <typename F>
  void visit(const std::string& p, F&& f) {
    down.visit(p + "down.", f);
    mid.visit(p + "mid.", f);
    up.visit(p + "up.", f);
  }
};

template <typename T>
using EncoderBlock = std::variant<InputBlock<T>, DownBlock<T>, HourglassBlock<T>, ResBlock<T>>;

// ---- decoder blocks ----------------------------------------------------------

/// Residual block whose normalizations are AdaLIN driven by externally
/// computed gamma/beta.
template <typename T>
struct AdaResBlock {
  Conv2d<T> conv1, conv2;
  Parameter<T> rho1, rho2;
  AdaResBlock() = default;
  explicit AdaResBlock(int c)
      : conv1(c, c, 3, 1, 1, true), conv2(c, c, 3, 1, 1, true),
        rho1(ParamKind::kMixRatio, {c}, T(1)), rho2(ParamKind::kMixRatio, {c}, T(1)) {}
  Var<T> forward(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta, bool live) {
    Var<T> h = ad::relu(adalin(conv1.forward(x, live), gamma, beta, ad::leaf(rho1, live)));
    return x + adalin(conv2.forward(h, live), gamma, beta, ad::leaf(rho2, live));
  }
  template <typename F>
  void visit(const std::string& p, F&& f) {
    conv1.visit(p + "conv1.", f);
    f(p + "rho1", rho1);
    conv2.visit(p + "conv2.", f);
    f(p + "rho2", rho2);
  }
};

/// Nearest x2 upsampling, 3x3 conv, layer-instance norm with learned
/// gamma/beta/rho, ReLU.
template <typename T>
struct UpBlock {
  Conv2d<T> conv;
  Parameter<T> rho, gamma, beta;
  UpBlock() = default;
  UpBlock(int in, int out)
      : conv(in, out, 3, 1, 1, false), rho(ParamKind::kMixRatio, {out}, T(0)),
        gamma(ParamKind::kNormScale, {out}, T(1)), beta(ParamKind::kNormShift, {out}, T(0)) {}
  Var<T> forward(const Var<T>& x, const Var<T>&, const Var<T>&, bool live) {
    Var<T> h = conv.forward(ad::upsample_nearest2(x), live);
    return ad::relu(adalin(h, ad::leaf(gamma, live), ad::leaf(beta, live), ad::leaf(rho, live)));
  }
  template <typename F>
  void visit(const std::string& p, F&& f) {
    conv.visit(p + "conv.", f);
    f(p + "rho", rho);
    f(p + "gamma", gamma);
    f(p + "beta", beta);
  }
};

/// 7x7 conv to RGB followed by tanh.
template <typename T>
struct OutputBlock {
  Conv2d<T> conv;
  OutputBlock() = default;
  explicit OutputBlock(int in) : conv(in, 3, 7, 1, 3, false) {}
  Var<T> forward(const Var<T>& x, const Var<T>&, const Var<T>&, bool live) {
    return ad::tanh(conv.forward(x, live));
  }
  template <typename F>
  void visit(const std::string& p, F&& f) { conv.visit(p + "conv.", f); }
};

template <typename T>
using DecoderBlock = std::variant<AdaResBlock<T>, UpBlock<T>, OutputBlock<T>>;

template <typename T>
Var<T> forward_block(EncoderBlock<T>& block, const Var<T>& x, bool live) {
  return std::visit([&](auto& b) { return b.forward(x, live); }, block);
}

template <typename T>
Var<T> forward_block(DecoderBlock<T>& block, const Var<T>& x, const Var<T>& gamma,
                     const Var<T>& beta, bool live) {
  return std::visit([&](auto& b) { return b.forward(x, gamma, beta, live); }, block);
}

template <typename Block, typename F>
void visit_block(Block& block, const std::string& prefix, F&& f) {
  std::visit([&](auto& b) { b.visit(prefix, f); }, block);
}

// ---- heads -------------------------------------------------------------------

template <typename T>
struct CamResult {
  Var<T> features;   // attended features, same shape as input
  Var<T> logits;     // [2]: average-pool and max-pool logits
  Var<T> heatmap;    // [1, h, w]: channel sum of attended features
};

/// Class-activation-map attention. Pooled features are scored by two learned
/// weight vectors; the same vectors reweight the feature map, and the two
/// reweighted maps are fused by a 1x1 conv.
template <typename T>
struct CamHead {
  Linear<T> gap_fc, gmp_fc;
  Conv2d<T> fuse;
  T slope = T(0);  // 0: ReLU, >0: leaky ReLU

  CamHead() = default;
  CamHead(int c, T leaky_slope)
      : gap_fc(c, 1, false), gmp_fc(c, 1, false), fuse(2 * c, c, 1, 1, 0, true),
        slope(leaky_slope) {}

  CamResult<T> forward(const Var<T>& x, bool live) {
    const int c = x->shape().at(0);
    Var<T> w_gap = ad::leaf(gap_fc.weight, live);
    Var<T> w_gmp = ad::leaf(gmp_fc.weight, live);
    Var<T> gap_logit = ad::linear<T>(ad::global_avg_pool(x), w_gap, nullptr);
    Var<T> gmp_logit = ad::linear<T>(ad::global_max_pool(x), w_gmp, nullptr);
    Var<T> x_gap = ad::channel_mul(x, ad::reshape(w_gap, {c}));
    Var<T> x_gmp = ad::channel_mul(x, ad::reshape(w_gmp, {c}));
    Var<T> fused = fuse.forward(ad::concat(x_gap, x_gmp), live);
    fused = slope > T(0) ? ad::leaky_relu(fused, slope) : ad::relu(fused);
    return {fused, ad::concat(gap_logit, gmp_logit), ad::channel_sum(fused)};
  }

  template <typename F>
  void visit(const std::string& p, F&& f) {
    gap_fc.visit(p + "gap_fc.", f);
    gmp_fc.visit(p + "gmp_fc.", f);
    fuse.visit(p + "fuse.", f);
  }
};

/// Two fully connected layers producing the AdaLIN gamma and beta.
template <typename T>
struct AdaLinMlp {
  bool pooled = false;  // global-average-pool instead of flattening
  Linear<T> fc1, fc2, gamma_fc, beta_fc;

  AdaLinMlp() = default;
  AdaLinMlp(int in_features, int c, bool pool)
      : pooled(pool), fc1(in_features, c, false), fc2(c, c, false), gamma_fc(c, c, false),
        beta_fc(c, c, false) {}

  std::pair<Var<T>, Var<T>> forward(const Var<T>& x, bool live) {
    Var<T> in = pooled ? ad::global_avg_pool(x) : ad::reshape(x, {static_cast<int>(x->value().size())});
    Var<T> h = ad::relu(fc1.forward(in, live));
    h = ad::relu(fc2.forward(h, live));
    return {gamma_fc.forward(h, live), beta_fc.forward(h, live)};
  }

  template <typename F>
  void visit(const std::string& p, F&& f) {
    fc1.visit(p + "fc1.", f);
    fc2.visit(p + "fc2.", f);
    gamma_fc.visit(p + "gamma.", f);
    beta_fc.visit(p + "beta.", f);
  }
};

}  // namespace fsct
