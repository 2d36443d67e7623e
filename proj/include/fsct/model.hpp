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

#include <array>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "fsct/layers.hpp"
#include "fsct/types.hpp"

namespace fsct {

enum class MlpInput { kFlatten, kPool };

struct GeneratorConfig {
  int image_size = 256;
  int channels = 64;  // width after the input block; doubles per downsampling block
  int n_down = 2;
  int n_res = 4;        // residual blocks in the encoder and AdaLIN blocks in the decoder
  int n_hourglass = 0;  // optional hourglass blocks placed before the residual blocks
  MlpInput mlp_input = MlpInput::kFlatten;

  int encoder_blocks() const { return 1 + n_down + n_hourglass + n_res; }
  int decoder_blocks() const { return n_res + n_down + 1; }
  int feature_channels() const { return channels << n_down; }
  int feature_size() const { return image_size >> n_down; }

  auto operator<=>(const GeneratorConfig&) const = default;
};

struct DiscriminatorConfig {
  int channels = 64;
  int n_layers = 5;  // stride-2 convolutions in the trunk
  int max_channels_mult = 8;

  auto operator<=>(const DiscriminatorConfig&) const = default;
};

struct ModelConfig {
  GeneratorConfig generator;
  DiscriminatorConfig discriminator;

  /// Throws ShapeError when the resolution cannot be processed by either
  /// network.
  void validate() const;

  auto operator<=>(const ModelConfig&) const = default;
};

/// How many leading encoder blocks and trailing decoder blocks are
/// group-specific. Everything in between (plus CAM and the AdaLIN MLP) is
/// shared.
struct SplitConfig {
  int enc_specific = 3;
  int dec_specific = 3;

  /// Entire downsampling stack / entire upsampling stack.
  static SplitConfig defaults_for(const GeneratorConfig& g) {
    return {1 + g.n_down, g.n_down + 1};
  }

  void validate(const GeneratorConfig& g) const;

  auto operator<=>(const SplitConfig&) const = default;
};

template <typename T>
struct BranchStack {
  std::vector<EncoderBlock<T>> encoder;
  std::vector<DecoderBlock<T>> decoder;
};

template <typename T>
struct SharedStack {
  std::vector<EncoderBlock<T>> encoder;
  CamHead<T> cam;
  AdaLinMlp<T> mlp;
  std::vector<DecoderBlock<T>> decoder;
};

template <typename T>
struct SharedOutput {
  Var<T> features;   // decoder-side features handed to the specific decoder
  Var<T> cam_logit;  // [2]
  Var<T> attention;  // [1, h, w]
  Var<T> gamma, beta;
};

template <typename T>
struct Translation {
  Var<T> image;      // [3, S, S] in [-1, 1]
  Var<T> cam_logit;  // [2]
  Var<T> attention;  // [1, h, w]
};

enum class Partition { kShared, kSpecific };

/// Location of a generator parameter inside the shared/specific partition.
struct ParamSite {
  Direction direction;
  Partition partition;
  GroupId group;  // meaningful for kSpecific only
};

/// Translator for one direction: shared core plus one specific
/// encoder/decoder branch per registered group.
template <typename T>
class BranchedGenerator {
 public:
  BranchedGenerator() = default;
  BranchedGenerator(const GeneratorConfig& config, const SplitConfig& split);

  const GeneratorConfig& config() const { return config_; }
  const SplitConfig& split() const { return split_; }
  int group_count() const { return static_cast<int>(branches_.size()); }

  BranchStack<T>& branch(GroupId g);
  const BranchStack<T>& branch(GroupId g) const;
  SharedStack<T>& shared() { return shared_; }

  /// Appends a value copy of the group-0 branch; returns the new group id.
  GroupId add_branch();

  /// Moves the shared/specific boundary. Only valid with a single branch.
  void resplit(const SplitConfig& split);

  Var<T> encode_specific(const Var<T>& x, GroupId g, bool live);
  SharedOutput<T> shared_forward(const Var<T>& f, bool live);
  Var<T> decode_specific(const SharedOutput<T>& s, GroupId g, bool live);

  /// Visits (local_name, Parameter&, partition, group). Names are
  /// "<partition>/<block>/<param>", e.g. "specific/g1/enc0/conv.weight" or
  /// "shared/enc3/conv1.weight".
  template <typename F>
  void visit(F&& f);

 private:
  void require_group(GroupId g) const;

  GeneratorConfig config_;
  SplitConfig split_;
  SharedStack<T> shared_;
  std::vector<BranchStack<T>> branches_;
};

template <typename T>
struct Judgement {
  Var<T> patch_logits;  // [1, h, w]
  Var<T> cam_logit;     // [2]
  Var<T> group_logits;  // [G]
};

/// Per-domain critic with a patch adversarial head, a CAM auxiliary head and a
/// group classification head.
template <typename T>
class Discriminator {
 public:
  Discriminator() = default;
  Discriminator(const DiscriminatorConfig& config, int image_size, int group_count);

  Judgement<T> forward(const Var<T>& x, bool live);

  int group_count() const { return cls_.out_features(); }
  int trunk_channels() const { return trunk_channels_; }
  /// Spatial side length of the patch logit map.
  int patch_size() const;

  /// Replaces the group head with a freshly initialized one of `group_count`
  /// outputs.
  void reset_group_head(int group_count, std::mt19937_64& rng, double init_std);

  template <typename F>
  void visit(F&& f) {
    for (std::size_t i = 0; i < trunk_.size(); ++i) {
      trunk_[i].visit("trunk" + std::to_string(i) + ".", f);
    }
    cam_.visit("cam.", f);
    adv_.visit("adv.", f);
    cls_.visit("cls.", f);
  }

 private:
  DiscriminatorConfig config_;
  int image_size_ = 0;
  int trunk_channels_ = 0;
  std::vector<Conv2d<T>> trunk_;
  CamHead<T> cam_;
  Conv2d<T> adv_;
  Linear<T> cls_;
};

/// Frozen stand-in for a pretrained face recognizer: a small seeded conv
/// encoder followed by L2 normalization. Its parameters never receive
/// gradients.
template <typename T>
class FaceEmbedder {
 public:
  static constexpr std::uint64_t kDefaultSeed = 0x5EEDFACEULL;
  static constexpr int kEmbeddingDim = 32;

  explicit FaceEmbedder(std::uint64_t seed = kDefaultSeed);

  /// Unit-norm embedding; gradients flow to `x` only.
  Var<T> embed(const Var<T>& x) const;

  template <typename F>
  void visit(F&& f) const {
    auto* self = const_cast<FaceEmbedder*>(this);
    self->conv1_.visit("conv1.", f);
    self->conv2_.visit("conv2.", f);
    self->fc_.visit("fc.", f);
  }

 private:
  mutable Conv2d<T> conv1_, conv2_;
  mutable Linear<T> fc_;
};

/// Both translation directions plus both domain discriminators.
template <typename T>
struct TranslationModel {
  ModelConfig config;
  std::array<BranchedGenerator<T>, 2> generators;  // indexed by Direction
  std::array<Discriminator<T>, 2> discriminators;  // indexed by Domain

  TranslationModel() = default;
  TranslationModel(const ModelConfig& cfg, const SplitConfig& split, int disc_groups = 1);

  int group_count() const { return generators[0].group_count(); }
  const SplitConfig& split() const { return generators[0].split(); }

  BranchedGenerator<T>& generator(Direction d) { return generators[index(d)]; }
  Discriminator<T>& discriminator(Domain d) { return discriminators[index(d)]; }

  /// Visits every generator parameter with its full name
  /// ("gen/r2c/specific/g1/enc0/conv.weight") and partition site.
  template <typename F>
  void visit_generator(F&& f) {
    for (Direction d : kDirections) {
      const std::string prefix = "gen/" + std::string(short_name(d)) + "/";
      generator(d).visit([&](const std::string& name, Parameter<T>& p, Partition part,
                             GroupId g) { f(prefix + name, p, ParamSite{d, part, g}); });
    }
  }

  /// Visits every discriminator parameter ("dis/cartoon/trunk0.weight").
  template <typename F>
  void visit_discriminator(F&& f) {
    for (Domain d : kDomains) {
      const std::string prefix = "dis/" + std::string(to_string(d)) + "/";
      discriminator(d).visit([&](const std::string& name, Parameter<T>& p) {
        f(prefix + name, p, d);
      });
    }
  }

  /// Visits every parameter of the model with its full name.
  template <typename F>
  void visit_all(F&& f) {
    visit_generator([&](const std::string& n, Parameter<T>& p, const ParamSite&) { f(n, p); });
    visit_discriminator([&](const std::string& n, Parameter<T>& p, Domain) { f(n, p); });
  }

  template <typename U>
  TranslationModel<U> cast() const;
};

enum class ForwardMode {
  kInference,  // no parameter is live; no graph is recorded
  kTrain,      // specific parameters live; shared ones live unless detached
};

// ---- the operations ----------------------------------------------------------

void check_image_shape(const Shape& shape, int image_size);

/// Group-specific encoder head. Gradients reach that group's parameters only.
template <typename T>
Var<T> encode_specific(TranslationModel<T>& model, const Var<T>& x, GroupId group,
                       Direction dir, ForwardMode mode = ForwardMode::kTrain);

/// Shared core (residual stack, CAM, AdaLIN MLP, AdaLIN decoder stack). With
/// `detach` set the forward values are unchanged but no shared parameter
/// receives gradient; gradient still flows through to `f`.
template <typename T>
SharedOutput<T> shared_forward(TranslationModel<T>& model, const Var<T>& f, Direction dir,
                               bool detach, ForwardMode mode = ForwardMode::kTrain);

template <typename T>
Var<T> decode_specific(TranslationModel<T>& model, const SharedOutput<T>& s, GroupId group,
                       Direction dir, ForwardMode mode = ForwardMode::kTrain);

/// Full composition. In training mode the shared core is detached iff
/// `detach_shared` is true (the caller's detach policy decides).
template <typename T>
Translation<T> translate(TranslationModel<T>& model, const Var<T>& x, GroupId group,
                         Direction dir, ForwardMode mode, bool detach_shared);

/// Inference-only convenience.
template <typename T>
Translation<T> translate(const TranslationModel<T>& model, const Tensor<T>& x, GroupId group,
                         Direction dir);

template <typename T>
Judgement<T> discriminate(TranslationModel<T>& model, const Var<T>& x, Domain domain, bool live);

// ---- implementation ----------------------------------------------------------

template <typename T>
template <typename F>
void BranchedGenerator<T>::visit(F&& f) {
  const int n_shared_enc = static_cast<int>(shared_.encoder.size());
  for (std::size_t g = 0; g < branches_.size(); ++g) {
    const GroupId gid(static_cast<int>(g));
    const std::string prefix = "specific/g" + std::to_string(g) + "/";
    auto& br = branches_[g];
    for (std::size_t i = 0; i < br.encoder.size(); ++i) {
      visit_block(br.encoder[i], prefix + "enc" + std::to_string(i) + "/",
                  [&](const std::string& n, Parameter<T>& p) {
                    f(n, p, Partition::kSpecific, gid);
                  });
    }
  }
  auto shared_cb = [&](const std::string& n, Parameter<T>& p) {
    f(n, p, Partition::kShared, GroupId(0));
  };
  const int enc_offset = static_cast<int>(branches_.empty() ? 0 : branches_[0].encoder.size());
  for (int i = 0; i < n_shared_enc; ++i) {
    visit_block(shared_.encoder[i], "shared/enc" + std::to_string(enc_offset + i) + "/",
                shared_cb);
  }
  shared_.cam.visit("shared/cam/", shared_cb);
  shared_.mlp.visit("shared/mlp/", shared_cb);
  const int n_shared_dec = static_cast<int>(shared_.decoder.size());
  for (int i = 0; i < n_shared_dec; ++i) {
    visit_block(shared_.decoder[i], "shared/dec" + std::to_string(i) + "/", shared_cb);
  }
  for (std::size_t g = 0; g < branches_.size(); ++g) {
    const GroupId gid(static_cast<int>(g));
    const std::string prefix = "specific/g" + std::to_string(g) + "/";
    auto& br = branches_[g];
    for (std::size_t i = 0; i < br.decoder.size(); ++i) {
      visit_block(br.decoder[i], prefix + "dec" + std::to_string(n_shared_dec + i) + "/",
                  [&](const std::string& n, Parameter<T>& p) {
                    f(n, p, Partition::kSpecific, gid);
                  });
    }
  }
}

template <typename T>
template <typename U>
TranslationModel<U> TranslationModel<T>::cast() const {
  TranslationModel<U> out(config, split(), discriminators[0].group_count());
  for (int g = 1; g < group_count(); ++g) {
    out.generator(Direction::kRealToCartoon).add_branch();
    out.generator(Direction::kCartoonToReal).add_branch();
  }
  std::vector<const Parameter<T>*> src;
  const_cast<TranslationModel*>(this)->visit_all(
      [&](const std::string&, Parameter<T>& p) { src.push_back(&p); });
  std::size_t i = 0;
  out.visit_all([&](const std::string&, Parameter<U>& p) {
    p.value = src.at(i++)->value.template cast<U>();
    p.grad = Tensor<U>(p.value.shape);
  });
  return out;
}

extern template class BranchedGenerator<float>;
extern template class BranchedGenerator<double>;
extern template class Discriminator<float>;
extern template class Discriminator<double>;
extern template class FaceEmbedder<float>;
extern template class FaceEmbedder<double>;

}  // namespace fsct
