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

#include "fsct/model.hpp"

#include <algorithm>

namespace fsct {

namespace {

template <typename T>
std::vector<EncoderBlock<T>> make_encoder(const GeneratorConfig& cfg) {
  std::vector<EncoderBlock<T>> blocks;
  blocks.emplace_back(InputBlock<T>(3, cfg.channels));
  for (int i = 0; i < cfg.n_down; ++i) {
    blocks.emplace_back(DownBlock<T>(cfg.channels << i, cfg.channels << (i + 1)));
  }
  const int c = cfg.feature_channels();
  for (int i = 0; i < cfg.n_hourglass; ++i) blocks.emplace_back(HourglassBlock<T>(c));
  for (int i = 0; i < cfg.n_res; ++i) blocks.emplace_back(ResBlock<T>(c));
  return blocks;
}

template <typename T>
std::vector<DecoderBlock<T>> make_decoder(const GeneratorConfig& cfg) {
  std::vector<DecoderBlock<T>> blocks;
  const int c = cfg.feature_channels();
  for (int i = 0; i < cfg.n_res; ++i) blocks.emplace_back(AdaResBlock<T>(c));
  for (int i = 0; i < cfg.n_down; ++i) blocks.emplace_back(UpBlock<T>(c >> i, c >> (i + 1)));
  blocks.emplace_back(OutputBlock<T>(cfg.channels));
  return blocks;
}

// Shape of the tensor entering encoder block `k` (k == encoder_blocks() gives
// the encoder output).
Shape encoder_input_shape(const GeneratorConfig& cfg, int k) {
  if (k == 0) return {3, cfg.image_size, cfg.image_size};
  const int downs = std::min(k - 1, cfg.n_down);
  return {cfg.channels << downs, cfg.image_size >> downs, cfg.image_size >> downs};
}

// Shape of the tensor entering decoder block `k`.
Shape decoder_input_shape(const GeneratorConfig& cfg, int k) {
  if (k == cfg.decoder_blocks()) return {3, cfg.image_size, cfg.image_size};
  const int ups = std::clamp(k - cfg.n_res, 0, cfg.n_down);
  return {cfg.feature_channels() >> ups, cfg.feature_size() << ups, cfg.feature_size() << ups};
}

void require_shape(const Shape& got, const Shape& want, const char* what) {
  if (got != want) {
    throw ShapeError(std::string(what) + ": expected " + shape_str(want) + ", got " +
                     shape_str(got));
  }
}

}  // namespace

void check_image_shape(const Shape& shape, int image_size) {
  require_shape(shape, {3, image_size, image_size}, "image");
}

void ModelConfig::validate() const {
  const auto& g = generator;
  const auto& d = discriminator;
  if (g.channels <= 0 || g.n_down < 0 || g.n_res < 0 || g.n_hourglass < 0) {
    throw ShapeError("generator configuration has negative or zero sizes");
  }
  if (d.channels <= 0 || d.n_layers < 1 || d.max_channels_mult < 1) {
    throw ShapeError("discriminator configuration has negative or zero sizes");
  }
  const int s = g.image_size;
  const int gen_factor = 1 << (g.n_down + (g.n_hourglass > 0 ? 1 : 0));
  if (s < 8 || s % gen_factor != 0 || (s / gen_factor) < 2) {
    throw ShapeError("image size " + std::to_string(s) + " is not divisible by the generator's " +
                     "downsampling factor " + std::to_string(gen_factor));
  }
  const int dis_factor = 1 << d.n_layers;
  if (s % dis_factor != 0 || s / dis_factor < 2) {
    throw ShapeError("image size " + std::to_string(s) + " too small for " +
                     std::to_string(d.n_layers) + " discriminator layers");
  }
}

void SplitConfig::validate(const GeneratorConfig& g) const {
  if (enc_specific < 0 || enc_specific > g.encoder_blocks() || dec_specific < 0 ||
      dec_specific > g.decoder_blocks()) {
    throw ShapeError("split (" + std::to_string(enc_specific) + ", " +
                     std::to_string(dec_specific) + ") outside the block range (" +
                     std::to_string(g.encoder_blocks()) + ", " +
                     std::to_string(g.decoder_blocks()) + ")");
  }
}

// ---- BranchedGenerator ---------------------------------------------------------

template <typename T>
BranchedGenerator<T>::BranchedGenerator(const GeneratorConfig& config, const SplitConfig& split)
    : config_(config) {
  const int c = config.feature_channels();
  const int fs = config.feature_size();
  shared_.cam = CamHead<T>(c, T(0));
  const bool pool = config.mlp_input == MlpInput::kPool;
  shared_.mlp = AdaLinMlp<T>(pool ? c : c * fs * fs, c, pool);
  branches_.resize(1);
  branches_[0].encoder = make_encoder<T>(config);
  branches_[0].decoder = make_decoder<T>(config);
  split_ = SplitConfig{config.encoder_blocks(), 0};
  resplit(split);
}

template <typename T>
void BranchedGenerator<T>::resplit(const SplitConfig& split) {
  if (branches_.size() != 1) {
    throw ContractError("resplit requires a single-branch generator");
  }
  split.validate(config_);
  auto& br = branches_[0];
  std::vector<EncoderBlock<T>> enc = std::move(br.encoder);
  enc.insert(enc.end(), std::make_move_iterator(shared_.encoder.begin()),
             std::make_move_iterator(shared_.encoder.end()));
  std::vector<DecoderBlock<T>> dec = std::move(shared_.decoder);
  dec.insert(dec.end(), std::make_move_iterator(br.decoder.begin()),
             std::make_move_iterator(br.decoder.end()));
  br.encoder.assign(std::make_move_iterator(enc.begin()),
                    std::make_move_iterator(enc.begin() + split.enc_specific));
  shared_.encoder.assign(std::make_move_iterator(enc.begin() + split.enc_specific),
                         std::make_move_iterator(enc.end()));
  const auto dec_shared = static_cast<std::ptrdiff_t>(dec.size()) - split.dec_specific;
  shared_.decoder.assign(std::make_move_iterator(dec.begin()),
                         std::make_move_iterator(dec.begin() + dec_shared));
  br.decoder.assign(std::make_move_iterator(dec.begin() + dec_shared),
                    std::make_move_iterator(dec.end()));
  split_ = split;
}

template <typename T>
void BranchedGenerator<T>::require_group(GroupId g) const {
  if (g.value < 0 || g.value >= group_count()) {
    throw RegistryError("group " + std::to_string(g.value) + " is not registered (model has " +
                        std::to_string(group_count()) + " groups)");
  }
}

template <typename T>
BranchStack<T>& BranchedGenerator<T>::branch(GroupId g) {
  require_group(g);
  return branches_[static_cast<std::size_t>(g.value)];
}

template <typename T>
const BranchStack<T>& BranchedGenerator<T>::branch(GroupId g) const {
  require_group(g);
  return branches_[static_cast<std::size_t>(g.value)];
}

template <typename T>
GroupId BranchedGenerator<T>::add_branch() {
  BranchStack<T> copy = branches_.at(0);
  auto reset = [](const std::string&, Parameter<T>& q) { q.zero_grad(); };
  for (auto& b : copy.encoder) visit_block(b, "", reset);
  for (auto& b : copy.decoder) visit_block(b, "", reset);
  branches_.push_back(std::move(copy));
  return GroupId(group_count() - 1);
}

template <typename T>
Var<T> BranchedGenerator<T>::encode_specific(const Var<T>& x, GroupId g, bool live) {
  auto& br = branch(g);
  require_shape(x->shape(), encoder_input_shape(config_, 0), "encode_specific input");
  Var<T> h = x;
  for (auto& b : br.encoder) h = forward_block(b, h, live);
  return h;
}

template <typename T>
SharedOutput<T> BranchedGenerator<T>::shared_forward(const Var<T>& f, bool live) {
  require_shape(f->shape(), encoder_input_shape(config_, split_.enc_specific),
                "shared_forward input");
  Var<T> h = f;
  for (auto& b : shared_.encoder) h = forward_block(b, h, live);
  CamResult<T> cam = shared_.cam.forward(h, live);
  auto [gamma, beta] = shared_.mlp.forward(cam.features, live);
  h = cam.features;
  for (auto& b : shared_.decoder) h = forward_block(b, h, gamma, beta, live);
  return {h, cam.logits, cam.heatmap, gamma, beta};
}

template <typename T>
Var<T> BranchedGenerator<T>::decode_specific(const SharedOutput<T>& s, GroupId g, bool live) {
  auto& br = branch(g);
  const int first = config_.decoder_blocks() - split_.dec_specific;
  require_shape(s.features->shape(), decoder_input_shape(config_, first),
                "decode_specific input");
  Var<T> h = s.features;
  for (auto& b : br.decoder) h = forward_block(b, h, s.gamma, s.beta, live);
  return h;
}

// ---- Discriminator -------------------------------------------------------------

template <typename T>
Discriminator<T>::Discriminator(const DiscriminatorConfig& config, int image_size,
                                int group_count)
    : config_(config), image_size_(image_size) {
  if (group_count < 1) throw ContractError("discriminator needs at least one group");
  int in = 3;
  int out = config.channels;
  for (int i = 0; i < config.n_layers; ++i) {
    trunk_.emplace_back(in, out, 4, 2, 1, true);
    in = out;
    out = std::min(out * 2, config.channels * config.max_channels_mult);
  }
  trunk_channels_ = in;
  cam_ = CamHead<T>(in, T(0.2));
  adv_ = Conv2d<T>(in, 1, 4, 1, 1, false);
  cls_ = Linear<T>(in, group_count, true);
}

template <typename T>
int Discriminator<T>::patch_size() const {
  return (image_size_ >> config_.n_layers) - 1;
}

template <typename T>
Judgement<T> Discriminator<T>::forward(const Var<T>& x, bool live) {
  check_image_shape(x->shape(), image_size_);
  Var<T> h = x;
  for (auto& conv : trunk_) h = ad::leaky_relu(conv.forward(h, live), T(0.2));
  Var<T> group_logits = cls_.forward(ad::global_avg_pool(h), live);
  CamResult<T> cam = cam_.forward(h, live);
  return {adv_.forward(cam.features, live), cam.logits, group_logits};
}

template <typename T>
void Discriminator<T>::reset_group_head(int group_count, std::mt19937_64& rng, double init_std) {
  if (group_count < 1) throw ContractError("discriminator needs at least one group");
  cls_ = Linear<T>(trunk_channels_, group_count, true);
  std::normal_distribution<double> dist(0.0, init_std);
  for (auto& w : cls_.weight.value.data) w = static_cast<T>(dist(rng));
}

// ---- FaceEmbedder --------------------------------------------------------------

template <typename T>
FaceEmbedder<T>::FaceEmbedder(std::uint64_t seed)
    : conv1_(3, 8, 3, 2, 1, true), conv2_(8, 16, 3, 2, 1, true), fc_(16, kEmbeddingDim, true) {
  std::mt19937_64 rng(seed);
  auto fill = [&](Parameter<T>& p, double stddev) {
    std::normal_distribution<double> dist(0.0, stddev);
    for (auto& v : p.value.data) v = static_cast<T>(dist(rng));
  };
  fill(conv1_.weight, std::sqrt(2.0 / 27.0));
  fill(conv1_.bias, 0.1);
  fill(conv2_.weight, std::sqrt(2.0 / 72.0));
  fill(conv2_.bias, 0.1);
  fill(fc_.weight, std::sqrt(1.0 / 16.0));
  fill(fc_.bias, 0.5);
}

template <typename T>
Var<T> FaceEmbedder<T>::embed(const Var<T>& x) const {
  Var<T> h = ad::relu(conv1_.forward(x, false));
  h = ad::relu(conv2_.forward(h, false));
  return ad::l2_normalize(fc_.forward(ad::global_avg_pool(h), false));
}

// ---- TranslationModel and free operations --------------------------------------

template <typename T>
TranslationModel<T>::TranslationModel(const ModelConfig& cfg, const SplitConfig& split,
                                      int disc_groups)
    : config(cfg) {
  cfg.validate();
  split.validate(cfg.generator);
  for (Direction d : kDirections) generators[index(d)] = BranchedGenerator<T>(cfg.generator, split);
  for (Domain d : kDomains) {
    discriminators[index(d)] =
        Discriminator<T>(cfg.discriminator, cfg.generator.image_size, disc_groups);
  }
}

template <typename T>
Var<T> encode_specific(TranslationModel<T>& model, const Var<T>& x, GroupId group, Direction dir,
                       ForwardMode mode) {
  return model.generator(dir).encode_specific(x, group, mode == ForwardMode::kTrain);
}

template <typename T>
SharedOutput<T> shared_forward(TranslationModel<T>& model, const Var<T>& f, Direction dir,
                               bool detach, ForwardMode mode) {
  return model.generator(dir).shared_forward(f, mode == ForwardMode::kTrain && !detach);
}

template <typename T>
Var<T> decode_specific(TranslationModel<T>& model, const SharedOutput<T>& s, GroupId group,
                       Direction dir, ForwardMode mode) {
  return model.generator(dir).decode_specific(s, group, mode == ForwardMode::kTrain);
}

template <typename T>
Translation<T> translate(TranslationModel<T>& model, const Var<T>& x, GroupId group,
                         Direction dir, ForwardMode mode, bool detach_shared) {
  Var<T> f = encode_specific(model, x, group, dir, mode);
  SharedOutput<T> s = shared_forward(model, f, dir, detach_shared, mode);
  return {decode_specific(model, s, group, dir, mode), s.cam_logit, s.attention};
}

template <typename T>
Translation<T> translate(const TranslationModel<T>& model, const Tensor<T>& x, GroupId group,
                         Direction dir) {
  // Inference never touches parameter state.
  auto& m = const_cast<TranslationModel<T>&>(model);
  return translate(m, ad::constant(x), group, dir, ForwardMode::kInference, true);
}

template <typename T>
Judgement<T> discriminate(TranslationModel<T>& model, const Var<T>& x, Domain domain,
                          bool live) {
  return model.discriminator(domain).forward(x, live);
}

#define FSCT_INSTANTIATE(T)                                                                   \
  template class BranchedGenerator<T>;                                                        \
  template class Discriminator<T>;                                                            \
  template class FaceEmbedder<T>;                                                             \
  template struct TranslationModel<T>;                                                        \
  template Var<T> encode_specific(TranslationModel<T>&, const Var<T>&, GroupId, Direction,    \
                                  ForwardMode);                                               \
  template SharedOutput<T> shared_forward(TranslationModel<T>&, const Var<T>&, Direction,     \
                                          bool, ForwardMode);                                 \
  template Var<T> decode_specific(TranslationModel<T>&, const SharedOutput<T>&, GroupId,      \
                                  Direction, ForwardMode);                                    \
  template Translation<T> translate(TranslationModel<T>&, const Var<T>&, GroupId, Direction,  \
                                    ForwardMode, bool);                                       \
  template Translation<T> translate(const TranslationModel<T>&, const Tensor<T>&, GroupId,    \
                                    Direction);                                               \
  template Judgement<T> discriminate(TranslationModel<T>&, const Var<T>&, Domain, bool);

FSCT_INSTANTIATE(float)
FSCT_INSTANTIATE(double)

#undef FSCT_INSTANTIATE

}  // namespace fsct
