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

// Single-file checkpoints and attention panel export.
//
// Checkpoint layout (all integers little-endian):
//   "FSCTCKPT"                      8-byte magic
//   u32 format version
//   u64 manifest length, manifest   JSON text
//   u32 blob count
//   per blob: u32 name length, name, u32 rank, u32 dims[rank],
//             u64 payload bytes, f32 payload[]
//   u32 CRC-32 of every preceding byte

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "fsct/config.hpp"
#include "fsct/data.hpp"
#include "fsct/model.hpp"
#include "fsct/trainer.hpp"

namespace fsct {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointMeta {
  std::uint32_t format_version = kCheckpointVersion;
  std::string kind = "basic";  // "basic" (single branch) or "fewshot"
  std::vector<int> group_ids;  // filled from the model on save
  ModelConfig arch;            // filled from the model on save
  SplitConfig split;           // filled from the model on save
  int disc_groups = 1;         // filled from the model on save
  LossWeights weights;
  std::uint64_t seed = 0;
  long steps = 0;
  AblationMode ablation = AblationMode::kDefault;
};

Json to_json(const CheckpointMeta& m);
CheckpointMeta checkpoint_meta_from_json(const Json& j);

struct Checkpoint {
  CheckpointMeta meta;
  TranslationModel<float> model;
};

/// Serializes every generator and discriminator parameter. Architecture
/// fields of `meta` are overwritten from the model.
std::vector<std::uint8_t> encode_checkpoint(const TranslationModel<float>& model, CheckpointMeta meta);

/// Parses and validates a whole archive before building the model: version
/// mismatch -> kVersion, truncation or checksum failure -> kIntegrity,
/// missing, duplicate, orphan or mis-shaped blobs -> kFormat.
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);

/// Writes through a temporary file and a rename. Refuses to replace an
/// existing file unless `overwrite` is set (kExists).
void save_checkpoint(const fs::path& path, const TranslationModel<float>& model,
                     const CheckpointMeta& meta, bool overwrite);
Checkpoint load_checkpoint(const fs::path& path);

/// Grafts a single-branch checkpoint onto groups 0..G-1 with the same random
/// stream a stage-2 run seeded with `seed` uses. A checkpoint that already
/// holds exactly groups 0..G-1 is returned unchanged; any other group set
/// is rejected with kUnknownGroup.
Checkpoint graft_checkpoint(const Checkpoint& basic, int groups, const SplitConfig& split,
                            std::uint64_t seed, double init_std);

/// Min-max normalizes an attention map to 0..255 (a constant map becomes
/// 128) and nearest-upsamples it to width x height as a gray RGB image.
Image heatmap_image(const Tensor<float>& attention, int width, int height);

struct AttentionPanel {
  fs::path path;
  Image image;  // 5 * W x H: source, heatmap, translation, back heatmap, reconstruction
};

/// For each image: translate along `dir`, translate back, and write a
/// five-column panel. Inputs are resized to the model resolution.
std::vector<AttentionPanel> export_attention(const TranslationModel<float>& model,
                                             const std::vector<Image>& images, GroupId group,
                                             Direction dir, const fs::path& out_dir, bool overwrite);

}  // namespace fsct
