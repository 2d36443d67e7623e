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
#include <filesystem>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "fsct/tensor.hpp"
#include "fsct/types.hpp"

namespace fsct {

namespace fs = std::filesystem;

/// 8-bit interleaved image.
struct Image {
  int width = 0;
  int height = 0;
  int channels = 3;
  std::vector<std::uint8_t> pixels;

  Image() = default;
  Image(int w, int h, int c = 3, std::uint8_t fill = 0)
      : width(w), height(h), channels(c),
        pixels(static_cast<std::size_t>(w) * h * c, fill) {}

  std::uint8_t* at(int x, int y) {
    return pixels.data() + (static_cast<std::size_t>(y) * width + x) * channels;
  }
  const std::uint8_t* at(int x, int y) const {
    return pixels.data() + (static_cast<std::size_t>(y) * width + x) * channels;
  }

  bool operator==(const Image&) const = default;
};

/// Decodes a PNG or JPEG file to 8-bit RGB: palette and gray images are
/// expanded, alpha is dropped, 16-bit samples are reduced to 8 bits. Throws
/// DataError on unreadable or unsupported files.
Image read_image(const fs::path& path);
void write_png(const fs::path& path, const Image& image);
void write_jpeg(const fs::path& path, const Image& image, int quality = 95);
bool is_image_file(const fs::path& path);

Image resize_bilinear(const Image& image, int width, int height);
Image resize_nearest(const Image& image, int width, int height);

/// [3, H, W] tensor with values v / 127.5 - 1.
Tensor<float> to_tensor(const Image& image);
/// Inverse of to_tensor with clamping to [-1, 1] and rounding.
Image from_tensor(const Tensor<float>& t);

struct GroupFiles {
  GroupId group;
  std::vector<fs::path> real;
  std::vector<fs::path> cartoon;

  const std::vector<fs::path>& of(Domain d) const { return d == Domain::kReal ? real : cartoon; }
};

/// Per-group unpaired file lists found under
///   <root>/group<k>/real/*.png|jpg
///   <root>/group<k>/cartoon/*.png|jpg
struct DatasetManifest {
  fs::path root;
  std::vector<GroupFiles> groups;  // ordered by group id, ids dense from 0

  int group_count() const { return static_cast<int>(groups.size()); }
  const GroupFiles& files(GroupId g) const;
};

DatasetManifest load_manifest(const fs::path& root);

struct AugmentConfig {
  int resize = 286;
  int crop = 256;
  double flip_prob = 0.5;

  void validate() const;
  auto operator<=>(const AugmentConfig&) const = default;
};

/// Resize to resize x resize, random crop to crop x crop, optional horizontal
/// flip, scale to [-1, 1]. `force_flip` overrides the random flip decision.
Tensor<float> augment(const Image& image, const AugmentConfig& config, std::mt19937_64& rng,
                      std::optional<bool> force_flip = std::nullopt);

/// Decoded images of a manifest, kept in memory.
class Dataset {
 public:
  explicit Dataset(DatasetManifest manifest);

  const DatasetManifest& manifest() const { return manifest_; }
  int group_count() const { return manifest_.group_count(); }
  const std::vector<Image>& images(GroupId g, Domain d) const;

 private:
  DatasetManifest manifest_;
  std::vector<std::array<std::vector<Image>, 2>> images_;
};

struct SampleIndices {
  GroupId group;
  std::size_t real = 0;
  std::size_t cartoon = 0;
};

/// One independent uniform (real, cartoon) index draw per active group.
std::vector<SampleIndices> sample_indices(const DatasetManifest& manifest, std::mt19937_64& rng,
                                          std::span<const GroupId> active_groups);

struct GroupSample {
  GroupId group;
  std::size_t real_index = 0;
  std::size_t cartoon_index = 0;
  Tensor<float> real;
  Tensor<float> cartoon;
};

/// Exactly one real and one cartoon image per active group.
struct TrainBatch {
  std::vector<GroupSample> samples;
};

TrainBatch sample_batch(const Dataset& data, std::mt19937_64& rng,
                        std::span<const GroupId> active_groups, const AugmentConfig& augment_cfg);

struct SyntheticSpec {
  int groups = 4;
  int per_group = 4;
  int size = 64;
  std::uint64_t seed = 0;
};

/// Hue (degrees) of the per-group trait painted into synthetic images.
double synthetic_group_hue(int group, int group_count);

/// Writes procedurally drawn faces under the dataset layout: textured
/// "real" faces and flat-shaded, outlined "cartoon" faces, both carrying a
/// group-specific hair hue.
DatasetManifest generate_synthetic(const fs::path& root, const SyntheticSpec& spec);

}  // namespace fsct
