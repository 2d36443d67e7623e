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

#include <algorithm>
#include <cmath>
#include <map>
#include <string>

#include "fsct/data.hpp"
#include "fsct/error.hpp"

namespace fsct {

const GroupFiles& DatasetManifest::files(GroupId g) const {
  if (g.value < 0 || g.value >= group_count()) {
    throw RegistryError("group " + std::to_string(g.value) + " is not in the dataset (" +
                        std::to_string(group_count()) + " groups)");
  }
  return groups[static_cast<std::size_t>(g.value)];
}

namespace {

std::optional<int> parse_group_dir(const std::string& name) {
  constexpr std::string_view prefix = "group";
  if (name.size() <= prefix.size() || name.compare(0, prefix.size(), prefix) != 0) {
    return std::nullopt;
  }
  int v = 0;
  for (std::size_t i = prefix.size(); i < name.size(); ++i) {
    if (name[i] < '0' || name[i] > '9') return std::nullopt;
    v = v * 10 + (name[i] - '0');
    if (v > 1'000'000) return std::nullopt;
  }
  return v;
}

std::vector<fs::path> list_images(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw DataError(dir.string(), "missing domain directory");
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && is_image_file(e.path())) out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  if (out.empty()) throw DataError(dir.string(), "no PNG or JPEG images");
  return out;
}

}  // namespace

DatasetManifest load_manifest(const fs::path& root) {
  if (!fs::is_directory(root)) throw DataError(root.string(), "dataset root is not a directory");
  std::map<int, fs::path> dirs;
  for (const auto& e : fs::directory_iterator(root)) {
    if (!e.is_directory()) continue;
    if (auto id = parse_group_dir(e.path().filename().string())) dirs[*id] = e.path();
  }
  if (dirs.empty()) throw DataError(root.string(), "no group<k> directories");
  DatasetManifest m;
  m.root = root;
  int expected = 0;
  for (const auto& [id, dir] : dirs) {
    if (id != expected) {
      throw DataError((root / ("group" + std::to_string(expected))).string(),
                      "group ids must be dense from 0; missing group directory");
    }
    ++expected;
    GroupFiles g;
    g.group = GroupId(id);
    g.real = list_images(dir / "real");
    g.cartoon = list_images(dir / "cartoon");
    for (const auto* list : {&g.real, &g.cartoon}) {
      for (const auto& p : *list) (void)read_image(p);
    }
    m.groups.push_back(std::move(g));
  }
  return m;
}

void AugmentConfig::validate() const {
  if (crop < 1 || resize < 1) throw Error(ErrorCode::kInvalidArgument, "augment: sizes must be positive");
  if (crop > resize) {
    throw Error(ErrorCode::kInvalidArgument, "augment: crop " + std::to_string(crop) +
                                                 " exceeds resize " + std::to_string(resize));
  }
  if (!(flip_prob >= 0.0 && flip_prob <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "augment: flip probability outside [0, 1]");
  }
}

Tensor<float> augment(const Image& image, const AugmentConfig& config, std::mt19937_64& rng,
                      std::optional<bool> force_flip) {
  config.validate();
  if (image.channels != 3) {
    throw Error(ErrorCode::kInvalidArgument,
                "augment: expected an RGB image, got " + std::to_string(image.channels) + " channels");
  }
  const Image resized = (image.width == config.resize && image.height == config.resize)
                            ? image
                            : resize_bilinear(image, config.resize, config.resize);
  std::uniform_int_distribution<int> offset(0, config.resize - config.crop);
  const int ox = offset(rng);
  const int oy = offset(rng);
  // The flip draw is always consumed so the stream does not depend on force_flip.
  const bool drawn = std::uniform_real_distribution<double>(0.0, 1.0)(rng) < config.flip_prob;
  const bool flip = force_flip.value_or(drawn);

  const int n = config.crop;
  Tensor<float> t({3, n, n});
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      const int sx = ox + (flip ? n - 1 - x : x);
      const std::uint8_t* px = resized.at(sx, oy + y);
      for (int c = 0; c < 3; ++c) {
        t[(static_cast<std::size_t>(c) * n + y) * n + x] = static_cast<float>(px[c]) / 127.5f - 1.0f;
      }
    }
  }
  return t;
}

Dataset::Dataset(DatasetManifest manifest) : manifest_(std::move(manifest)) {
  for (const auto& g : manifest_.groups) {
    std::array<std::vector<Image>, 2> imgs;
    for (Domain d : kDomains) {
      for (const auto& p : g.of(d)) imgs[index(d)].push_back(read_image(p));
    }
    images_.push_back(std::move(imgs));
  }
}

const std::vector<Image>& Dataset::images(GroupId g, Domain d) const {
  (void)manifest_.files(g);
  return images_[static_cast<std::size_t>(g.value)][index(d)];
}

std::vector<SampleIndices> sample_indices(const DatasetManifest& manifest, std::mt19937_64& rng,
                                          std::span<const GroupId> active_groups) {
  std::vector<SampleIndices> out;
  for (GroupId g : active_groups) {
    const GroupFiles& f = manifest.files(g);
    SampleIndices s;
    s.group = g;
    s.real = std::uniform_int_distribution<std::size_t>(0, f.real.size() - 1)(rng);
    s.cartoon = std::uniform_int_distribution<std::size_t>(0, f.cartoon.size() - 1)(rng);
    out.push_back(s);
  }
  return out;
}

TrainBatch sample_batch(const Dataset& data, std::mt19937_64& rng,
                        std::span<const GroupId> active_groups, const AugmentConfig& augment_cfg) {
  TrainBatch batch;
  for (const SampleIndices& s : sample_indices(data.manifest(), rng, active_groups)) {
    GroupSample gs;
    gs.group = s.group;
    gs.real_index = s.real;
    gs.cartoon_index = s.cartoon;
    gs.real = augment(data.images(s.group, Domain::kReal)[s.real], augment_cfg, rng);
    gs.cartoon = augment(data.images(s.group, Domain::kCartoon)[s.cartoon], augment_cfg, rng);
    batch.samples.push_back(std::move(gs));
  }
  return batch;
}

// ---------------------------------------------------------------------------
// Synthetic faces

double synthetic_group_hue(int group, int group_count) {
  return 90.0 + 240.0 * (group + 0.5) / group_count;
}

namespace {

struct Rgb {
  double r, g, b;
};

Rgb hsv(double h, double s, double v) {
  h = std::fmod(std::fmod(h, 360.0) + 360.0, 360.0) / 60.0;
  const int i = static_cast<int>(h);
  const double f = h - i, p = v * (1 - s), q = v * (1 - s * f), t = v * (1 - s * (1 - f));
  switch (i) {
    case 0: return {v, t, p};
    case 1: return {q, v, p};
    case 2: return {p, v, t};
    case 3: return {p, q, v};
    case 4: return {t, p, v};
    default: return {v, p, q};
  }
}

struct FaceLayout {
  double cx, cy, rx, ry;  // face ellipse
  double hair_hue;
  double skin_hue, skin_val;
  double eye_dy, eye_dx, eye_r;
  double mouth_w;
};

FaceLayout random_layout(int group, int groups, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  FaceLayout f{};
  f.cx = 0.5 + 0.04 * u(rng);
  f.cy = 0.55 + 0.04 * u(rng);
  f.rx = 0.26 + 0.03 * u(rng);
  f.ry = 0.32 + 0.03 * u(rng);
  f.hair_hue = synthetic_group_hue(group, groups) + 8.0 * u(rng);
  f.skin_hue = 25.0 + 6.0 * u(rng);
  f.skin_val = 0.8 + 0.1 * u(rng);
  f.eye_dy = 0.08 + 0.02 * u(rng);
  f.eye_dx = 0.1 + 0.015 * u(rng);
  f.eye_r = 0.035 + 0.01 * u(rng);
  f.mouth_w = 0.1 + 0.03 * u(rng);
  return f;
}

enum class Region { kBackground, kHair, kFace, kEye, kMouth };

Region classify(const FaceLayout& f, double x, double y, double* edge) {
  const double fx = (x - f.cx) / f.rx, fy = (y - f.cy) / f.ry;
  const double face_d = fx * fx + fy * fy;
  const double hx = (x - f.cx) / (f.rx * 1.25), hy = (y - (f.cy - 0.06)) / (f.ry * 1.2);
  const double hair_d = hx * hx + hy * hy;
  *edge = 1e9;
  if (face_d <= 1.0) {
    *edge = std::abs(1.0 - face_d);
    for (double side : {-1.0, 1.0}) {
      const double ex = x - (f.cx + side * f.eye_dx), ey = y - (f.cy - f.eye_dy);
      const double ed = std::sqrt(ex * ex + ey * ey) / f.eye_r;
      if (ed <= 1.0) {
        *edge = std::abs(1.0 - ed);
        return Region::kEye;
      }
    }
    const double mx = (x - f.cx) / f.mouth_w, my = (y - (f.cy + 0.14)) / 0.025;
    const double md = mx * mx + my * my;
    if (md <= 1.0) {
      *edge = std::abs(1.0 - md);
      return Region::kMouth;
    }
    // Fringe: the upper part of the face ellipse is covered by hair.
    if (y < f.cy - f.ry * 0.55) return Region::kHair;
    return Region::kFace;
  }
  if (hair_d <= 1.0 && y < f.cy + f.ry * 0.35) {
    *edge = std::min(std::abs(1.0 - hair_d), std::abs(face_d - 1.0));
    return Region::kHair;
  }
  return Region::kBackground;
}

Rgb region_color(const FaceLayout& f, Region r) {
  switch (r) {
    case Region::kHair: return hsv(f.hair_hue, 0.85, 0.8);
    case Region::kFace: return hsv(f.skin_hue, 0.35, f.skin_val);
    case Region::kEye: return {0.12, 0.1, 0.1};
    case Region::kMouth: return hsv(355.0, 0.6, 0.65);
    case Region::kBackground: break;
  }
  return {0.82, 0.82, 0.8};
}

std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::lround(v * 255.0), 0L, 255L));
}

Image draw_face(const FaceLayout& f, int size, bool cartoon, std::mt19937_64& rng) {
  Image img(size, size, 3);
  std::normal_distribution<double> noise(0.0, 0.04);
  const double outline = 4.0 / size;
  for (int py = 0; py < size; ++py) {
    for (int px = 0; px < size; ++px) {
      const double x = (px + 0.5) / size, y = (py + 0.5) / size;
      double edge = 0.0;
      const Region r = classify(f, x, y, &edge);
      Rgb c = region_color(f, r);
      if (cartoon) {
        if (r != Region::kBackground && edge < outline) c = {0.08, 0.06, 0.06};
      } else {
        // Soft directional shading plus per-pixel texture.
        const double shade = 1.0 - 0.25 * (x - f.cx) - 0.15 * (y - f.cy);
        const double n = noise(rng);
        c = {c.r * shade + n, c.g * shade + n, c.b * shade + n};
      }
      std::uint8_t* out = img.at(px, py);
      out[0] = to_byte(c.r);
      out[1] = to_byte(c.g);
      out[2] = to_byte(c.b);
    }
  }
  return img;
}

}  // namespace

DatasetManifest generate_synthetic(const fs::path& root, const SyntheticSpec& spec) {
  if (spec.groups < 1 || spec.per_group < 1 || spec.size < 8) {
    throw Error(ErrorCode::kInvalidArgument,
                "synthetic data needs groups >= 1, per_group >= 1 and size >= 8");
  }
  std::mt19937_64 rng(spec.seed);
  for (int g = 0; g < spec.groups; ++g) {
    for (Domain d : kDomains) {
      const fs::path dir = root / ("group" + std::to_string(g)) / to_string(d);
      std::error_code ec;
      fs::create_directories(dir, ec);
      if (ec) throw Error(ErrorCode::kIo, "cannot create " + dir.string() + ": " + ec.message());
      for (int i = 0; i < spec.per_group; ++i) {
        const FaceLayout layout = random_layout(g, spec.groups, rng);
        char name[32];
        std::snprintf(name, sizeof name, "%04d.png", i);
        write_png(dir / name, draw_face(layout, spec.size, d == Domain::kCartoon, rng));
      }
    }
  }
  return load_manifest(root);
}

}  // namespace fsct
