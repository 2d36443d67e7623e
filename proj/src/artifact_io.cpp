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

#include "fsct/artifact_io.hpp"

#include <zlib.h>

#include <algorithm>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <map>

#include "fsct/branch.hpp"

namespace fsct {

namespace {

constexpr char kMagic[8] = {'F', 'S', 'C', 'T', 'C', 'K', 'P', 'T'};

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  template <typename U>
  void le(U v) {
    for (std::size_t i = 0; i < sizeof(U); ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f32(float f) {
    std::uint32_t u;
    std::memcpy(&u, &f, 4);
    le(u);
  }
  std::vector<std::uint8_t>& data() { return out_; }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}

  std::span<const std::uint8_t> take(std::size_t n) {
    if (n > in_.size() - pos_) {
      throw Error(ErrorCode::kIntegrity, "checkpoint truncated at byte " + std::to_string(pos_));
    }
    auto s = in_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  template <typename U>
  U le() {
    auto s = take(sizeof(U));
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(static_cast<U>(s[i]) << (8 * i));
    return v;
  }
  std::size_t remaining() const { return in_.size() - pos_; }

 private:
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

std::uint32_t crc(std::span<const std::uint8_t> data) {
  uLong c = crc32(0L, Z_NULL, 0);
  std::size_t off = 0;
  while (off < data.size()) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(data.size() - off, 1u << 30));
    c = crc32(c, data.data() + off, chunk);
    off += chunk;
  }
  return static_cast<std::uint32_t>(c);
}

struct Blob {
  Shape shape;
  std::vector<float> values;
};

TranslationModel<float> build_model(const CheckpointMeta& m) {
  TranslationModel<float> model(m.arch, m.split, m.disc_groups);
  for (std::size_t g = 1; g < m.group_ids.size(); ++g) {
    for (Direction d : kDirections) model.generator(d).add_branch();
  }
  return model;
}

}  // namespace

Json to_json(const CheckpointMeta& m) {
  Json j;
  j["format_version"] = m.format_version;
  j["kind"] = m.kind;
  j["group_ids"] = m.group_ids;
  j["split"] = to_json(m.split);
  j["arch"] = to_json(m.arch);
  j["disc_groups"] = m.disc_groups;
  j["weights"] = to_json(m.weights);
  j["seed"] = m.seed;
  j["steps"] = m.steps;
  j["ablation"] = to_string(m.ablation);
  return j;
}

CheckpointMeta checkpoint_meta_from_json(const Json& j) {
  try {
    CheckpointMeta m;
    m.format_version = j.at("format_version").get<std::uint32_t>();
    m.kind = j.at("kind").get<std::string>();
    m.group_ids = j.at("group_ids").get<std::vector<int>>();
    m.arch = model_config_from_json(j.at("arch"));
    m.split = split_config_from_json(j.at("split"));
    m.disc_groups = j.at("disc_groups").get<int>();
    m.weights = loss_weights_from_json(j.at("weights"));
    m.seed = j.at("seed").get<std::uint64_t>();
    m.steps = j.at("steps").get<long>();
    m.ablation = parse_ablation(j.at("ablation").get<std::string>());
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kFormat, std::string("checkpoint manifest: ") + e.what());
  } catch (const Error& e) {
    throw Error(ErrorCode::kFormat, std::string("checkpoint manifest: ") + e.what());
  }
}

std::vector<std::uint8_t> encode_checkpoint(const TranslationModel<float>& model, CheckpointMeta meta) {
  // Enumeration needs mutable access; nothing is modified.
  auto& m = const_cast<TranslationModel<float>&>(model);
  meta.format_version = kCheckpointVersion;
  meta.arch = model.config;
  meta.split = model.split();
  meta.disc_groups = m.discriminator(Domain::kReal).group_count();
  meta.group_ids.clear();
  for (int g = 0; g < model.group_count(); ++g) meta.group_ids.push_back(g);

  Writer w;
  w.bytes(kMagic, sizeof kMagic);
  w.le<std::uint32_t>(meta.format_version);
  const std::string manifest = to_json(meta).dump();
  w.le<std::uint64_t>(manifest.size());
  w.bytes(manifest.data(), manifest.size());

  std::uint32_t count = 0;
  m.visit_all([&](const std::string&, Parameter<float>&) { ++count; });
  w.le<std::uint32_t>(count);
  m.visit_all([&](const std::string& name, Parameter<float>& p) {
    w.le<std::uint32_t>(static_cast<std::uint32_t>(name.size()));
    w.bytes(name.data(), name.size());
    w.le<std::uint32_t>(static_cast<std::uint32_t>(p.value.rank()));
    for (int d : p.value.shape) w.le<std::uint32_t>(static_cast<std::uint32_t>(d));
    w.le<std::uint64_t>(p.value.size() * 4);
    for (float v : p.value.data) w.f32(v);
  });
  const std::uint32_t c = crc(w.data());
  w.le<std::uint32_t>(c);
  return std::move(w.data());
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < sizeof kMagic + 4 || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) {
    throw Error(ErrorCode::kFormat, "not a checkpoint file (bad magic)");
  }
  Reader r(bytes.subspan(sizeof kMagic));
  const auto version = r.le<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw Error(ErrorCode::kVersion, "checkpoint format version " + std::to_string(version) +
                                         " is not supported (expected " +
                                         std::to_string(kCheckpointVersion) + ")");
  }
  if (bytes.size() < sizeof kMagic + 8) throw Error(ErrorCode::kIntegrity, "checkpoint truncated");
  const auto body = bytes.first(bytes.size() - 4);
  Reader tail(bytes.last(4));
  if (crc(body) != tail.le<std::uint32_t>()) {
    throw Error(ErrorCode::kIntegrity, "checkpoint checksum mismatch");
  }

  Reader in(body.subspan(sizeof kMagic + 4));
  const auto manifest_len = in.le<std::uint64_t>();
  if (manifest_len > in.remaining()) throw Error(ErrorCode::kIntegrity, "manifest length exceeds file");
  const auto manifest_bytes = in.take(static_cast<std::size_t>(manifest_len));
  Json manifest;
  try {
    manifest = Json::parse(manifest_bytes.begin(), manifest_bytes.end());
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kFormat, std::string("checkpoint manifest: ") + e.what());
  }
  CheckpointMeta meta = checkpoint_meta_from_json(manifest);

  std::map<std::string, Blob> blobs;
  const auto count = in.le<std::uint32_t>();
  for (std::uint32_t b = 0; b < count; ++b) {
    const auto name_len = in.le<std::uint32_t>();
    const auto name_bytes = in.take(name_len);
    std::string name(name_bytes.begin(), name_bytes.end());
    const auto rank = in.le<std::uint32_t>();
    if (rank > 8) throw Error(ErrorCode::kIntegrity, "blob '" + name + "' has implausible rank");
    Blob blob;
    std::uint64_t elems = 1;
    for (std::uint32_t i = 0; i < rank; ++i) {
      const auto d = in.le<std::uint32_t>();
      if (d > static_cast<std::uint32_t>(std::numeric_limits<int>::max())) {
        throw Error(ErrorCode::kIntegrity, "blob '" + name + "' has an implausible dimension");
      }
      blob.shape.push_back(static_cast<int>(d));
      elems *= d;
      if (elems > in.remaining()) {
        throw Error(ErrorCode::kIntegrity, "blob '" + name + "' is larger than the file");
      }
    }
    const auto payload = in.le<std::uint64_t>();
    if (payload != elems * 4 || payload > in.remaining()) {
      throw Error(ErrorCode::kIntegrity, "blob '" + name + "' payload length is inconsistent");
    }
    const auto data = in.take(static_cast<std::size_t>(payload));
    blob.values.resize(static_cast<std::size_t>(elems));
    for (std::size_t i = 0; i < blob.values.size(); ++i) {
      std::uint32_t u = 0;
      for (int k = 0; k < 4; ++k) u |= static_cast<std::uint32_t>(data[i * 4 + k]) << (8 * k);
      std::memcpy(&blob.values[i], &u, 4);
    }
    if (!blobs.emplace(std::move(name), std::move(blob)).second) {
      throw Error(ErrorCode::kFormat, "duplicate blob name in checkpoint");
    }
  }
  if (in.remaining() != 0) throw Error(ErrorCode::kIntegrity, "trailing bytes after the last blob");

  for (std::size_t i = 0; i < meta.group_ids.size(); ++i) {
    if (meta.group_ids[i] != static_cast<int>(i)) {
      throw Error(ErrorCode::kFormat, "checkpoint group ids must be dense from 0");
    }
  }
  if (meta.group_ids.empty()) throw Error(ErrorCode::kFormat, "checkpoint lists no groups");

  Checkpoint out;
  out.meta = meta;
  try {
    meta.arch.validate();
    meta.split.validate(meta.arch.generator);
    out.model = build_model(meta);
  } catch (const Error& e) {
    throw Error(ErrorCode::kFormat, std::string("checkpoint architecture: ") + e.what());
  }
  std::size_t matched = 0;
  out.model.visit_all([&](const std::string& name, Parameter<float>& p) {
    auto it = blobs.find(name);
    if (it == blobs.end()) throw Error(ErrorCode::kFormat, "checkpoint is missing parameter '" + name + "'");
    if (it->second.shape != p.value.shape) {
      throw Error(ErrorCode::kFormat, "parameter '" + name + "' has shape " +
                                          shape_str(it->second.shape) + " in the checkpoint, expected " +
                                          shape_str(p.value.shape));
    }
    ++matched;
  });
  if (matched != blobs.size()) {
    throw Error(ErrorCode::kFormat, std::to_string(blobs.size() - matched) +
                                        " checkpoint blobs do not belong to the architecture");
  }
  // Every check passed; only now are values written.
  out.model.visit_all([&](const std::string& name, Parameter<float>& p) {
    p.value.data = std::move(blobs.at(name).values);
    p.zero_grad();
  });
  return out;
}

void save_checkpoint(const fs::path& path, const TranslationModel<float>& model,
                     const CheckpointMeta& meta, bool overwrite) {
  if (!overwrite && fs::exists(path)) {
    throw Error(ErrorCode::kExists, path.string() + " exists (use --force to overwrite)");
  }
  const std::vector<std::uint8_t> bytes = encode_checkpoint(model, meta);
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw Error(ErrorCode::kIo, "cannot write " + tmp.string());
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw Error(ErrorCode::kIo, "failed writing " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw Error(ErrorCode::kIo, "cannot move checkpoint into place at " + path.string());
  }
}

Checkpoint load_checkpoint(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::kIo, "cannot open checkpoint " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

Checkpoint graft_checkpoint(const Checkpoint& basic, int groups, const SplitConfig& split,
                            std::uint64_t seed, double init_std) {
  if (groups < 1) throw Error(ErrorCode::kInvalidArgument, "graft needs at least group 0");
  if (basic.model.group_count() != 1) {
    if (basic.model.group_count() == groups) return basic;
    throw Error(ErrorCode::kUnknownGroup,
                "checkpoint holds groups 0.." + std::to_string(basic.model.group_count() - 1) +
                    " but groups 0.." + std::to_string(groups - 1) + " were requested");
  }
  std::vector<GroupId> fresh;
  for (int g = 1; g < groups; ++g) fresh.emplace_back(g);
  std::mt19937_64 rng = graft_stream(seed);
  Checkpoint out;
  out.model = graft(basic.model, fresh, split, rng, init_std);
  out.meta = basic.meta;
  out.meta.kind = "fewshot";
  out.meta.seed = seed;
  out.meta.steps = 0;
  out.meta.split = out.model.split();
  out.meta.disc_groups = out.model.discriminator(Domain::kReal).group_count();
  out.meta.group_ids.clear();
  for (int g = 0; g < groups; ++g) out.meta.group_ids.push_back(g);
  return out;
}

Image heatmap_image(const Tensor<float>& attention, int width, int height) {
  if (attention.rank() != 3 || attention.dim(0) != 1) {
    throw ShapeError("heatmap: expected a [1, h, w] map, got " + shape_str(attention.shape));
  }
  const int h = attention.dim(1), w = attention.dim(2);
  const auto [lo_it, hi_it] = std::minmax_element(attention.data.begin(), attention.data.end());
  const double lo = *lo_it, hi = *hi_it;
  Image small(w, h, 1);
  for (std::size_t i = 0; i < attention.size(); ++i) {
    small.pixels[i] = hi > lo ? static_cast<std::uint8_t>(std::lround((attention[i] - lo) / (hi - lo) * 255.0))
                              : std::uint8_t{128};
  }
  Image up = resize_nearest(small, width, height);
  Image rgb(width, height, 3);
  for (std::size_t i = 0; i < up.pixels.size(); ++i) {
    std::fill_n(rgb.pixels.begin() + static_cast<std::ptrdiff_t>(i * 3), 3, up.pixels[i]);
  }
  return rgb;
}

std::vector<AttentionPanel> export_attention(const TranslationModel<float>& model,
                                             const std::vector<Image>& images, GroupId group,
                                             Direction dir, const fs::path& out_dir, bool overwrite) {
  if (group.value < 0 || group.value >= model.group_count()) {
    throw RegistryError("group " + std::to_string(group.value) + " is not registered in the model");
  }
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot create " + out_dir.string() + ": " + ec.message());
  auto panel_path = [&](std::size_t n) {
    char name[48];
    std::snprintf(name, sizeof name, "attention_%04zu.png", n);
    return out_dir / name;
  };
  for (std::size_t n = 0; n < images.size(); ++n) {
    if (!overwrite && fs::exists(panel_path(n))) {
      throw Error(ErrorCode::kExists, panel_path(n).string() + " exists (use --force to overwrite)");
    }
  }
  const int s = model.config.generator.image_size;
  std::vector<AttentionPanel> out;
  for (std::size_t n = 0; n < images.size(); ++n) {
    const Image src = (images[n].width == s && images[n].height == s) ? images[n]
                                                                      : resize_bilinear(images[n], s, s);
    const Tensor<float> x = to_tensor(src);
    Translation<float> fwd = translate(model, x, group, dir);
    Translation<float> back = translate(model, fwd.image->value(), group, reverse(dir));
    const Image columns[5] = {src, heatmap_image(fwd.attention->value(), s, s),
                              from_tensor(fwd.image->value()),
                              heatmap_image(back.attention->value(), s, s),
                              from_tensor(back.image->value())};
    AttentionPanel panel;
    panel.image = Image(5 * s, s, 3);
    for (int c = 0; c < 5; ++c) {
      for (int y = 0; y < s; ++y) {
        std::memcpy(panel.image.at(c * s, y), columns[c].at(0, y), static_cast<std::size_t>(s) * 3);
      }
    }
    panel.path = panel_path(n);
    write_png(panel.path, panel.image);
    out.push_back(std::move(panel));
  }
  return out;
}

}  // namespace fsct
