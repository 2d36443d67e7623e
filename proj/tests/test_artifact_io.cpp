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
#include <cstring>
#include <fstream>
#include <iterator>
#include <random>
#include <string>
#include <vector>

#include "doctest.h"
#include "support.hpp"

#include "fsct/artifact_io.hpp"
#include "fsct/branch.hpp"

using namespace fsct;
using fsct::testing::random_tensor;
using fsct::testing::TempDir;
using fsct::testing::tiny_config;

namespace {

// Bitwise CRC-32 (reflected, polynomial 0xEDB88320) for re-sealing tampered
// archives so that checks behind the checksum are reachable.
std::uint32_t crc32_ref(const std::uint8_t* p, std::size_t n) {
  std::uint32_t c = 0xFFFFFFFFu;
  for (std::size_t i = 0; i < n; ++i) {
    c ^= p[i];
    for (int k = 0; k < 8; ++k) c = (c >> 1) ^ (0xEDB88320u & (0u - (c & 1u)));
  }
  return ~c;
}

void reseal(std::vector<std::uint8_t>& b) {
  const std::uint32_t c = crc32_ref(b.data(), b.size() - 4);
  for (int i = 0; i < 4; ++i) b[b.size() - 4 + i] = static_cast<std::uint8_t>(c >> (8 * i));
}

void put_u64(std::vector<std::uint8_t>& b, std::size_t at, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) b[at + i] = static_cast<std::uint8_t>(v >> (8 * i));
}

ErrorCode decode_error(const std::vector<std::uint8_t>& b) {
  try {
    decode_checkpoint(b);
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("decode accepted a damaged archive");
  return ErrorCode::kInvalidArgument;
}

TranslationModel<float> random_model(std::uint64_t seed, int groups = 1) {
  const ModelConfig cfg = tiny_config(16);
  TranslationModel<float> m(cfg, SplitConfig::defaults_for(cfg.generator));
  fsct::testing::randomize(m, seed);
  if (groups == 1) return m;
  std::vector<GroupId> extra;
  for (int g = 1; g < groups; ++g) extra.push_back(GroupId(g));
  std::mt19937_64 rng(seed + 7);
  auto out = graft(m, std::span<const GroupId>(extra), m.split(), rng, 0.02);
  fsct::testing::randomize(out, seed + 11);
  return out;
}

std::vector<std::uint8_t> read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST_CASE("round trip reproduces parameters and translations exactly") {
  auto m = random_model(1, 3);
  CheckpointMeta meta;
  meta.kind = "fewshot";
  meta.seed = 42;
  meta.steps = 17;
  meta.ablation = AblationMode::kNoSelective;
  meta.weights.cycle = 3.5;
  const auto bytes = encode_checkpoint(m, meta);
  Checkpoint ck = decode_checkpoint(bytes);

  CHECK(ck.meta.kind == "fewshot");
  CHECK(ck.meta.seed == 42);
  CHECK(ck.meta.steps == 17);
  CHECK(ck.meta.ablation == AblationMode::kNoSelective);
  CHECK(ck.meta.weights.cycle == 3.5);
  CHECK(ck.meta.group_ids == std::vector<int>{0, 1, 2});
  CHECK(ck.meta.disc_groups == 3);
  CHECK(ck.model.group_count() == 3);

  std::vector<std::pair<std::string, std::vector<float>>> a, b;
  m.visit_all([&](const std::string& n, Parameter<float>& p) { a.emplace_back(n, p.value.data); });
  ck.model.visit_all([&](const std::string& n, Parameter<float>& p) { b.emplace_back(n, p.value.data); });
  CHECK(a == b);

  std::mt19937_64 rng(2);
  for (int i = 0; i < 8; ++i) {
    const auto x = random_tensor<float>({3, 16, 16}, rng);
    for (Direction d : kDirections) {
      for (int g = 0; g < 3; ++g) {
        const auto want = translate(m, x, GroupId(g), d).image->value();
        const auto got = translate(ck.model, x, GroupId(g), d).image->value();
        CHECK(got.data == want.data);
      }
    }
  }
  // Encoding the decoded model gives the same bytes.
  CHECK(encode_checkpoint(ck.model, ck.meta) == bytes);
}

TEST_CASE("trailing checksum matches an independent CRC-32") {
  const auto bytes = encode_checkpoint(random_model(3), CheckpointMeta{});
  const char check[] = "123456789";
  CHECK(crc32_ref(reinterpret_cast<const std::uint8_t*>(check), 9) == 0xCBF43926u);
  std::uint32_t stored = 0;
  for (int i = 0; i < 4; ++i) stored |= std::uint32_t(bytes[bytes.size() - 4 + i]) << (8 * i);
  CHECK(stored == crc32_ref(bytes.data(), bytes.size() - 4));
  CHECK(std::memcmp(bytes.data(), "FSCTCKPT", 8) == 0);
}

TEST_CASE("damaged archives are rejected with the right code") {
  const auto good = encode_checkpoint(random_model(4), CheckpointMeta{});

  SUBCASE("bad magic") {
    auto b = good;
    b[0] = 'X';
    CHECK(decode_error(b) == ErrorCode::kFormat);
    CHECK(decode_error({}) == ErrorCode::kFormat);
  }
  SUBCASE("unsupported version") {
    auto b = good;
    b[8] = 2;
    CHECK(decode_error(b) == ErrorCode::kVersion);
  }
  SUBCASE("flipped payload byte") {
    auto b = good;
    b[b.size() / 2] ^= 0x40;
    CHECK(decode_error(b) == ErrorCode::kIntegrity);
  }
  SUBCASE("truncation at every tail length") {
    for (std::size_t cut : {std::size_t{1}, std::size_t{4}, std::size_t{100}, good.size() / 2,
                            good.size() - 13}) {
      std::vector<std::uint8_t> b(good.begin(), good.end() - static_cast<long>(cut));
      CHECK(decode_error(b) == ErrorCode::kIntegrity);
    }
  }
  SUBCASE("manifest length header beyond the file, checksum re-sealed") {
    auto b = good;
    put_u64(b, 12, std::uint64_t{1} << 40);
    reseal(b);
    CHECK(decode_error(b) == ErrorCode::kIntegrity);
    put_u64(b, 12, ~std::uint64_t{0});
    reseal(b);
    CHECK(decode_error(b) == ErrorCode::kIntegrity);
  }
  SUBCASE("renamed blob, checksum re-sealed") {
    auto b = good;
    const std::string key = "gen/";
    std::uint64_t mlen = 0;
    for (int i = 0; i < 8; ++i) mlen |= std::uint64_t(b[12 + i]) << (8 * i);
    auto it = std::search(b.begin() + 20 + static_cast<long>(mlen), b.end(), key.begin(), key.end());
    REQUIRE(it != b.end());
    *it = 'q';
    reseal(b);
    CHECK(decode_error(b) == ErrorCode::kFormat);
  }
}

TEST_CASE("save refuses to overwrite and a failed load leaves the target untouched") {
  TempDir dir("ckpt");
  const fs::path path = dir.path() / "a.fsct";
  auto m1 = random_model(5);
  auto m2 = random_model(6);
  save_checkpoint(path, m1, CheckpointMeta{}, false);
  const auto first = read_bytes(path);
  try {
    save_checkpoint(path, m2, CheckpointMeta{}, false);
    FAIL("expected kExists");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kExists);
  }
  CHECK(read_bytes(path) == first);
  save_checkpoint(path, m2, CheckpointMeta{}, true);
  CHECK(read_bytes(path) == encode_checkpoint(m2, CheckpointMeta{}));
  for (const auto& e : fs::directory_iterator(dir.path())) CHECK(e.path().filename() == "a.fsct");

  // A corrupt file yields an error, never a partially filled model.
  auto bad = first;
  bad[bad.size() - 40] ^= 1;
  {
    std::ofstream out(dir.path() / "bad.fsct", std::ios::binary);
    out.write(reinterpret_cast<const char*>(bad.data()), static_cast<std::streamsize>(bad.size()));
  }
  CHECK_THROWS_AS(load_checkpoint(dir.path() / "bad.fsct"), Error);
  try {
    load_checkpoint(dir.path() / "missing.fsct");
    FAIL("expected kIo");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kIo);
  }
}

TEST_CASE("graft_checkpoint copies branch 0 and accepts an already grafted archive") {
  Checkpoint basic = decode_checkpoint(encode_checkpoint(random_model(8), CheckpointMeta{}));
  const SplitConfig split = basic.model.split();
  Checkpoint g = graft_checkpoint(basic, 4, split, 9, 0.02);
  CHECK(g.model.group_count() == 4);
  CHECK(g.meta.group_ids == std::vector<int>{0, 1, 2, 3});
  std::mt19937_64 rng(10);
  const auto x = random_tensor<float>({3, 16, 16}, rng);
  for (Direction d : kDirections) {
    const auto ref = translate(basic.model, x, GroupId(0), d).image->value();
    for (int k = 0; k < 4; ++k) CHECK(translate(g.model, x, GroupId(k), d).image->value().data == ref.data);
  }
  Checkpoint again = graft_checkpoint(g, 4, split, 9, 0.02);
  CHECK(encode_checkpoint(again.model, again.meta) == encode_checkpoint(g.model, g.meta));
  try {
    graft_checkpoint(g, 3, split, 9, 0.02);
    FAIL("expected kUnknownGroup");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kUnknownGroup);
  }
}

TEST_CASE("heatmap normalizes to the full byte range") {
  Tensor<float> a({1, 2, 2});
  a.data = {0.5f, 2.0f, -1.0f, 0.5f};
  const Image h = heatmap_image(a, 4, 4);
  CHECK(h.width == 4);
  CHECK(h.height == 4);
  std::uint8_t lo = 255, hi = 0;
  for (auto v : h.pixels) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  CHECK(lo == 0);
  CHECK(hi == 255);
  // Nearest upsampling: top-right 2x2 block holds the maximum.
  const auto px = [&](int x, int y) { return h.pixels[(static_cast<std::size_t>(y) * 4 + x) * 3]; };
  CHECK(px(2, 0) == 255);
  CHECK(px(3, 1) == 255);
  CHECK(px(0, 2) == 0);
  CHECK(px(0, 0) == px(3, 3));
  CHECK(px(0, 0) == 128);  // (0.5 + 1) / 3 * 255 rounds to 128

  Tensor<float> flat({1, 3, 3});
  for (auto& v : flat.data) v = 0.7f;
  for (auto v : heatmap_image(flat, 6, 6).pixels) CHECK(v == 128);
}

TEST_CASE("attention export writes five-column panels") {
  TempDir dir("attn");
  auto m = random_model(12, 2);
  std::vector<Image> imgs;
  for (int i = 0; i < 3; ++i) {
    Image im(24, 20, 3, static_cast<std::uint8_t>(40 * i + 10));
    imgs.push_back(im);
  }
  const auto panels = export_attention(m, imgs, GroupId(1), Direction::kRealToCartoon, dir.path(), false);
  REQUIRE(panels.size() == 3);
  for (std::size_t i = 0; i < panels.size(); ++i) {
    CHECK(panels[i].image.width == 5 * 16);
    CHECK(panels[i].image.height == 16);
    CHECK(fs::exists(panels[i].path));
    const Image back = read_image(panels[i].path);
    CHECK(back.width == 80);
    CHECK(back.pixels == panels[i].image.pixels);
  }
  CHECK(panels[0].path.filename() == "attention_0000.png");
  try {
    export_attention(m, imgs, GroupId(1), Direction::kRealToCartoon, dir.path(), false);
    FAIL("expected kExists");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kExists);
  }
  CHECK_NOTHROW(export_attention(m, imgs, GroupId(1), Direction::kRealToCartoon, dir.path(), true));
  try {
    export_attention(m, imgs, GroupId(5), Direction::kRealToCartoon, dir.path(), true);
    FAIL("expected kUnknownGroup");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kUnknownGroup);
  }
}
