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

#include "fsct/fsct.h"

#include <cstdlib>
#include <cstring>
#include <fstream>
#include <new>
#include <string>

#include "fsct/artifact_io.hpp"
#include "fsct/branch.hpp"
#include "fsct/config.hpp"
#include "fsct/data.hpp"
#include "fsct/trainer.hpp"

struct fsct_model {
  fsct::Checkpoint ckpt;
};

namespace {

using namespace fsct;

thread_local std::string g_last_error;

fsct_status to_status(ErrorCode c) {
  switch (c) {
    case ErrorCode::kInvalidArgument: return FSCT_ERR_INVALID_ARGUMENT;
    case ErrorCode::kShape: return FSCT_ERR_SHAPE;
    case ErrorCode::kUnknownGroup: return FSCT_ERR_UNKNOWN_GROUP;
    case ErrorCode::kContract: return FSCT_ERR_CONTRACT;
    case ErrorCode::kIo: return FSCT_ERR_IO;
    case ErrorCode::kFormat: return FSCT_ERR_FORMAT;
    case ErrorCode::kIntegrity: return FSCT_ERR_INTEGRITY;
    case ErrorCode::kVersion: return FSCT_ERR_VERSION;
    case ErrorCode::kData: return FSCT_ERR_DATA;
    case ErrorCode::kNumeric: return FSCT_ERR_NUMERIC;
    case ErrorCode::kExists: return FSCT_ERR_EXISTS;
  }
  return FSCT_ERR_INTERNAL;
}

template <typename F>
fsct_status guarded(F&& f) {
  try {
    f();
    g_last_error.clear();
    return FSCT_OK;
  } catch (const Error& e) {
    g_last_error = e.what();
    return to_status(e.code());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
  } catch (const std::filesystem::filesystem_error& e) {
    g_last_error = e.what();
    return FSCT_ERR_IO;
  } catch (const std::exception& e) {
    g_last_error = e.what();
  } catch (...) {
    g_last_error = "unknown failure";
  }
  return FSCT_ERR_INTERNAL;
}

void require(bool ok, const char* what) {
  if (!ok) throw Error(ErrorCode::kInvalidArgument, what);
}

Direction to_direction(fsct_direction d) {
  if (d == FSCT_REAL_TO_CARTOON) return Direction::kRealToCartoon;
  if (d == FSCT_CARTOON_TO_REAL) return Direction::kCartoonToReal;
  throw Error(ErrorCode::kInvalidArgument, "unknown direction " + std::to_string(static_cast<int>(d)));
}

RunConfig parse_run_config(const char* text) {
  if (text == nullptr || *text == '\0') return {};
  return run_config_from_json(parse_json(text, "run config"));
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  f << text;
  if (!f) throw Error(ErrorCode::kIo, "failed writing " + path.string());
}

/// Creates the run directory and refuses to clobber a previous run.
void prepare_run_dir(const fs::path& dir, bool overwrite) {
  for (const char* name : {"config.json", "metrics.jsonl", "timing.jsonl", "model.ckpt"}) {
    if (!overwrite && fs::exists(dir / name)) {
      throw Error(ErrorCode::kExists, (dir / name).string() + " exists (use --force to overwrite)");
    }
  }
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot create " + dir.string() + ": " + ec.message());
}

class RunWriter {
 public:
  RunWriter(const fs::path& dir, const RunConfig& cfg, CheckpointMeta meta, bool overwrite)
      : dir_(dir), meta_(std::move(meta)), overwrite_(overwrite) {
    write_text(dir / "config.json", to_json(cfg).dump(2) + "\n");
    metrics_.open(dir / "metrics.jsonl", std::ios::trunc);
    timing_.open(dir / "timing.jsonl", std::ios::trunc);
    if (!metrics_ || !timing_) throw Error(ErrorCode::kIo, "cannot open metrics files in " + dir.string());
  }

  TrainHooks hooks() {
    TrainHooks h;
    h.on_record = [this](const MetricRecord& r) {
      metrics_ << to_json_line(r, false) << '\n';
      timing_ << "{\"step\":" << r.step << ",\"wall_ms\":" << r.wall_ms << "}\n";
      metrics_.flush();
      timing_.flush();
      if (!metrics_ || !timing_) throw Error(ErrorCode::kIo, "failed writing metrics in " + dir_.string());
    };
    h.on_checkpoint = [this](int step, const TranslationModel<float>& m) {
      save(dir_ / ("step" + std::to_string(step) + ".ckpt"), m, step);
    };
    return h;
  }

  void save(const fs::path& path, const TranslationModel<float>& m, long steps) {
    CheckpointMeta meta = meta_;
    meta.steps = steps;
    save_checkpoint(path, m, meta, overwrite_);
  }

 private:
  fs::path dir_;
  CheckpointMeta meta_;
  bool overwrite_;
  std::ofstream metrics_, timing_;
};

Dataset open_dataset(const RunConfig& cfg) {
  require(!cfg.data.empty(), "run config needs a \"data\" directory");
  return Dataset(load_manifest(cfg.data));
}

}  // namespace

extern "C" {

const char* fsct_version(void) { return "1.0.0"; }

const char* fsct_status_name(fsct_status status) {
  switch (status) {
    case FSCT_OK: return "ok";
    case FSCT_ERR_INTERNAL: return "internal";
    default: break;
  }
  const int i = static_cast<int>(status) - 1;
  if (i >= 0 && i <= static_cast<int>(ErrorCode::kExists)) {
    return error_code_name(static_cast<ErrorCode>(i));
  }
  return "unknown";
}

const char* fsct_last_error(void) { return g_last_error.c_str(); }

fsct_status fsct_synth_data(const char* root, int groups, int per_group, int size, uint64_t seed,
                            int overwrite) {
  return guarded([&] {
    require(root != nullptr, "root is null");
    if (!overwrite && fs::exists(root) && !fs::is_empty(root)) {
      throw Error(ErrorCode::kExists, std::string(root) + " is not empty (use --force to overwrite)");
    }
    generate_synthetic(root, SyntheticSpec{groups, per_group, size, seed});
  });
}

fsct_status fsct_train_basic(const char* config_json, const char* out_dir, int overwrite) {
  return guarded([&] {
    require(out_dir != nullptr, "out_dir is null");
    RunConfig cfg = parse_run_config(config_json);
    cfg.train.stage = Stage::kBasic;
    cfg.train.validate();
    cfg.model.validate();
    const Dataset data = open_dataset(cfg);
    prepare_run_dir(out_dir, overwrite != 0);

    CheckpointMeta meta;
    meta.kind = "basic";
    meta.weights = cfg.weights;
    meta.seed = cfg.train.seed;
    meta.ablation = cfg.train.ablation;
    RunWriter run(out_dir, cfg, meta, overwrite != 0);
    TrainResult r = train_basic(data, cfg.model, cfg.train, cfg.weights, run.hooks());
    run.save(fs::path(out_dir) / "model.ckpt", r.model, cfg.train.iterations);
  });
}

fsct_status fsct_train_fewshot(const char* config_json, const char* basic_ckpt, const char* out_dir,
                               int overwrite) {
  return guarded([&] {
    require(out_dir != nullptr && basic_ckpt != nullptr, "null path argument");
    RunConfig cfg = parse_run_config(config_json);
    cfg.train.stage = Stage::kFewshot;
    cfg.train.validate();
    Checkpoint basic = load_checkpoint(basic_ckpt);
    // The architecture comes from the checkpoint, not the config.
    cfg.model = basic.model.config;
    if (!cfg.split) {
      cfg.split = basic.model.group_count() > 1 ? basic.model.split()
                                                 : SplitConfig::defaults_for(cfg.model.generator);
    }
    const Dataset data = open_dataset(cfg);
    prepare_run_dir(out_dir, overwrite != 0);

    CheckpointMeta meta;
    meta.kind = "fewshot";
    meta.weights = cfg.weights;
    meta.seed = cfg.train.seed;
    meta.ablation = cfg.train.ablation;
    RunWriter run(out_dir, cfg, meta, overwrite != 0);
    TrainResult r = train_fewshot(data, basic.model, cfg.train, cfg.weights, *cfg.split, run.hooks());
    run.save(fs::path(out_dir) / "model.ckpt", r.model, cfg.train.iterations);
  });
}

fsct_status fsct_model_load(const char* path, fsct_model** out) {
  return guarded([&] {
    require(path != nullptr && out != nullptr, "null argument");
    *out = nullptr;
    auto m = std::make_unique<fsct_model>();
    m->ckpt = load_checkpoint(path);
    *out = m.release();
  });
}

void fsct_model_free(fsct_model* model) { delete model; }

fsct_status fsct_model_save(const fsct_model* model, const char* path, int overwrite) {
  return guarded([&] {
    require(model != nullptr && path != nullptr, "null argument");
    save_checkpoint(path, model->ckpt.model, model->ckpt.meta, overwrite != 0);
  });
}

fsct_status fsct_model_graft(const fsct_model* basic, int groups, const char* split_json,
                             uint64_t seed, fsct_model** out) {
  return guarded([&] {
    require(basic != nullptr && out != nullptr, "null argument");
    *out = nullptr;
    const auto& gen = basic->ckpt.model.config.generator;
    SplitConfig split = SplitConfig::defaults_for(gen);
    if (split_json != nullptr && *split_json != '\0') {
      split = split_config_from_json(parse_json(split_json, "split config"), split);
    }
    TrainConfig defaults;
    auto m = std::make_unique<fsct_model>();
    m->ckpt = graft_checkpoint(basic->ckpt, groups, split, seed, defaults.init_std);
    *out = m.release();
  });
}

fsct_status fsct_model_describe(const fsct_model* model, char** out_json) {
  return guarded([&] {
    require(model != nullptr && out_json != nullptr, "null argument");
    *out_json = nullptr;
    auto& m = const_cast<TranslationModel<float>&>(model->ckpt.model);
    CheckpointMeta meta = model->ckpt.meta;
    meta.group_ids.clear();
    for (int g = 0; g < m.group_count(); ++g) meta.group_ids.push_back(g);
    meta.split = m.split();
    meta.arch = m.config;
    meta.disc_groups = m.discriminator(Domain::kReal).group_count();
    Json j = to_json(meta);
    const PartitionCounts counts = count_parameters(m);
    j["parameters"] = {{"shared", counts.shared}, {"specific", counts.specific}};
    const std::string text = j.dump(2);
    char* buf = static_cast<char*>(std::malloc(text.size() + 1));
    if (buf == nullptr) throw std::bad_alloc();
    std::memcpy(buf, text.c_str(), text.size() + 1);
    *out_json = buf;
  });
}

void fsct_string_free(char* s) { std::free(s); }

int fsct_model_group_count(const fsct_model* model) {
  return model == nullptr ? 0 : model->ckpt.model.group_count();
}

int fsct_model_image_size(const fsct_model* model) {
  return model == nullptr ? 0 : model->ckpt.model.config.generator.image_size;
}

fsct_status fsct_translate(const fsct_model* model, int group, fsct_direction direction,
                           const float* input, float* output, size_t len) {
  return guarded([&] {
    require(model != nullptr && input != nullptr && output != nullptr, "null argument");
    const int s = model->ckpt.model.config.generator.image_size;
    const std::size_t expected = static_cast<std::size_t>(3) * s * s;
    if (len != expected) {
      throw ShapeError("translate: buffer holds " + std::to_string(len) + " values, expected " +
                       std::to_string(expected));
    }
    Tensor<float> x({3, s, s}, std::vector<float>(input, input + len));
    Translation<float> y = translate(model->ckpt.model, x, GroupId(group), to_direction(direction));
    std::memcpy(output, y.image->value().ptr(), len * sizeof(float));
  });
}

fsct_status fsct_translate_file(const fsct_model* model, int group, fsct_direction direction,
                                const char* input, const char* output, int overwrite) {
  return guarded([&] {
    require(model != nullptr && input != nullptr && output != nullptr, "null argument");
    if (!overwrite && fs::exists(output)) {
      throw Error(ErrorCode::kExists, std::string(output) + " exists (use --force to overwrite)");
    }
    const int s = model->ckpt.model.config.generator.image_size;
    Image img = read_image(input);
    if (img.width != s || img.height != s) img = resize_bilinear(img, s, s);
    Translation<float> y =
        translate(model->ckpt.model, to_tensor(img), GroupId(group), to_direction(direction));
    const Image out = from_tensor(y.image->value());
    const fs::path out_path(output);
    const std::string ext = out_path.extension().string();
    if (ext == ".jpg" || ext == ".jpeg" || ext == ".JPG" || ext == ".JPEG") {
      write_jpeg(out_path, out);
    } else {
      write_png(out_path, out);
    }
  });
}

fsct_status fsct_export_attention(const fsct_model* model, int group, fsct_direction direction,
                                  const char* const* inputs, size_t n_inputs, const char* out_dir,
                                  int overwrite) {
  return guarded([&] {
    require(model != nullptr && out_dir != nullptr && (inputs != nullptr || n_inputs == 0),
            "null argument");
    std::vector<Image> images;
    for (std::size_t i = 0; i < n_inputs; ++i) {
      require(inputs[i] != nullptr, "null input path");
      images.push_back(read_image(inputs[i]));
    }
    export_attention(model->ckpt.model, images, GroupId(group), to_direction(direction), out_dir,
                     overwrite != 0);
  });
}

}  // extern "C"
