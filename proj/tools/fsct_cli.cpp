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

// Command-line front end over the C interface. Each subcommand runs one
// pipeline stage and writes its outputs under --out.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "fsct/fsct.h"

namespace {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

struct Failure {
  fsct_status status;
  std::string message;
};

void check(fsct_status s) {
  if (s != FSCT_OK) throw Failure{s, fsct_last_error()};
}

[[noreturn]] void fail(fsct_status s, const std::string& message) { throw Failure{s, message}; }

Json read_config(const std::string& path) {
  if (path.empty()) return Json::object();
  std::ifstream f(path);
  if (!f) fail(FSCT_ERR_IO, "cannot read config " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  try {
    Json j = Json::parse(ss.str());
    if (!j.is_object()) fail(FSCT_ERR_INVALID_ARGUMENT, "config " + path + " is not a JSON object");
    return j;
  } catch (const nlohmann::json::parse_error& e) {
    fail(FSCT_ERR_INVALID_ARGUMENT, "config " + path + ": " + e.what());
  }
}

struct ModelHandle {
  fsct_model* ptr = nullptr;
  ModelHandle() = default;
  ModelHandle(const ModelHandle&) = delete;
  ModelHandle& operator=(const ModelHandle&) = delete;
  ~ModelHandle() { fsct_model_free(ptr); }
};

void load(const std::string& path, ModelHandle& m) { check(fsct_model_load(path.c_str(), &m.ptr)); }

fsct_direction parse_direction(const std::string& d) {
  return d == "cartoon2real" ? FSCT_CARTOON_TO_REAL : FSCT_REAL_TO_CARTOON;
}

struct TrainArgs {
  std::string config, data, out, ckpt, ablation;
  std::int64_t seed = -1;
  int iters = -1;
  int groups = -1;
  bool force = false;
};

/// Applies flag overrides on top of the config file.
Json resolve(const TrainArgs& a) {
  Json j = read_config(a.config);
  if (!a.data.empty()) j["data"] = a.data;
  if (!j.contains("train")) j["train"] = Json::object();
  if (a.seed >= 0) j["train"]["seed"] = a.seed;
  if (a.iters >= 0) j["train"]["iterations"] = a.iters;
  if (!a.ablation.empty()) j["train"]["ablation"] = a.ablation;
  if (a.groups >= 0) j["train"]["groups"] = a.groups;
  return j;
}

void add_train_flags(CLI::App* cmd, TrainArgs& a) {
  cmd->add_option("--config", a.config, "JSON run configuration")->check(CLI::ExistingFile);
  cmd->add_option("--data", a.data, "dataset root (overrides config \"data\")");
  cmd->add_option("--out", a.out, "run directory")->required();
  cmd->add_option("--seed", a.seed, "random seed")->check(CLI::NonNegativeNumber);
  cmd->add_option("--iters", a.iters, "training iterations")->check(CLI::NonNegativeNumber);
  cmd->add_flag("--force", a.force, "overwrite existing outputs");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Few-shot fine-grained cartoon face translation"};
  app.require_subcommand(1);

  TrainArgs basic;
  auto* train_basic = app.add_subcommand("train-basic", "train the single-branch model on group 0");
  add_train_flags(train_basic, basic);

  TrainArgs fewshot;
  auto* train_fewshot =
      app.add_subcommand("train-fewshot", "graft group branches and train on every group");
  add_train_flags(train_fewshot, fewshot);
  train_fewshot->add_option("--ckpt", fewshot.ckpt, "basic or grafted checkpoint")
      ->required()
      ->check(CLI::ExistingFile);
  train_fewshot->add_option("--ablation", fewshot.ablation, "training mode")
      ->check(CLI::IsMember({"default", "mixed", "finetune_all", "no_selective"}));
  train_fewshot->add_option("--groups", fewshot.groups, "group count (default: from data)")
      ->check(CLI::PositiveNumber);

  std::string graft_config, graft_ckpt, graft_out;
  int graft_groups = 0;
  std::int64_t graft_seed = 0;
  bool graft_force = false;
  auto* graft = app.add_subcommand("graft", "add group branches to a basic checkpoint");
  graft->add_option("--ckpt", graft_ckpt, "basic checkpoint")->required()->check(CLI::ExistingFile);
  graft->add_option("--groups", graft_groups, "total group count")->required()->check(CLI::PositiveNumber);
  graft->add_option("--config", graft_config, "JSON config; only \"split\" is used")
      ->check(CLI::ExistingFile);
  graft->add_option("--seed", graft_seed, "seed for the new group heads")->check(CLI::NonNegativeNumber);
  graft->add_option("--out", graft_out, "output directory")->required();
  graft->add_flag("--force", graft_force, "overwrite existing outputs");

  std::string tr_ckpt, tr_direction = "real2cartoon", tr_input, tr_output;
  int tr_group = 0;
  bool tr_force = false;
  auto* translate = app.add_subcommand("translate", "translate one image");
  translate->add_option("--ckpt", tr_ckpt, "checkpoint")->required()->check(CLI::ExistingFile);
  translate->add_option("--group", tr_group, "group branch")->check(CLI::NonNegativeNumber);
  translate->add_option("--direction", tr_direction, "translation direction")
      ->check(CLI::IsMember({"real2cartoon", "cartoon2real"}));
  translate->add_option("--input", tr_input, "input PNG or JPEG")->required()->check(CLI::ExistingFile);
  translate->add_option("--output", tr_output, "output PNG or JPEG")->required();
  translate->add_flag("--force", tr_force, "overwrite the output");

  std::string at_ckpt, at_direction = "real2cartoon", at_out;
  std::vector<std::string> at_inputs;
  int at_group = 0;
  bool at_force = false;
  auto* attention = app.add_subcommand("attention", "export attention panels");
  attention->add_option("--ckpt", at_ckpt, "checkpoint")->required()->check(CLI::ExistingFile);
  attention->add_option("--group", at_group, "group branch")->check(CLI::NonNegativeNumber);
  attention->add_option("--direction", at_direction, "translation direction")
      ->check(CLI::IsMember({"real2cartoon", "cartoon2real"}));
  attention->add_option("--input", at_inputs, "input images")->required()->check(CLI::ExistingFile);
  attention->add_option("--out", at_out, "output directory")->required();
  attention->add_flag("--force", at_force, "overwrite existing panels");

  std::string sd_out;
  int sd_groups = 4, sd_per_group = 4, sd_size = 64;
  std::int64_t sd_seed = 0;
  bool sd_force = false;
  auto* synth = app.add_subcommand("synth-data", "write a synthetic dataset");
  synth->add_option("--out", sd_out, "dataset root")->required();
  synth->add_option("--groups", sd_groups, "groups")->check(CLI::PositiveNumber);
  synth->add_option("--per-group", sd_per_group, "images per group and domain")->check(CLI::PositiveNumber);
  synth->add_option("--size", sd_size, "image side length")->check(CLI::Range(8, 4096));
  synth->add_option("--seed", sd_seed, "random seed")->check(CLI::NonNegativeNumber);
  synth->add_flag("--force", sd_force, "write into a non-empty directory");

  std::string in_ckpt;
  auto* inspect = app.add_subcommand("inspect", "print a checkpoint manifest");
  inspect->add_option("--ckpt", in_ckpt, "checkpoint")->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    app.exit(e);
    std::cerr << app.help();
    return 2;
  }

  try {
    if (*train_basic) {
      const Json cfg = resolve(basic);
      check(fsct_train_basic(cfg.dump().c_str(), basic.out.c_str(), basic.force));
      std::cout << "wrote " << (fs::path(basic.out) / "model.ckpt").string() << "\n";
    } else if (*train_fewshot) {
      const Json cfg = resolve(fewshot);
      check(fsct_train_fewshot(cfg.dump().c_str(), fewshot.ckpt.c_str(), fewshot.out.c_str(),
                               fewshot.force));
      std::cout << "wrote " << (fs::path(fewshot.out) / "model.ckpt").string() << "\n";
    } else if (*graft) {
      const Json cfg = read_config(graft_config);
      const std::string split = cfg.contains("split") ? cfg["split"].dump() : std::string();
      const fs::path out = fs::path(graft_out) / "model.ckpt";
      const fs::path echo = fs::path(graft_out) / "config.json";
      if (!graft_force && fs::exists(echo)) {
        fail(FSCT_ERR_EXISTS, echo.string() + " exists (use --force to overwrite)");
      }
      ModelHandle base, grafted;
      load(graft_ckpt, base);
      check(fsct_model_graft(base.ptr, graft_groups, split.empty() ? nullptr : split.c_str(),
                             static_cast<std::uint64_t>(graft_seed), &grafted.ptr));
      fs::create_directories(graft_out);
      check(fsct_model_save(grafted.ptr, out.c_str(), graft_force));
      Json resolved = {{"ckpt", graft_ckpt}, {"groups", graft_groups}, {"seed", graft_seed}};
      if (!split.empty()) resolved["split"] = Json::parse(split);
      std::ofstream(echo) << resolved.dump(2) << "\n";
      std::cout << "wrote " << out.string() << "\n";
    } else if (*translate) {
      ModelHandle m;
      load(tr_ckpt, m);
      check(fsct_translate_file(m.ptr, tr_group, parse_direction(tr_direction), tr_input.c_str(),
                                tr_output.c_str(), tr_force));
    } else if (*attention) {
      ModelHandle m;
      load(at_ckpt, m);
      std::vector<const char*> inputs;
      for (const auto& s : at_inputs) inputs.push_back(s.c_str());
      check(fsct_export_attention(m.ptr, at_group, parse_direction(at_direction), inputs.data(),
                                  inputs.size(), at_out.c_str(), at_force));
      std::cout << "wrote " << inputs.size() << " panels to " << at_out << "\n";
    } else if (*synth) {
      check(fsct_synth_data(sd_out.c_str(), sd_groups, sd_per_group, sd_size,
                            static_cast<std::uint64_t>(sd_seed), sd_force));
      std::cout << "wrote " << 2 * sd_groups * sd_per_group << " images to " << sd_out << "\n";
    } else if (*inspect) {
      ModelHandle m;
      load(in_ckpt, m);
      char* text = nullptr;
      check(fsct_model_describe(m.ptr, &text));
      const Json j = Json::parse(text);
      fsct_string_free(text);
      std::cout << "groups: " << j["group_ids"].dump() << "\n";
      std::cout << "split: enc_specific=" << j["split"]["enc_specific"]
                << " dec_specific=" << j["split"]["dec_specific"] << "\n";
      std::cout << j.dump(2) << "\n";
    }
  } catch (const Failure& f) {
    std::cerr << "error: " << fsct_status_name(f.status) << ": " << f.message << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: internal: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
