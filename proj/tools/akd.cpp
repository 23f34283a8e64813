// Copyright (c) 2026 The AKD Authors. All Rights Reserved.
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

#include <cctype>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "akd/ablation.hpp"
#include "akd/checkpoint.hpp"
#include "akd/config.hpp"
#include "akd/data.hpp"
#include "akd/errors.hpp"
#include "akd/eval.hpp"
#include "akd/gradsuite.hpp"
#include "akd/io.hpp"
#include "akd/parallel.hpp"
#include "akd/trainer.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

enum Exit : int {
  kOk = 0,
  kFailed = 1,
  kBadConfig = 2,
  kBadFile = 3,
  kUnsupported = 4,
};

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::size_t threads = 1;
  std::string out;
};

void add_common(CLI::App* cmd, Common& c, bool with_out) {
  cmd->add_option("--config", c.config, "run configuration (JSON)")
      ->check(CLI::ExistingFile);
  cmd->add_option("--seed", c.seed, "seed for every random stream");
  cmd->add_option("--threads", c.threads, "worker threads, 0 = all cores");
  if (with_out) cmd->add_option("--out", c.out, "output directory")->required();
}

akd::RunConfig load_config(const Common& c) {
  akd::RunConfig cfg =
      c.config.empty() ? akd::RunConfig::defaults() : akd::load_run_config(c.config);
  if (c.seed) cfg.set_seed(*c.seed);
  cfg.validate();
  return cfg;
}

std::size_t threads_of(const Common& c) { return akd::resolve_threads(c.threads); }

void print(const json& j) { std::cout << j.dump() << std::endl; }

struct Split {
  akd::Dataset train;
  akd::Dataset val;
};

Split load_split(const std::string& dir) {
  return {akd::load_dataset((fs::path(dir) / "train.bin").string()),
          akd::load_dataset((fs::path(dir) / "val.bin").string())};
}

void check_geometry(const akd::Dataset& d, const akd::ViTConfig& c,
                    const std::string& what) {
  if (d.channels != c.channels || d.height != c.image_size ||
      d.width != c.image_size) {
    throw akd::ConfigError(
        what + ": data is " + std::to_string(d.channels) + "x" +
        std::to_string(d.height) + "x" + std::to_string(d.width) +
        " but the model expects " + std::to_string(c.channels) + "x" +
        std::to_string(c.image_size) + "x" + std::to_string(c.image_size));
  }
}

Split generate_split(std::uint64_t seed, std::size_t count,
                     std::size_t val_count, std::size_t classes,
                     std::size_t image_size, std::size_t channels) {
  akd::SyntheticSpec spec;
  spec.classes = classes;
  spec.image_size = image_size;
  spec.channels = channels;
  spec.count = count;
  spec.seed = akd::mix_seed(seed, 1);
  Split s;
  s.train = akd::generate_synthetic(spec);
  spec.count = val_count;
  spec.seed = akd::mix_seed(seed, 2);
  s.val = akd::generate_synthetic(spec);
  return s;
}

akd::Teacher load_teacher(const std::string& path) {
  auto [config, params] = akd::load_vit(akd::load_checkpoint(path));
  return akd::Teacher::frozen(config, params);
}

// Returns the pretrained classifier and its validation accuracy.
std::pair<akd::Classifier, double> pretrain_teacher(const akd::RunConfig& cfg,
                                                    const Split& data,
                                                    std::size_t threads,
                                                    const std::string& out) {
  check_geometry(data.train, cfg.vit_teacher, "teacher");
  auto model = akd::Classifier::create(cfg.vit_teacher, data.train.num_classes(),
                                       cfg.pretrain.seed);
  std::ofstream log;
  if (!out.empty()) {
    fs::create_directories(out);
    log.open(fs::path(out) / "pretrain.jsonl");
  }
  akd::pretrain_classifier(model, data.train, cfg.pretrain, threads,
                           [&](const akd::PretrainMetrics& m) {
                             if (log.is_open()) {
                               json j;
                               j["epoch"] = m.epoch;
                               j["lr"] = m.lr;
                               j["loss"] = m.loss;
                               j["train_accuracy"] = m.train_accuracy;
                               j["wall_time_s"] = m.wall_time_s;
                               log << j.dump() << "\n";
                             }
                           });
  const double acc = akd::classifier_accuracy(model, data.val, threads);
  return {std::move(model), acc};
}

// --- commands ---------------------------------------------------------------

struct GenData {
  Common c;
  std::size_t count = 5000;
  std::size_t val_count = 1000;
  std::size_t classes = 8;
  std::size_t image_size = 32;
  std::size_t channels = 3;

  int run() const {
    const std::uint64_t seed = c.seed.value_or(0);
    auto split = generate_split(seed, count, val_count, classes, image_size, channels);
    const fs::path out(c.out);
    akd::save_dataset((out / "train.bin").string(), split.train);
    akd::save_dataset((out / "val.bin").string(), split.val);
    json j;
    j["train"] = (out / "train.bin").string();
    j["val"] = (out / "val.bin").string();
    j["train_count"] = split.train.size();
    j["val_count"] = split.val.size();
    j["classes"] = classes;
    j["seed"] = seed;
    print(j);
    return kOk;
  }
};

struct MakeTeacher {
  Common c;
  std::string data;

  int run() const {
    auto cfg = load_config(c);
    auto split = load_split(data);
    auto [model, acc] = pretrain_teacher(cfg, split, threads_of(c), c.out);
    const auto path = (fs::path(c.out) / "teacher.akd").string();
    akd::save_checkpoint(path, akd::classifier_checkpoint(model));
    json j;
    j["checkpoint"] = path;
    j["val_accuracy"] = acc;
    print(j);
    return kOk;
  }
};

struct Distill {
  Common c;
  std::string teacher;
  std::string data;

  int run() const {
    auto cfg = load_config(c);
    auto split = load_split(data);
    auto t = load_teacher(teacher);
    if (!(t.config == cfg.vit_teacher)) {
      spdlog::warn("teacher checkpoint architecture differs from vit_teacher; "
                   "using the checkpoint");
    }
    check_geometry(split.train, cfg.vit_student, "student");
    akd::DistillRun run;
    run.student = akd::Student::create(cfg.vit_student, t.config.embed_dim(),
                                       cfg.projector_depth, cfg.train.seed);
    run.teacher = std::move(t);
    run.distill = cfg.distill;
    run.train = cfg.train;
    run.data = &split.train;
    run.out_dir = c.out;
    run.threads = threads_of(c);
    auto result = akd::run_distillation(std::move(run));
    const auto& last = result.history.back();
    json j;
    j["checkpoint"] = result.checkpoints.back();
    j["epochs"] = result.history.size();
    j["loss_pa"] = last.loss_pa;
    j["loss_ag"] = last.loss_ag;
    j["loss_total"] = last.loss_total;
    print(j);
    return kOk;
  }
};

struct Eval {
  Common c;
  std::string ckpt;
  std::string data;
  bool linear = false;

  int run() const {
    auto cfg = load_config(c);
    auto [config, params] = akd::load_vit(akd::load_checkpoint(ckpt));
    auto split = load_split(data);
    check_geometry(split.train, config, "model");
    const std::size_t threads = threads_of(c);
    auto train = akd::extract_features(params, config, split.train, threads);
    auto val = akd::extract_features(params, config, split.val, threads);
    if (!c.out.empty()) {
      akd::save_checkpoint((fs::path(c.out) / "features_train.akd").string(),
                           train.to_checkpoint());
      akd::save_checkpoint((fs::path(c.out) / "features_val.akd").string(),
                           val.to_checkpoint());
    }
    json j;
    if (linear) {
      j["metric"] = "linear_top1";
      j["accuracy"] = akd::linear_probe(train, val, cfg.eval.probe);
      j["epochs"] = cfg.eval.probe.epochs;
    } else {
      j["metric"] = "knn_top1";
      j["accuracy"] = akd::knn_classify(train, val, cfg.eval.knn_k,
                                        cfg.eval.knn_tau, threads);
      j["k"] = cfg.eval.knn_k;
      j["tau"] = cfg.eval.knn_tau;
    }
    j["train"] = train.rows;
    j["val"] = val.rows;
    print(j);
    return kOk;
  }
};

struct GradCheck {
  Common c;
  std::size_t seeds = 3;

  int run() const {
    auto cfg = load_config(c);
    const std::uint64_t base = c.seed.value_or(0);
    std::vector<std::uint64_t> list;
    for (std::size_t i = 0; i < seeds; ++i) list.push_back(base + i);
    bool ok = true;
    for (const auto& r : akd::run_gradient_suite(
             cfg.distill, cfg.vit_student.block_form, list)) {
      json j;
      j["check"] = r.name;
      j["passed"] = r.passed;
      j["max_rel_error"] = r.max_rel_error;
      j["worst_leaf"] = r.worst_leaf;
      j["coordinates"] = r.coordinates;
      print(j);
      ok = ok && r.passed;
    }
    return ok ? kOk : kFailed;
  }
};

// Binary PGM (1 channel) or PPM (3 channels), normalized like dataset pixels.
std::optional<akd::Tensor> read_netpbm(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6'))
    return std::nullopt;
  const std::size_t channels = bytes[1] == '5' ? 1 : 3;
  std::size_t pos = 2;
  auto next = [&]() -> std::size_t {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
    std::size_t v = 0, digits = 0;
    while (pos < bytes.size() && std::isdigit(bytes[pos])) {
      v = v * 10 + (bytes[pos++] - '0');
      ++digits;
    }
    if (digits == 0) throw akd::FormatError("malformed netpbm header");
    return v;
  };
  const std::size_t w = next(), h = next(), maxval = next();
  ++pos;
  if (maxval != 255) throw akd::FormatError("netpbm maxval must be 255");
  if (bytes.size() - pos < w * h * channels)
    throw akd::FormatError("truncated netpbm payload");
  akd::Dataset d;
  d.channels = channels;
  d.height = h;
  d.width = w;
  d.labels = {0};
  d.pixels.resize(channels * h * w);
  // interleaved RGB to planar
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      for (std::size_t ch = 0; ch < channels; ++ch)
        d.pixels[(ch * h + y) * w + x] = bytes[pos + (y * w + x) * channels + ch];
  return d.image(0);
}

struct ExportAttn {
  Common c;
  std::string ckpt;
  std::string image;
  std::size_t index = 0;
  std::optional<std::size_t> layer;
  std::string reference;

  int run() const {
    auto cfg = load_config(c);
    auto [config, params] = akd::load_vit(akd::load_checkpoint(ckpt));
    const auto bytes = akd::read_file(image);
    akd::Tensor img;
    if (auto pnm = read_netpbm(bytes)) {
      img = *pnm;
    } else {
      auto d = akd::decode_dataset(bytes);
      if (index >= d.size())
        throw akd::ContractError("--index " + std::to_string(index) +
                                 " outside a dataset of " + std::to_string(d.size()));
      img = d.image(index);
    }
    if (img.shape() != akd::Shape{config.channels, config.image_size, config.image_size})
      throw akd::ConfigError("image does not match the model input geometry");
    auto ex = akd::export_attention(params, config, img, layer, cfg.distill, c.out);
    json j;
    j["layer"] = ex.layer;
    j["grid"] = ex.grid;
    j["heads"] = ex.rows.size();
    j["files"] = ex.files;
    if (!reference.empty()) {
      auto [rc, rp] = akd::load_vit(akd::load_checkpoint(reference));
      auto ref = akd::export_attention(rp, rc, img, std::nullopt, cfg.distill);
      j["reference_kl"] = akd::aggregate_kl(ref, ex, cfg.distill);
    }
    print(j);
    return kOk;
  }
};

struct Ablate {
  Common c;
  std::string axis;
  std::string teacher;
  std::string data;
  std::size_t count = 5000;
  std::size_t val_count = 1000;

  int run() const {
    auto cfg = load_config(c);
    const auto which = akd::parse_ablation_axis(axis);
    const std::size_t threads = threads_of(c);
    fs::create_directories(c.out);
    Split split;
    if (data.empty()) {
      const auto& v = cfg.vit_teacher;
      split = generate_split(cfg.train.seed, count, val_count, 8, v.image_size,
                             v.channels);
    } else {
      split = load_split(data);
    }
    check_geometry(split.train, cfg.vit_student, "student");
    akd::Teacher t;
    if (teacher.empty()) {
      auto [model, acc] = pretrain_teacher(cfg, split, threads, c.out);
      spdlog::info("teacher val accuracy {:.4f}", acc);
      akd::save_checkpoint((fs::path(c.out) / "teacher.akd").string(),
                           akd::classifier_checkpoint(model));
      t = akd::Teacher::frozen(model.config, model.params);
    } else {
      t = load_teacher(teacher);
    }
    akd::AblationInputs in;
    in.teacher = &t;
    in.train = &split.train;
    in.val = &split.val;
    in.threads = threads;
    auto rows = akd::run_ablation(cfg, which, in);
    const std::string csv = akd::ablation_csv(rows);
    const auto path = (fs::path(c.out) / ("ablation_" + axis + ".csv")).string();
    akd::write_file(path, std::vector<std::uint8_t>(csv.begin(), csv.end()));
    std::cout << csv << std::flush;
    return kOk;
  }
};

void configure_logging() {
  auto logger = spdlog::stderr_color_mt("akd");
  spdlog::set_default_logger(logger);
  const char* env = std::getenv("AKD_LOG");
  const std::string level = env ? env : "info";
  if (level == "error") {
    spdlog::set_level(spdlog::level::err);
  } else if (level == "debug") {
    spdlog::set_level(spdlog::level::debug);
  } else {
    if (level != "info") spdlog::warn("AKD_LOG={} not recognized, using info", level);
    spdlog::set_level(spdlog::level::info);
  }
}

}  // namespace

int main(int argc, char** argv) {
  configure_logging();
  CLI::App app{"attention-guided distillation for vision transformers"};
  app.require_subcommand(1);

  GenData gen;
  auto* cmd = app.add_subcommand("gen-data", "write synthetic train/val splits");
  add_common(cmd, gen.c, true);
  cmd->add_option("--count", gen.count, "training images");
  cmd->add_option("--val-count", gen.val_count, "validation images");
  cmd->add_option("--classes", gen.classes);
  cmd->add_option("--image-size", gen.image_size);
  cmd->add_option("--channels", gen.channels);

  MakeTeacher mt;
  cmd = app.add_subcommand("make-teacher", "supervised pretraining of the teacher");
  add_common(cmd, mt.c, true);
  cmd->add_option("--data", mt.data, "directory with train.bin and val.bin")->required();

  Distill dist;
  auto* dcmd = app.add_subcommand("distill", "distill a student from a teacher");
  add_common(dcmd, dist.c, true);
  dcmd->add_option("--teacher", dist.teacher)->required()->check(CLI::ExistingFile);
  dcmd->add_option("--data", dist.data)->required();

  Eval knn;
  auto* kcmd = app.add_subcommand("eval-knn", "weighted k-NN accuracy");
  add_common(kcmd, knn.c, false);
  kcmd->add_option("--out", knn.c.out, "also save feature banks here");
  kcmd->add_option("--ckpt", knn.ckpt)->required()->check(CLI::ExistingFile);
  kcmd->add_option("--data", knn.data)->required();

  Eval lin;
  lin.linear = true;
  auto* lcmd = app.add_subcommand("eval-linear", "linear probe accuracy");
  add_common(lcmd, lin.c, false);
  lcmd->add_option("--out", lin.c.out, "also save feature banks here");
  lcmd->add_option("--ckpt", lin.ckpt)->required()->check(CLI::ExistingFile);
  lcmd->add_option("--data", lin.data)->required();

  GradCheck gc;
  auto* gcmd = app.add_subcommand("grad-check", "finite-difference gradient suite");
  add_common(gcmd, gc.c, false);
  gcmd->add_option("--seeds", gc.seeds, "number of consecutive seeds");

  ExportAttn ea;
  auto* ecmd = app.add_subcommand("export-attn", "class-token attention heatmaps");
  add_common(ecmd, ea.c, true);
  ecmd->add_option("--ckpt", ea.ckpt)->required()->check(CLI::ExistingFile);
  ecmd->add_option("--image", ea.image, "dataset file or binary PGM/PPM")
      ->required()
      ->check(CLI::ExistingFile);
  ecmd->add_option("--index", ea.index, "sample index in a dataset file");
  ecmd->add_option("--layer", ea.layer, "0-based layer, default last");
  ecmd->add_option("--reference", ea.reference, "model to compare against")
      ->check(CLI::ExistingFile);

  Ablate ab;
  auto* acmd = app.add_subcommand("ablate", "run one ablation axis, write CSV");
  add_common(acmd, ab.c, true);
  acmd->add_option("--axis", ab.axis)
      ->required()
      ->check(CLI::IsMember({"architecture", "aggregation", "loss"}));
  acmd->add_option("--teacher", ab.teacher, "pretrained teacher checkpoint")
      ->check(CLI::ExistingFile);
  acmd->add_option("--data", ab.data, "directory with train.bin and val.bin");
  acmd->add_option("--count", ab.count, "generated training images");
  acmd->add_option("--val-count", ab.val_count, "generated validation images");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (app.got_subcommand("gen-data")) return gen.run();
    if (app.got_subcommand("make-teacher")) return mt.run();
    if (app.got_subcommand("distill")) return dist.run();
    if (app.got_subcommand("eval-knn")) return knn.run();
    if (app.got_subcommand("eval-linear")) return lin.run();
    if (app.got_subcommand("grad-check")) return gc.run();
    if (app.got_subcommand("export-attn")) return ea.run();
    if (app.got_subcommand("ablate")) return ab.run();
  } catch (const akd::ConfigError& e) {
    spdlog::error("invalid config: {}", e.what());
    return kBadConfig;
  } catch (const akd::FormatError& e) {
    spdlog::error("{}", e.what());
    return kBadFile;
  } catch (const akd::UnsupportedError& e) {
    spdlog::error("unsupported: {}", e.what());
    return kUnsupported;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kFailed;
  }
  return kFailed;
}
