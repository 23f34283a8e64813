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

#include "akd/config.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <set>

#include "akd/errors.hpp"

namespace akd {

namespace {

using nlohmann::json;

std::string describe(const json& v) {
  switch (v.type()) {
    case json::value_t::null: return "null";
    case json::value_t::boolean: return "a boolean";
    case json::value_t::string: return "a string";
    case json::value_t::array: return "an array";
    case json::value_t::object: return "an object";
    default: return "a number";
  }
}

// Reads the keys of one JSON object, remembering which were consumed so the
// rest can be reported as unknown.
class Section {
 public:
  Section(const json& node, std::string path) : node_(node), path_(std::move(path)) {
    if (!node_.is_object()) fail(path_, "expected an object, got " + describe(node_));
  }

  [[noreturn]] static void fail(const std::string& path, const std::string& msg) {
    throw ConfigError(path + ": " + msg);
  }

  std::string at(const std::string& key) const { return path_ + "." + key; }

  const json* find(const std::string& key) {
    known_.insert(key);
    auto it = node_.find(key);
    return it == node_.end() ? nullptr : &*it;
  }

  void size(const std::string& key, std::size_t& out, bool allow_zero = false) {
    const json* v = find(key);
    if (!v) return;
    const bool ok = v->is_number_unsigned() ||
                    (v->is_number_integer() && v->get<std::int64_t>() >= 0);
    if (!ok || (!allow_zero && v->get<std::uint64_t>() == 0)) {
      fail(at(key), std::string("expected a ") +
                        (allow_zero ? "non-negative" : "positive") +
                        " integer, got " + v->dump());
    }
    out = static_cast<std::size_t>(v->get<std::uint64_t>());
  }

  void u64(const std::string& key, std::uint64_t& out) {
    std::size_t v = out;
    size(key, v, true);
    out = v;
  }

  void real(const std::string& key, double& out) {
    const json* v = find(key);
    if (!v) return;
    if (!v->is_number() || !std::isfinite(v->get<double>())) {
      fail(at(key), "expected a finite number, got " + v->dump());
    }
    out = v->get<double>();
  }

  void flag(const std::string& key, bool& out) {
    const json* v = find(key);
    if (!v) return;
    if (!v->is_boolean()) fail(at(key), "expected a boolean, got " + v->dump());
    out = v->get<bool>();
  }

  template <class T, class Parse>
  void choice(const std::string& key, T& out, Parse parse) {
    const json* v = find(key);
    if (!v) return;
    if (!v->is_string()) fail(at(key), "expected a string, got " + v->dump());
    try {
      out = parse(v->get<std::string>());
    } catch (const ConfigError& e) {
      fail(at(key), e.what());
    }
  }

  /// Rejects keys never asked for.
  void finish() const {
    for (auto it = node_.begin(); it != node_.end(); ++it) {
      if (!known_.count(it.key())) fail(at(it.key()), "unknown key");
    }
  }

 private:
  const json& node_;
  std::string path_;
  std::set<std::string> known_;
};

SquaredError parse_squared_error(const std::string& s) {
  if (s == "mean") return SquaredError::kMean;
  if (s == "sum") return SquaredError::kSum;
  throw ConfigError("expected \"mean\" or \"sum\", got \"" + s + "\"");
}

HeadReduction parse_head_reduction(const std::string& s) {
  if (s == "sum") return HeadReduction::kSum;
  if (s == "mean") return HeadReduction::kMean;
  throw ConfigError("expected \"sum\" or \"mean\", got \"" + s + "\"");
}

void read_vit(const json& node, const std::string& path, ViTConfig& c) {
  Section s(node, path);
  s.size("image_size", c.image_size);
  s.size("patch_size", c.patch_size);
  s.size("channels", c.channels);
  s.size("layers", c.layers);
  s.size("heads", c.heads);
  s.size("head_dim", c.head_dim);
  s.size("mlp_hidden", c.mlp_hidden, true);
  s.choice("block_form", c.block_form, parse_block_form);
  s.choice("pos_embed", c.pos_embed, parse_pos_embed);
  s.finish();
  try {
    c.validate();
  } catch (const ConfigError& e) {
    Section::fail(path, e.what());
  }
}

void read_train(const json& node, const std::string& path, TrainConfig& t,
                TrainConfig* pretrain) {
  Section s(node, path);
  s.size("batch_size", t.batch_size);
  s.size("total_epochs", t.total_epochs);
  if (const json* w = s.find("warmup_epochs")) {
    if (w->is_null()) {
      t.warmup_epochs.reset();
    } else if (w->is_number() && w->get<double>() >= 0.0) {
      t.warmup_epochs = w->get<double>();
    } else {
      Section::fail(s.at("warmup_epochs"),
                    "expected a non-negative number or null, got " + w->dump());
    }
  }
  s.real("lr_scale", t.lr_scale);
  s.real("final_lr", t.final_lr);
  s.real("beta1", t.adamw.beta1);
  s.real("beta2", t.adamw.beta2);
  s.real("eps", t.adamw.eps);
  s.real("weight_decay", t.adamw.weight_decay);
  s.u64("seed", t.seed);
  s.flag("augment", t.augment);
  s.size("checkpoint_every", t.checkpoint_every, true);
  s.size("shard_size", t.shard_size);
  if (pretrain) {
    if (const json* p = s.find("pretrain")) read_train(*p, s.at("pretrain"), *pretrain, nullptr);
  }
  s.finish();
  try {
    t.validate();
  } catch (const ConfigError& e) {
    Section::fail(path, e.what());
  }
}

nlohmann::ordered_json vit_json(const ViTConfig& c) {
  nlohmann::ordered_json j;
  j["image_size"] = c.image_size;
  j["patch_size"] = c.patch_size;
  j["channels"] = c.channels;
  j["layers"] = c.layers;
  j["heads"] = c.heads;
  j["head_dim"] = c.head_dim;
  j["mlp_hidden"] = c.mlp_hidden;
  j["block_form"] = to_string(c.block_form);
  j["pos_embed"] = to_string(c.pos_embed);
  return j;
}

nlohmann::ordered_json train_json(const TrainConfig& t) {
  nlohmann::ordered_json j;
  j["batch_size"] = t.batch_size;
  j["total_epochs"] = t.total_epochs;
  if (t.warmup_epochs) {
    j["warmup_epochs"] = *t.warmup_epochs;
  } else {
    j["warmup_epochs"] = nullptr;
  }
  j["lr_scale"] = t.lr_scale;
  j["final_lr"] = t.final_lr;
  j["beta1"] = t.adamw.beta1;
  j["beta2"] = t.adamw.beta2;
  j["eps"] = t.adamw.eps;
  j["weight_decay"] = t.adamw.weight_decay;
  j["seed"] = t.seed;
  j["augment"] = t.augment;
  j["checkpoint_every"] = t.checkpoint_every;
  j["shard_size"] = t.shard_size;
  return j;
}

}  // namespace

RunConfig RunConfig::defaults() {
  RunConfig c;
  c.vit_teacher.patch_size = 8;
  c.vit_teacher.layers = 6;
  c.vit_teacher.heads = 4;
  c.vit_teacher.head_dim = 8;
  c.vit_student.patch_size = 16;
  c.vit_student.layers = 4;
  c.vit_student.heads = 2;
  c.vit_student.head_dim = 16;
  c.pretrain.total_epochs = 20;
  c.pretrain.warmup_epochs = 2.0;
  c.pretrain.lr_scale = 4e-3;  // 1e-3 at batch 64
  return c;
}

void RunConfig::validate() const {
  vit_teacher.validate();
  vit_student.validate();
  distill.validate();
  train.validate();
  pretrain.validate();
  if (vit_teacher.image_size != vit_student.image_size ||
      vit_teacher.channels != vit_student.channels) {
    throw ConfigError("$.vit_student: image geometry differs from $.vit_teacher");
  }
  if (projector_depth < 1) throw ConfigError("$.distill.projector_depth: must be >= 1");
  if (eval.knn_k < 1 || !(eval.knn_tau > 0.0)) {
    throw ConfigError("$.eval: knn_k must be >= 1 and knn_tau > 0");
  }
}

void RunConfig::set_seed(std::uint64_t seed) {
  train.seed = seed;
  pretrain.seed = seed;
  eval.probe.seed = seed;
}

RunConfig parse_run_config(const nlohmann::json& doc) {
  RunConfig cfg = RunConfig::defaults();
  Section root(doc, "$");
  if (const json* v = root.find("vit_teacher")) read_vit(*v, "$.vit_teacher", cfg.vit_teacher);
  if (const json* v = root.find("vit_student")) read_vit(*v, "$.vit_student", cfg.vit_student);
  if (const json* v = root.find("distill")) {
    Section s(*v, "$.distill");
    auto& d = cfg.distill;
    s.real("lambda", d.lambda);
    s.real("temperature", d.temperature);
    s.real("log_floor", d.log_floor);
    s.choice("interpolation", d.interpolation, parse_interpolation);
    s.choice("aggregation", d.aggregation, parse_aggregation);
    s.choice("attention_layers", d.attention_layers, parse_attention_layers);
    s.flag("align_patch_tokens", d.align_patch_tokens);
    s.choice("squared_error", d.squared_error, parse_squared_error);
    s.choice("head_reduction", d.head_reduction, parse_head_reduction);
    s.flag("include_class_entry", d.include_class_entry);
    s.size("projector_depth", cfg.projector_depth);
    s.finish();
    try {
      d.validate();
    } catch (const ConfigError& e) {
      Section::fail("$.distill", e.what());
    }
  }
  if (const json* v = root.find("train")) read_train(*v, "$.train", cfg.train, &cfg.pretrain);
  if (const json* v = root.find("eval")) {
    Section s(*v, "$.eval");
    s.size("knn_k", cfg.eval.knn_k);
    s.real("knn_tau", cfg.eval.knn_tau);
    s.size("probe_epochs", cfg.eval.probe.epochs);
    s.real("probe_lr", cfg.eval.probe.lr);
    s.size("probe_batch_size", cfg.eval.probe.batch_size);
    s.real("probe_weight_decay", cfg.eval.probe.weight_decay);
    s.finish();
    if (!(cfg.eval.knn_tau > 0.0)) Section::fail("$.eval.knn_tau", "must be > 0");
    if (!(cfg.eval.probe.lr > 0.0)) Section::fail("$.eval.probe_lr", "must be > 0");
  }
  root.finish();
  cfg.validate();
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open config");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path + ": invalid JSON (" + e.what() + ")");
  }
  return parse_run_config(doc);
}

nlohmann::ordered_json to_json(const RunConfig& cfg) {
  nlohmann::ordered_json j;
  j["vit_teacher"] = vit_json(cfg.vit_teacher);
  j["vit_student"] = vit_json(cfg.vit_student);
  auto& d = j["distill"];
  d["lambda"] = cfg.distill.lambda;
  d["temperature"] = cfg.distill.temperature;
  d["log_floor"] = cfg.distill.log_floor;
  d["interpolation"] = to_string(cfg.distill.interpolation);
  d["aggregation"] = to_string(cfg.distill.aggregation);
  d["attention_layers"] = to_string(cfg.distill.attention_layers);
  d["align_patch_tokens"] = cfg.distill.align_patch_tokens;
  d["squared_error"] = cfg.distill.squared_error == SquaredError::kMean ? "mean" : "sum";
  d["head_reduction"] = cfg.distill.head_reduction == HeadReduction::kSum ? "sum" : "mean";
  d["include_class_entry"] = cfg.distill.include_class_entry;
  d["projector_depth"] = cfg.projector_depth;
  j["train"] = train_json(cfg.train);
  j["train"]["pretrain"] = train_json(cfg.pretrain);
  auto& e = j["eval"];
  e["knn_k"] = cfg.eval.knn_k;
  e["knn_tau"] = cfg.eval.knn_tau;
  e["probe_epochs"] = cfg.eval.probe.epochs;
  e["probe_lr"] = cfg.eval.probe.lr;
  e["probe_batch_size"] = cfg.eval.probe.batch_size;
  e["probe_weight_decay"] = cfg.eval.probe.weight_decay;
  return j;
}

}  // namespace akd
