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

#include "akd/trainer.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <numeric>
#include <random>

#include <json.hpp>

#include "akd/checkpoint.hpp"
#include "akd/errors.hpp"
#include "akd/ops.hpp"
#include "akd/parallel.hpp"

namespace akd {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::vector<std::size_t> shuffled_order(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

// Gradients of (1/|batch|) * sum of per-sample losses. Each shard runs on its
// own replica and tape; shard results are summed in shard order.
template <class Model, class Fn>
std::vector<std::vector<double>> batch_gradients(
    const Model& model, const std::vector<std::size_t>& batch,
    std::size_t shard_size, std::size_t threads, Fn&& per_sample) {
  const std::size_t shards = (batch.size() + shard_size - 1) / shard_size;
  std::vector<std::vector<std::vector<double>>> partial(shards);
  const double weight = 1.0 / static_cast<double>(batch.size());
  parallel_for(shards, threads, [&](std::size_t s) {
    Model replica = model.alias();
    Tape tape;
    TapeScope scope(tape);
    Tensor acc;
    const std::size_t end = std::min(batch.size(), (s + 1) * shard_size);
    for (std::size_t pos = s * shard_size; pos < end; ++pos) {
      Tensor loss = per_sample(replica, pos, batch[pos]);
      acc = acc.defined() ? add(acc, loss) : loss;
    }
    tape.backward(scale(acc, weight));
    partial[s] = collect_grads(replica.named());
  });
  std::vector<std::vector<double>> total = std::move(partial[0]);
  for (std::size_t s = 1; s < shards; ++s) {
    for (std::size_t p = 0; p < total.size(); ++p) {
      auto& dst = total[p];
      const auto& src = partial[s][p];
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
    }
  }
  return total;
}

Tensor view_for(const Dataset& data, std::size_t index, const TrainConfig& train,
                std::size_t epoch) {
  Tensor image = data.image(index);
  if (!train.augment) return image;
  return augment(image, mix_seed(mix_seed(train.seed, epoch + 1), index));
}

void check_compatible(const ViTConfig& model, const Dataset& data,
                      const std::string& what) {
  if (model.image_size != data.height || model.image_size != data.width ||
      model.channels != data.channels) {
    throw ConfigError(what + " expects " + std::to_string(model.channels) + "x" +
                      std::to_string(model.image_size) + "x" +
                      std::to_string(model.image_size) + " images, data has " +
                      std::to_string(data.channels) + "x" +
                      std::to_string(data.height) + "x" +
                      std::to_string(data.width));
  }
}

}  // namespace

double TrainConfig::base_lr() const {
  return lr_scale * static_cast<double>(batch_size) / 256.0;
}

double TrainConfig::warmup() const {
  if (warmup_epochs) return *warmup_epochs;
  if (total_epochs >= 200) return 40.0;
  return 40.0 * static_cast<double>(total_epochs) / 200.0;
}

void TrainConfig::validate() const {
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (total_epochs < 1) throw ConfigError("total_epochs must be >= 1");
  const double w = warmup();
  if (!(w >= 0.0) || !(w < static_cast<double>(total_epochs))) {
    throw ConfigError("warmup_epochs must lie in [0, total_epochs), got " +
                      std::to_string(w));
  }
  if (!(lr_scale > 0.0)) throw ConfigError("lr_scale must be > 0");
  if (!(final_lr >= 0.0)) throw ConfigError("final_lr must be >= 0");
  if (!(adamw.beta1 >= 0.0 && adamw.beta1 < 1.0) ||
      !(adamw.beta2 >= 0.0 && adamw.beta2 < 1.0)) {
    throw ConfigError("AdamW betas must lie in [0, 1)");
  }
  if (!(adamw.eps > 0.0)) throw ConfigError("AdamW eps must be > 0");
  if (!(adamw.weight_decay >= 0.0)) throw ConfigError("weight_decay must be >= 0");
  if (shard_size < 1) throw ConfigError("shard_size must be >= 1");
}

double lr_at(double fraction, const TrainConfig& cfg) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) {
    throw ContractError("lr_at: fraction " + std::to_string(fraction) +
                        " outside [0, 1]");
  }
  const double base = cfg.base_lr();
  const double w = cfg.warmup() / static_cast<double>(cfg.total_epochs);
  if (fraction < w) return base * fraction / w;
  const double progress = w < 1.0 ? (fraction - w) / (1.0 - w) : 1.0;
  return cfg.final_lr +
         (base - cfg.final_lr) * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

OptimizerState OptimizerState::for_params(const std::vector<NamedParam>& params) {
  OptimizerState s;
  for (const auto& p : params) {
    s.names.push_back(p.name);
    s.m.emplace_back(p.tensor.numel(), 0.0);
    s.v.emplace_back(p.tensor.numel(), 0.0);
  }
  return s;
}

std::vector<std::vector<double>> collect_grads(const std::vector<NamedParam>& params) {
  std::vector<std::vector<double>> out;
  out.reserve(params.size());
  for (const auto& p : params) out.push_back(p.tensor.grad());
  return out;
}

void adamw_step(const std::vector<NamedParam>& params,
                const std::vector<std::vector<double>>& grads,
                OptimizerState& state, double lr, const AdamWConfig& cfg) {
  if (grads.size() != params.size() || state.names.size() != params.size()) {
    throw ContractError("adamw_step: " + std::to_string(params.size()) +
                        " parameters, " + std::to_string(grads.size()) +
                        " gradients, " + std::to_string(state.names.size()) +
                        " optimizer slots");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& p = params[i];
    if (state.names[i] != p.name || state.m[i].size() != p.tensor.numel()) {
      throw ContractError("optimizer slot " + std::to_string(i) + " ('" +
                          state.names[i] + "') does not match parameter '" +
                          p.name + "'");
    }
    if (grads[i].size() != p.tensor.numel()) {
      throw DimensionError("gradient for '" + p.name + "' has " +
                           std::to_string(grads[i].size()) + " values, expected " +
                           std::to_string(p.tensor.numel()));
    }
    for (std::size_t j = 0; j < grads[i].size(); ++j) {
      if (!std::isfinite(grads[i][j])) {
        throw NumericError("non-finite gradient in parameter '" + p.name +
                           "' at flat index " + std::to_string(j) + " (value " +
                           std::to_string(grads[i][j]) + ", step " +
                           std::to_string(state.step + 1) + ")");
      }
    }
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(cfg.beta1, t);
  const double bc2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i].trainable) continue;
    Tensor handle = params[i].tensor;
    auto w = handle.mutable_data();
    auto& m = state.m[i];
    auto& v = state.v[i];
    const auto& g = grads[i];
    const double decay = params[i].decay ? lr * cfg.weight_decay : 0.0;
    for (std::size_t j = 0; j < w.size(); ++j) {
      w[j] -= decay * w[j];
      m[j] = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * g[j];
      v[j] = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * g[j] * g[j];
      w[j] -= lr * (m[j] / bc1) / (std::sqrt(v[j] / bc2) + cfg.eps);
    }
  }
}

Teacher Teacher::frozen(const ViTConfig& config, const ViTParams& params) {
  Teacher t;
  t.config = config;
  t.params = params.clone();
  for (const auto& np : t.params.named()) Tensor(np.tensor).set_requires_grad(false);
  return t;
}

std::uint64_t Teacher::fingerprint() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&h](const void* data, std::size_t size) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    for (std::size_t i = 0; i < size; ++i) {
      h ^= p[i];
      h *= 0x100000001b3ULL;
    }
  };
  for (const auto& np : params.named()) {
    feed(np.name.data(), np.name.size());
    auto d = np.tensor.data();
    feed(d.data(), d.size() * sizeof(double));
  }
  return h;
}

Student Student::create(const ViTConfig& config, std::size_t teacher_dim,
                        std::size_t projector_depth, std::uint64_t seed) {
  config.validate();
  Student s;
  s.config = config;
  s.params = init_vit(config, seed);
  s.projector = Projector(config.embed_dim(), teacher_dim, projector_depth,
                          mix_seed(seed, 1));
  return s;
}

std::vector<NamedParam> Student::named() const {
  auto out = params.named();
  for (auto& np : projector.named()) out.push_back(std::move(np));
  return out;
}

Student Student::alias() const { return {config, params.alias(), projector.alias()}; }

Student Student::clone() const { return {config, params.clone(), projector.clone()}; }

TeacherTargets teacher_targets(const Teacher& teacher, const Tensor& image,
                               const DistillConfig& cfg) {
  NoGradScope no_grad;
  EncoderOutput out = vit_forward(image, teacher.params, teacher.config);
  TeacherTargets t;
  t.class_token = out.class_token.detach();
  if (cfg.align_patch_tokens) t.patch_tokens = out.patch_tokens.detach();
  t.attention.grid = out.attention.grid;
  if (cfg.attention_layers == AttentionLayers::kLast) {
    t.attention.class_rows.push_back(out.attention.class_rows.back());
  } else {
    t.attention.class_rows = std::move(out.attention.class_rows);
  }
  for (auto& layer : t.attention.class_rows)
    for (auto& row : layer) row = row.detach();
  return t;
}

SampleLoss distill_sample_loss(const TeacherTargets& targets,
                               const Student& student, const Tensor& image,
                               const DistillConfig& cfg) {
  EncoderOutput out = vit_forward(image, student.params, student.config);
  SampleLoss loss;
  loss.pa = pa_loss(targets.class_token, out.class_token, student.projector,
                    cfg.squared_error);
  if (cfg.align_patch_tokens) {
    loss.pa = add(loss.pa, patch_token_alignment(targets.patch_tokens,
                                                 out.patch_tokens,
                                                 student.projector,
                                                 cfg.squared_error));
  }
  if (cfg.lambda == 0.0) {
    NoGradScope no_grad;
    loss.ag = ag_loss_layers(targets.attention, out.attention, cfg);
    loss.total = loss.pa;
  } else {
    loss.ag = ag_loss_layers(targets.attention, out.attention, cfg);
    loss.total = total_loss(loss.pa, loss.ag, cfg.lambda);
  }
  return loss;
}

std::string metrics_json(const EpochMetrics& m) {
  nlohmann::ordered_json j;
  j["epoch"] = m.epoch;
  j["lr"] = m.lr;
  j["loss_pa"] = m.loss_pa;
  j["loss_ag"] = m.loss_ag;
  j["loss_total"] = m.loss_total;
  j["views"] = m.views;
  j["steps"] = m.steps;
  j["wall_time_s"] = m.wall_time_s;
  return j.dump();
}

std::vector<TeacherTargets> precompute_targets(const Teacher& teacher,
                                               const Dataset& data,
                                               const DistillConfig& cfg,
                                               std::size_t threads) {
  std::vector<TeacherTargets> out(data.size());
  parallel_for(data.size(), threads, [&](std::size_t i) {
    out[i] = teacher_targets(teacher, data.image(i), cfg);
  });
  return out;
}

EpochMetrics distill_epoch(const Teacher& teacher, Student& student,
                           OptimizerState& state, const Dataset& data,
                           const DistillConfig& distill,
                           const TrainConfig& train, const EpochContext& ctx) {
  const auto start = Clock::now();
  const std::size_t n = data.size();
  if (n == 0) throw ContractError("distill_epoch: empty dataset");
  if (ctx.cached_targets && ctx.cached_targets->size() != n) {
    throw ContractError("cached teacher targets do not match the dataset");
  }
  const auto order = shuffled_order(n, mix_seed(train.seed, 0x5eed0000 + ctx.epoch));
  const std::size_t steps = (n + train.batch_size - 1) / train.batch_size;
  const double total_steps = static_cast<double>(steps * train.total_epochs);
  const auto master = student.named();

  EpochMetrics m;
  m.epoch = ctx.epoch + 1;
  for (std::size_t s = 0; s < steps; ++s) {
    const std::vector<std::size_t> batch(
        order.begin() + s * train.batch_size,
        order.begin() + std::min(n, (s + 1) * train.batch_size));
    std::vector<double> pa(batch.size()), ag(batch.size()), total(batch.size());
    auto grads = batch_gradients(
        student, batch, train.shard_size, ctx.threads,
        [&](const Student& replica, std::size_t pos, std::size_t index) {
          Tensor image = view_for(data, index, train, ctx.epoch);
          SampleLoss loss;
          if (ctx.cached_targets) {
            loss = distill_sample_loss((*ctx.cached_targets)[index], replica, image,
                                       distill);
          } else {
            loss = distill_sample_loss(teacher_targets(teacher, image, distill),
                                       replica, image, distill);
          }
          pa[pos] = loss.pa.item();
          ag[pos] = loss.ag.item();
          total[pos] = loss.total.item();
          return loss.total;
        });
    const double fraction =
        static_cast<double>(ctx.epoch * steps + s) / total_steps;
    m.lr = lr_at(fraction, train);
    adamw_step(master, grads, state, m.lr, train.adamw);
    for (std::size_t i = 0; i < batch.size(); ++i) {
      m.loss_pa += pa[i];
      m.loss_ag += ag[i];
      m.loss_total += total[i];
    }
    m.views += batch.size();
  }
  m.steps = steps;
  m.loss_pa /= static_cast<double>(n);
  m.loss_ag /= static_cast<double>(n);
  m.loss_total /= static_cast<double>(n);
  m.wall_time_s = seconds_since(start);
  return m;
}

Checkpoint student_checkpoint(const Student& student) {
  Checkpoint ckpt;
  append_vit(ckpt, student.params, student.config);
  for (const auto& np : student.projector.named())
    ckpt.push_back({np.name, np.tensor.detach(), DType::kF64});
  return ckpt;
}

Student student_from_checkpoint(const Checkpoint& ckpt) {
  auto [config, params] = load_vit(ckpt);
  Student s;
  s.config = config;
  s.params = params;
  s.projector = Projector::from_named(as_named(ckpt));
  if (s.projector.depth() == 0) throw ConfigError("checkpoint has no projector");
  return s;
}

DistillResult run_distillation(DistillRun run) {
  namespace fs = std::filesystem;
  if (run.data == nullptr || run.data->size() == 0) {
    throw ConfigError("run_distillation needs a non-empty dataset");
  }
  run.distill.validate();
  run.train.validate();
  run.teacher.config.validate();
  run.student.config.validate();
  audit_params(run.teacher.params, run.teacher.config);
  audit_params(run.student.params, run.student.config);
  check_compatible(run.teacher.config, *run.data, "teacher");
  check_compatible(run.student.config, *run.data, "student");
  if (run.student.projector.in_dim() != run.student.config.embed_dim() ||
      run.student.projector.out_dim() != run.teacher.config.embed_dim()) {
    throw ConfigError("projector maps " + std::to_string(run.student.projector.in_dim()) +
                      " -> " + std::to_string(run.student.projector.out_dim()) +
                      ", models need " + std::to_string(run.student.config.embed_dim()) +
                      " -> " + std::to_string(run.teacher.config.embed_dim()));
  }
  if (run.distill.attention_layers == AttentionLayers::kAll &&
      run.teacher.config.layers != run.student.config.layers) {
    throw UnsupportedError("all-layer attention guidance needs equal depth (teacher " +
                           std::to_string(run.teacher.config.layers) + ", student " +
                           std::to_string(run.student.config.layers) + ")");
  }
  if (run.distill.align_patch_tokens &&
      run.teacher.config.num_patches() != run.student.config.num_patches()) {
    throw UnsupportedError("patch-token alignment needs equal token counts (teacher " +
                           std::to_string(run.teacher.config.num_patches()) +
                           ", student " +
                           std::to_string(run.student.config.num_patches()) + ")");
  }
  // The caller's teacher tensors must never be touched by training.
  const Teacher teacher = Teacher::frozen(run.teacher.config, run.teacher.params);

  DistillResult result;
  result.student = run.student;
  OptimizerState state = OptimizerState::for_params(result.student.named());

  std::ofstream metrics;
  if (!run.out_dir.empty()) {
    fs::create_directories(run.out_dir);
    metrics.open(fs::path(run.out_dir) / "metrics.jsonl", std::ios::trunc);
    if (!metrics) throw ConfigError("cannot write metrics in " + run.out_dir);
  }

  std::vector<TeacherTargets> cache;
  EpochContext ctx;
  ctx.threads = run.threads;
  if (!run.train.augment) {
    cache = precompute_targets(teacher, *run.data, run.distill, run.threads);
    ctx.cached_targets = &cache;
  }

  for (std::size_t e = 0; e < run.train.total_epochs; ++e) {
    ctx.epoch = e;
    EpochMetrics m = distill_epoch(teacher, result.student, state, *run.data,
                                   run.distill, run.train, ctx);
    spdlog::info("distill epoch {}/{} lr {:.3e} pa {:.5f} ag {:.5f} total {:.5f} ({:.1f}s)",
                 m.epoch, run.train.total_epochs, m.lr, m.loss_pa, m.loss_ag,
                 m.loss_total, m.wall_time_s);
    if (metrics.is_open()) {
      metrics << metrics_json(m) << '\n';
      metrics.flush();
    }
    if (!run.out_dir.empty() && run.train.checkpoint_every > 0 &&
        m.epoch % run.train.checkpoint_every == 0) {
      char name[64];
      std::snprintf(name, sizeof name, "checkpoint_epoch_%04zu.akd", m.epoch);
      const std::string path = (fs::path(run.out_dir) / name).string();
      save_checkpoint(path, student_checkpoint(result.student));
      result.checkpoints.push_back(path);
    }
    result.history.push_back(m);
    if (run.on_epoch) run.on_epoch(m);
  }
  if (!run.out_dir.empty()) {
    const std::string path = (fs::path(run.out_dir) / "final.akd").string();
    save_checkpoint(path, student_checkpoint(result.student));
    result.checkpoints.push_back(path);
  }
  return result;
}

Classifier Classifier::create(const ViTConfig& config, std::size_t classes,
                              std::uint64_t seed) {
  if (classes < 2) throw ConfigError("a classifier needs at least 2 classes");
  Classifier c;
  c.config = config;
  c.params = init_vit(config, seed);
  std::mt19937_64 rng(mix_seed(seed, 2));
  std::normal_distribution<double> nd(0.0, 0.02);
  std::vector<double> w(config.embed_dim() * classes);
  for (auto& v : w) v = nd(rng);
  c.head_w = Tensor::from({config.embed_dim(), classes}, std::move(w), true);
  c.head_b = Tensor::zeros({classes}, true);
  return c;
}

std::vector<NamedParam> Classifier::named() const {
  auto out = params.named();
  out.push_back({"head.weight", head_w, true, true});
  out.push_back({"head.bias", head_b, false, true});
  return out;
}

Classifier Classifier::alias() const {
  return {config, params.alias(), head_w.alias(), head_b.alias()};
}

Tensor Classifier::logits(const Tensor& image) const {
  EncoderOutput out = vit_forward(image, params, config);
  const std::size_t d = config.embed_dim();
  Tensor row = add_bias(matmul(reshape(out.class_token, {1, d}), head_w), head_b);
  return reshape(row, {head_b.numel()});
}

std::vector<PretrainMetrics> pretrain_classifier(
    Classifier& model, const Dataset& data, const TrainConfig& train,
    std::size_t threads, const std::function<void(const PretrainMetrics&)>& on_epoch) {
  train.validate();
  check_compatible(model.config, data, "classifier");
  const std::size_t n = data.size();
  if (data.num_classes() > model.head_b.numel()) {
    throw ConfigError("dataset has more classes than the classifier head");
  }
  const auto master = model.named();
  OptimizerState state = OptimizerState::for_params(master);
  const std::size_t steps = (n + train.batch_size - 1) / train.batch_size;
  const double total_steps = static_cast<double>(steps * train.total_epochs);
  std::vector<PretrainMetrics> history;
  for (std::size_t e = 0; e < train.total_epochs; ++e) {
    const auto start = Clock::now();
    const auto order = shuffled_order(n, mix_seed(train.seed, 0x7ea0000 + e));
    PretrainMetrics m;
    m.epoch = e + 1;
    std::size_t correct = 0;
    for (std::size_t s = 0; s < steps; ++s) {
      const std::vector<std::size_t> batch(
          order.begin() + s * train.batch_size,
          order.begin() + std::min(n, (s + 1) * train.batch_size));
      std::vector<double> losses(batch.size());
      std::vector<char> hit(batch.size());
      auto grads = batch_gradients(
          model, batch, train.shard_size, threads,
          [&](const Classifier& replica, std::size_t pos, std::size_t index) {
            Tensor logits = replica.logits(view_for(data, index, train, e));
            const std::size_t label = data.labels[index];
            auto lv = logits.data();
            hit[pos] = static_cast<std::size_t>(
                           std::max_element(lv.begin(), lv.end()) - lv.begin()) == label;
            Tensor nll = scale(slice(log_softmax(logits, 0), 0, label, label + 1), -1.0);
            losses[pos] = nll.at(0);
            return sum(nll);
          });
      m.lr = lr_at(static_cast<double>(e * steps + s) / total_steps, train);
      adamw_step(master, grads, state, m.lr, train.adamw);
      for (std::size_t i = 0; i < batch.size(); ++i) {
        m.loss += losses[i];
        correct += hit[i] ? 1 : 0;
      }
    }
    m.loss /= static_cast<double>(n);
    m.train_accuracy = static_cast<double>(correct) / static_cast<double>(n);
    m.wall_time_s = seconds_since(start);
    spdlog::info("pretrain epoch {}/{} lr {:.3e} loss {:.4f} acc {:.4f} ({:.1f}s)",
                 m.epoch, train.total_epochs, m.lr, m.loss, m.train_accuracy,
                 m.wall_time_s);
    history.push_back(m);
    if (on_epoch) on_epoch(m);
  }
  return history;
}

double classifier_accuracy(const Classifier& model, const Dataset& data,
                           std::size_t threads) {
  check_compatible(model.config, data, "classifier");
  if (data.size() == 0) throw ContractError("accuracy of an empty dataset");
  std::vector<char> hit(data.size());
  parallel_for(data.size(), threads, [&](std::size_t i) {
    NoGradScope no_grad;
    auto lv = model.logits(data.image(i)).to_vector();
    hit[i] = static_cast<std::size_t>(std::max_element(lv.begin(), lv.end()) -
                                      lv.begin()) == data.labels[i];
  });
  return static_cast<double>(std::count(hit.begin(), hit.end(), 1)) /
         static_cast<double>(data.size());
}

Checkpoint classifier_checkpoint(const Classifier& model) {
  Checkpoint ckpt;
  append_vit(ckpt, model.params, model.config);
  ckpt.push_back({"head.weight", model.head_w.detach(), DType::kF64});
  ckpt.push_back({"head.bias", model.head_b.detach(), DType::kF64});
  return ckpt;
}

Classifier classifier_from_checkpoint(const Checkpoint& ckpt) {
  auto [config, params] = load_vit(ckpt);
  Classifier c;
  c.config = config;
  c.params = params;
  c.head_w = find_tensor(ckpt, "head.weight");
  c.head_b = find_tensor(ckpt, "head.bias");
  if (c.head_w.shape() != Shape{config.embed_dim(), c.head_b.numel()}) {
    throw ConfigError("head.weight has shape " + to_string(c.head_w.shape()));
  }
  c.head_w.set_requires_grad(true);
  c.head_b.set_requires_grad(true);
  return c;
}

}  // namespace akd
