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

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "akd/checkpoint.hpp"
#include "akd/data.hpp"
#include "akd/distill.hpp"
#include "akd/tensor.hpp"
#include "akd/vit.hpp"

namespace akd {

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.05;
};

struct TrainConfig {
  std::size_t batch_size = 64;
  std::size_t total_epochs = 100;
  /// Unset: 40 epochs, scaled by total_epochs / 200 for shorter runs.
  std::optional<double> warmup_epochs;
  /// base_lr = lr_scale * batch_size / 256
  double lr_scale = 1.5e-4;
  double final_lr = 0.0;
  AdamWConfig adamw;
  std::uint64_t seed = 0;
  /// Random crop + horizontal flip, one view per sample.
  bool augment = true;
  /// Write a checkpoint every this many epochs (0: final only).
  std::size_t checkpoint_every = 0;
  /// Samples per gradient shard. Shards are reduced in index order, which
  /// keeps results independent of the worker count.
  std::size_t shard_size = 8;

  double base_lr() const;
  double warmup() const;
  void validate() const;
};

/// Linear warmup to base_lr, then cosine decay to final_lr; fraction in [0,1].
double lr_at(double fraction, const TrainConfig& cfg);

struct OptimizerState {
  std::vector<std::string> names;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  std::uint64_t step = 0;

  static OptimizerState for_params(const std::vector<NamedParam>& params);
};

/// Gradient buffers of each parameter (zeros where nothing accumulated).
std::vector<std::vector<double>> collect_grads(const std::vector<NamedParam>& params);

/// Decoupled-decay AdamW with bias correction. Parameters with decay ==
/// false skip the decay term; trainable == false are left untouched.
/// Throws NumericError naming the parameter on a non-finite gradient.
void adamw_step(const std::vector<NamedParam>& params,
                const std::vector<std::vector<double>>& grads,
                OptimizerState& state, double lr, const AdamWConfig& cfg);

/// Frozen model providing targets. Parameters are detached on construction.
struct Teacher {
  ViTConfig config;
  ViTParams params;

  static Teacher frozen(const ViTConfig& config, const ViTParams& params);
  /// Order-sensitive FNV-1a hash over every parameter's bytes.
  std::uint64_t fingerprint() const;
};

struct Student {
  ViTConfig config;
  ViTParams params;
  Projector projector;

  static Student create(const ViTConfig& config, std::size_t teacher_dim,
                        std::size_t projector_depth, std::uint64_t seed);
  std::vector<NamedParam> named() const;
  Student alias() const;
  Student clone() const;
};

struct TeacherTargets {
  Tensor class_token;
  Tensor patch_tokens;
  AttentionRecord attention;  // last layer only unless all layers are used
};

TeacherTargets teacher_targets(const Teacher& teacher, const Tensor& image,
                               const DistillConfig& cfg);

struct SampleLoss {
  Tensor pa;
  Tensor ag;
  Tensor total;
};

/// pa (+ patch-token term when enabled) + lambda * ag for one view. With
/// lambda == 0 the ag value is still reported but not differentiated.
SampleLoss distill_sample_loss(const TeacherTargets& targets,
                               const Student& student, const Tensor& image,
                               const DistillConfig& cfg);

struct EpochMetrics {
  std::size_t epoch = 0;  // 1-based
  double lr = 0.0;        // rate of the last step in the epoch
  double loss_pa = 0.0;
  double loss_ag = 0.0;
  double loss_total = 0.0;
  std::size_t views = 0;  // student forward passes in this epoch
  std::size_t steps = 0;
  double wall_time_s = 0.0;
};

/// One JSON object, no trailing newline.
std::string metrics_json(const EpochMetrics& m);

struct EpochContext {
  std::size_t epoch = 0;  // 0-based
  std::size_t threads = 1;
  /// Per-sample teacher targets for un-augmented runs, or nullptr.
  const std::vector<TeacherTargets>* cached_targets = nullptr;
};

EpochMetrics distill_epoch(const Teacher& teacher, Student& student,
                           OptimizerState& state, const Dataset& data,
                           const DistillConfig& distill,
                           const TrainConfig& train, const EpochContext& ctx);

std::vector<TeacherTargets> precompute_targets(const Teacher& teacher,
                                               const Dataset& data,
                                               const DistillConfig& cfg,
                                               std::size_t threads);

struct DistillRun {
  Teacher teacher;
  Student student;
  DistillConfig distill;
  TrainConfig train;
  const Dataset* data = nullptr;
  std::string out_dir;  // empty: nothing written
  std::size_t threads = 1;
  std::function<void(const EpochMetrics&)> on_epoch;
};

struct DistillResult {
  Student student;
  std::vector<EpochMetrics> history;
  std::vector<std::string> checkpoints;
};

/// Trains for train.total_epochs. With an output directory, appends one line
/// per epoch to metrics.jsonl and writes checkpoint_epoch_<n>.akd and
/// final.akd.
DistillResult run_distillation(DistillRun run);

/// Student weights, projector and architecture record.
Checkpoint student_checkpoint(const Student& student);
Student student_from_checkpoint(const Checkpoint& ckpt);

/// ViT with a linear head on the class token, for supervised pretraining.
struct Classifier {
  ViTConfig config;
  ViTParams params;
  Tensor head_w;  // [D x classes]
  Tensor head_b;

  static Classifier create(const ViTConfig& config, std::size_t classes,
                           std::uint64_t seed);
  std::vector<NamedParam> named() const;
  Classifier alias() const;
  Tensor logits(const Tensor& image) const;
};

struct PretrainMetrics {
  std::size_t epoch = 0;
  double lr = 0.0;
  double loss = 0.0;
  double train_accuracy = 0.0;
  double wall_time_s = 0.0;
};

/// Cross-entropy training of a classifier.
std::vector<PretrainMetrics> pretrain_classifier(
    Classifier& model, const Dataset& data, const TrainConfig& train,
    std::size_t threads,
    const std::function<void(const PretrainMetrics&)>& on_epoch = {});

double classifier_accuracy(const Classifier& model, const Dataset& data,
                           std::size_t threads);

Checkpoint classifier_checkpoint(const Classifier& model);
Classifier classifier_from_checkpoint(const Checkpoint& ckpt);

}  // namespace akd
