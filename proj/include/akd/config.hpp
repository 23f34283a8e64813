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
#include <string>

#include <json.hpp>

#include "akd/distill.hpp"
#include "akd/eval.hpp"
#include "akd/trainer.hpp"
#include "akd/vit.hpp"

namespace akd {

struct EvalConfig {
  std::size_t knn_k = 20;
  double knn_tau = 0.07;
  LinearProbeConfig probe;
};

/// Everything a command needs besides file paths. Sections: vit_teacher,
/// vit_student, distill, train (with a nested train.pretrain block for the
/// supervised teacher), eval.
struct RunConfig {
  ViTConfig vit_teacher;
  ViTConfig vit_student;
  DistillConfig distill;
  std::size_t projector_depth = 4;
  TrainConfig train;
  TrainConfig pretrain;
  EvalConfig eval;

  /// Toy-scale defaults: 6x4 teacher on 8-pixel patches, 4x2 student on
  /// 16-pixel patches.
  static RunConfig defaults();
  /// Cross-section checks (matching image geometry, etc.).
  void validate() const;
  /// Sets every seed in the bundle.
  void set_seed(std::uint64_t seed);
};

/// Missing keys keep their defaults; unknown keys and type errors throw
/// ConfigError whose message starts with the offending path, e.g.
/// "$.train.batch_size: expected a positive integer".
RunConfig parse_run_config(const nlohmann::json& doc);
RunConfig load_run_config(const std::string& path);
nlohmann::ordered_json to_json(const RunConfig& cfg);

}  // namespace akd
