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
#include <functional>
#include <string>
#include <vector>

#include "akd/config.hpp"
#include "akd/data.hpp"
#include "akd/trainer.hpp"

namespace akd {

enum class AblationAxis { kArchitecture, kAggregation, kLoss };

std::string to_string(AblationAxis axis);
AblationAxis parse_ablation_axis(const std::string& text);

struct AblationVariant {
  std::string name;
  ViTConfig student;
  DistillConfig distill;
};

/// Variants for one axis, derived from the configured student.
///   architecture: base student, teacher head count, teacher patch size,
///                 both, half depth; each with lambda = 0 and with the
///                 configured lambda.
///   aggregation:  lambda = 0 reference, then log_sum / mean / min / max.
///   loss:         on a student with the teacher's depth and patch size,
///                 lambda = 0, last-layer guidance, all-layer guidance and
///                 patch token alignment.
std::vector<AblationVariant> ablation_variants(const RunConfig& cfg,
                                               AblationAxis axis);

struct AblationRow {
  std::string axis;
  std::string variant;
  std::string student;  // e.g. L4-H2-P16-D32
  std::string ag_case;
  double lambda = 0.0;
  std::string aggregation;
  std::string attention_layers;
  bool patch_tokens = false;
  std::string status;  // ok | unsupported | random_init
  // NaN marks a value that was not measured.
  double knn_top1 = 0.0;
  double linear_top1 = 0.0;
  double loss_pa = 0.0;
  double loss_ag = 0.0;
  double loss_total = 0.0;
  double attention_drift = 0.0;
  double wall_time_s = 0.0;
  std::string note;
};

struct AblationInputs {
  const Teacher* teacher = nullptr;
  const Dataset* train = nullptr;
  const Dataset* val = nullptr;
  std::size_t threads = 1;
  std::function<void(const AblationRow&)> on_row;
};

/// Distills and evaluates every variant. The first row is the randomly
/// initialized base student. Variants the trainer rejects as unsupported
/// are reported, not thrown.
std::vector<AblationRow> run_ablation(const RunConfig& cfg, AblationAxis axis,
                                      const AblationInputs& inputs);

std::string ablation_csv_header();
std::string ablation_csv_line(const AblationRow& row);
std::string ablation_csv(const std::vector<AblationRow>& rows);

}  // namespace akd
