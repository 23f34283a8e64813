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

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "akd/distill.hpp"
#include "akd/gradcheck.hpp"
#include "akd/tensor.hpp"
#include "akd/vit.hpp"

namespace akd {

/// A scalar loss together with the leaves whose gradients are checked.
/// The closure owns every tensor it touches.
struct GradProblem {
  std::string name;
  std::uint64_t seed = 0;
  std::function<Tensor()> loss;
  std::vector<Tensor> leaves;
  std::vector<std::string> leaf_names;
};

/// pa_loss, ag_loss in each of the four shape cases, total_loss, and a
/// 2-layer teacher/student ViT pair feeding total_loss. Values are drawn
/// from `seed`; `cfg` supplies temperature, aggregation, interpolation and
/// lambda, `form` the student block layout.
std::vector<GradProblem> gradient_problems(const DistillConfig& cfg,
                                           BlockForm form,
                                           std::uint64_t seed);

std::vector<GradCheckResult> run_gradient_suite(
    const DistillConfig& cfg, BlockForm form,
    const std::vector<std::uint64_t>& seeds,
    const GradCheckOptions& options = {});

}  // namespace akd
