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

#include "akd/tensor.hpp"

namespace akd {

inline constexpr double kGradientNormFloor = 1e-7;

struct GradCheckOptions {
  double step = 1e-3;
  double tolerance = 1e-4;
};

struct GradCheckResult {
  std::string name;
  double max_rel_error = 0.0;
  std::string worst_leaf;
  std::size_t coordinates = 0;
  bool passed = false;
};

/// Compares tape gradients of `loss` against central finite differences.
///
/// `loss` is re-evaluated with each leaf coordinate perturbed by +-step. The
/// error per leaf is ||analytic - numeric||_2 / max(||analytic||_2,
/// ||numeric||_2, kGradientNormFloor). The floor keeps leaves whose true
/// gradient vanishes (e.g. key biases under softmax) from comparing
/// round-off against round-off. Leaf values are restored before returning.
GradCheckResult check_gradients(std::string name,
                                const std::function<Tensor()>& loss,
                                std::vector<Tensor> leaves,
                                std::vector<std::string> leaf_names = {},
                                const GradCheckOptions& options = {});

}  // namespace akd
