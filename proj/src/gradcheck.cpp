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

#include "akd/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "akd/errors.hpp"

namespace akd {

GradCheckResult check_gradients(std::string name,
                                const std::function<Tensor()>& loss,
                                std::vector<Tensor> leaves,
                                std::vector<std::string> leaf_names,
                                const GradCheckOptions& options) {
  GradCheckResult result;
  result.name = std::move(name);

  std::vector<std::vector<double>> analytic;
  {
    for (auto& leaf : leaves) {
      leaf.set_requires_grad(true);
      leaf.zero_grad();
    }
    Tape tape;
    TapeScope scope(tape);
    Tensor value = loss();
    tape.backward(value);
    for (const auto& leaf : leaves) analytic.push_back(leaf.grad());
  }

  NoGradScope no_grad;
  for (std::size_t l = 0; l < leaves.size(); ++l) {
    auto values = leaves[l].mutable_data();
    double diff2 = 0.0, a2 = 0.0, n2 = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double original = values[i];
      values[i] = original + options.step;
      const double plus = loss().item();
      values[i] = original - options.step;
      const double minus = loss().item();
      values[i] = original;
      const double numeric = (plus - minus) / (2.0 * options.step);
      if (!std::isfinite(numeric)) {
        throw NumericError("finite difference produced a non-finite value");
      }
      const double a = analytic[l][i];
      diff2 += (a - numeric) * (a - numeric);
      a2 += a * a;
      n2 += numeric * numeric;
      ++result.coordinates;
    }
    const double denom =
        std::max({std::sqrt(a2), std::sqrt(n2), kGradientNormFloor});
    const double rel = std::sqrt(diff2) / denom;
    if (rel >= result.max_rel_error) {
      result.max_rel_error = rel;
      result.worst_leaf =
          l < leaf_names.size() ? leaf_names[l] : "leaf" + std::to_string(l);
    }
  }
  result.passed = result.max_rel_error <= options.tolerance;
  return result;
}

}  // namespace akd
