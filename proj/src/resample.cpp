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

#include <algorithm>
#include <cmath>

#include "akd/distill.hpp"
#include "akd/errors.hpp"

namespace akd {

namespace {

constexpr double kKeysA = -0.5;

double keys_kernel(double x) {
  x = std::abs(x);
  if (x <= 1.0) return ((kKeysA + 2.0) * x - (kKeysA + 3.0)) * x * x + 1.0;
  if (x < 2.0) return ((kKeysA * x - 5.0 * kKeysA) * x + 8.0 * kKeysA) * x - 4.0 * kKeysA;
  return 0.0;
}

struct Tap {
  std::size_t index;
  double weight;
};

// Contributions of input samples to each output sample along one axis.
std::vector<std::vector<Tap>> axis_taps(std::size_t in, std::size_t out,
                                        Interpolation mode) {
  std::vector<std::vector<Tap>> taps(out);
  const double ratio = static_cast<double>(in) / static_cast<double>(out);
  auto clamp_index = [in](long i) {
    return static_cast<std::size_t>(std::clamp<long>(i, 0, static_cast<long>(in) - 1));
  };
  for (std::size_t o = 0; o < out; ++o) {
    switch (mode) {
      case Interpolation::kNearest: {
        const auto src = static_cast<long>(std::floor(static_cast<double>(o) * ratio));
        taps[o].push_back({clamp_index(src), 1.0});
        break;
      }
      case Interpolation::kBilinear: {
        const double src = std::max(0.0, (static_cast<double>(o) + 0.5) * ratio - 0.5);
        const auto i0 = static_cast<long>(std::floor(src));
        const double t = src - static_cast<double>(i0);
        taps[o].push_back({clamp_index(i0), 1.0 - t});
        taps[o].push_back({clamp_index(i0 + 1), t});
        break;
      }
      case Interpolation::kBicubic: {
        const double src = (static_cast<double>(o) + 0.5) * ratio - 0.5;
        const auto i0 = static_cast<long>(std::floor(src));
        const double t = src - static_cast<double>(i0);
        for (long k = -1; k <= 2; ++k)
          taps[o].push_back({clamp_index(i0 + k), keys_kernel(t - static_cast<double>(k))});
        break;
      }
    }
  }
  return taps;
}

}  // namespace

std::vector<double> resample(std::span<const double> field, Grid from,
                             Grid to, Interpolation mode) {
  if (field.size() != from.cells() || from.cells() == 0 || to.cells() == 0) {
    throw DimensionError("resample: field of " + std::to_string(field.size()) +
                         " values does not match grid " +
                         std::to_string(from.width) + "x" +
                         std::to_string(from.height));
  }
  const auto xt = axis_taps(from.width, to.width, mode);
  const auto yt = axis_taps(from.height, to.height, mode);
  // Horizontal pass: from.height x to.width.
  std::vector<double> rows(from.height * to.width, 0.0);
  for (std::size_t y = 0; y < from.height; ++y)
    for (std::size_t x = 0; x < to.width; ++x)
      for (const auto& tap : xt[x])
        rows[y * to.width + x] += tap.weight * field[y * from.width + tap.index];
  std::vector<double> out(to.cells(), 0.0);
  for (std::size_t y = 0; y < to.height; ++y)
    for (const auto& tap : yt[y])
      for (std::size_t x = 0; x < to.width; ++x)
        out[y * to.width + x] += tap.weight * rows[tap.index * to.width + x];
  return out;
}

InterpolatedAttention interpolate_attention(std::span<const double> row,
                                            Grid from, Grid to,
                                            Interpolation mode) {
  if (row.size() != from.cells() + 1) {
    throw DimensionError("interpolate_attention: row of length " +
                         std::to_string(row.size()) + " does not match a " +
                         std::to_string(from.width) + "x" +
                         std::to_string(from.height) + " grid");
  }
  if (to.cells() == 0) {
    throw DimensionError("interpolate_attention: empty target grid");
  }
  const double cls = row[0];
  const double patch_mass = 1.0 - cls;
  auto patches = resample(row.subspan(1), from, to, mode);
  double total = 0.0;
  for (auto& v : patches) {
    v = std::max(v, 0.0);
    total += v;
  }
  InterpolatedAttention out;
  out.values.reserve(to.cells() + 1);
  out.values.push_back(cls);
  if (total > 0.0) {
    for (double v : patches) out.values.push_back(v * patch_mass / total);
  } else {
    out.uniform_fallback = true;
    const double each = patch_mass / static_cast<double>(to.cells());
    out.values.insert(out.values.end(), to.cells(), each);
  }
  return out;
}

}  // namespace akd
