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
#include <string>
#include <vector>

#include "akd/tensor.hpp"

namespace akd {

/// Labelled 8-bit images, stored channel-major per sample.
struct Dataset {
  std::size_t channels = 3;
  std::size_t height = 32;
  std::size_t width = 32;
  std::vector<std::uint8_t> labels;
  std::vector<std::uint8_t> pixels;

  std::size_t size() const { return labels.size(); }
  std::size_t image_numel() const { return channels * height * width; }
  std::size_t num_classes() const;

  /// Normalized [C x H x W] tensor, (p / 255 - 0.5) / 0.25.
  Tensor image(std::size_t index) const;
  /// Samples [begin, end) as a new dataset.
  Dataset subset(std::size_t begin, std::size_t end) const;

  bool operator==(const Dataset&) const = default;
};

struct SyntheticSpec {
  std::size_t count = 5000;
  std::size_t classes = 8;
  std::size_t image_size = 32;
  std::size_t channels = 3;
  std::uint64_t seed = 0;
};

/// Shape classes, in label order.
const std::vector<std::string>& synthetic_class_names();

/// Class-conditioned shapes on a noisy background. Labels cycle through the
/// classes so every class gets count / classes samples (+1 for the first
/// count % classes classes); each sample depends only on (seed, index).
Dataset generate_synthetic(const SyntheticSpec& spec);

/// Raw binary: "AKDD", u32 count, channels, height, width (little endian),
/// then per sample a label byte followed by channels*height*width bytes.
std::vector<std::uint8_t> encode_dataset(const Dataset& data);
Dataset decode_dataset(const std::vector<std::uint8_t>& bytes);
void save_dataset(const std::string& path, const Dataset& data);
Dataset load_dataset(const std::string& path);

/// Random crop (zero padding `pad` on each side) and horizontal flip of a
/// normalized image, driven by a per-sample seed.
Tensor augment(const Tensor& image, std::uint64_t seed, std::size_t pad = 4);

/// SplitMix64 step; used to derive independent per-sample seeds.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

}  // namespace akd
