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
#include <optional>
#include <string>
#include <vector>

#include "akd/checkpoint.hpp"
#include "akd/data.hpp"
#include "akd/distill.hpp"
#include "akd/vit.hpp"

namespace akd {

/// One class-token feature per sample (taken before any projector).
struct FeatureBank {
  std::size_t rows = 0;
  std::size_t dim = 0;
  std::vector<double> features;  // rows x dim, row-major
  std::vector<int> labels;
  bool normalized = false;

  std::span<const double> row(std::size_t i) const {
    return {features.data() + i * dim, dim};
  }
  std::size_t num_classes() const;
  /// Scales rows to unit L2 norm; zero rows are rejected.
  void normalize();
  /// Throws ContractError on size mismatch or, when normalized is set, on a
  /// row whose norm is off by more than 1e-6.
  void validate() const;

  Checkpoint to_checkpoint() const;
  static FeatureBank from_checkpoint(const Checkpoint& ckpt);
};

/// Class tokens of un-augmented images, in dataset order.
FeatureBank extract_features(const ViTParams& params, const ViTConfig& config,
                             const Dataset& data, std::size_t threads = 1,
                             bool normalize = true);

/// Cosine top-k vote weighted by exp(similarity / tau); ties go to the
/// lower class id.
std::vector<int> knn_predict(const FeatureBank& train, const FeatureBank& query,
                             std::size_t k = 20, double tau = 0.07,
                             std::size_t threads = 1);
double knn_classify(const FeatureBank& train, const FeatureBank& query,
                    std::size_t k = 20, double tau = 0.07,
                    std::size_t threads = 1);

struct LinearProbeConfig {
  std::size_t epochs = 50;
  double lr = 1e-3;
  std::size_t batch_size = 64;
  double weight_decay = 0.0;
  std::uint64_t seed = 0;
};

/// Affine softmax classifier trained with AdamW on frozen features; returns
/// top-1 accuracy on `test`.
double linear_probe(const FeatureBank& train, const FeatureBank& test,
                    const LinearProbeConfig& cfg = {});

struct AttentionExport {
  std::size_t layer = 0;
  std::size_t grid = 0;
  std::size_t image_size = 0;
  std::vector<std::vector<double>> rows;  // [head][N + 1] class-token rows
  std::vector<double> aggregate;          // log-sum aggregate, N + 1 entries
  std::vector<std::string> files;

  /// Patch part (entries 1..N) of a head row, or of the aggregate when
  /// head == rows.size().
  std::vector<double> patch_map(std::size_t head) const;
};

/// Writes head_<h>.pgm, aggregate.pgm and attention.akd into out_dir (when
/// non-empty). Heatmaps are nearest-upsampled to the image size and min-max
/// scaled per map. `layer` defaults to the last block.
AttentionExport export_attention(const ViTParams& params, const ViTConfig& config,
                                 const Tensor& image,
                                 std::optional<std::size_t> layer,
                                 const DistillConfig& cfg,
                                 const std::string& out_dir = "");

/// KL(reference aggregate, mapped onto other's grid || other aggregate).
double aggregate_kl(const AttentionExport& reference, const AttentionExport& other,
                    const DistillConfig& cfg);

/// Binary PGM (P5) with values min-max scaled to 0..255.
std::vector<std::uint8_t> encode_pgm(const std::vector<double>& values,
                                     std::size_t width, std::size_t height);

/// The shape-adapted attention loss evaluated as a plain number.
double attention_drift(const AttentionRecord& teacher,
                       const AttentionRecord& student, const DistillConfig& cfg);

/// Mean drift over a dataset.
double mean_attention_drift(const ViTParams& teacher, const ViTConfig& teacher_config,
                            const ViTParams& student, const ViTConfig& student_config,
                            const Dataset& data, const DistillConfig& cfg,
                            std::size_t threads = 1);

}  // namespace akd
