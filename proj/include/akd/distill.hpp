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
#include <span>
#include <string>
#include <vector>

#include "akd/tensor.hpp"
#include "akd/vit.hpp"

namespace akd {

enum class Interpolation { kBicubic, kBilinear, kNearest };
enum class Aggregation { kLogSum, kMean, kMin, kMax };
enum class AttentionLayers { kLast, kAll };
/// Reduction of squared errors over feature dimensions.
enum class SquaredError { kMean, kSum };
/// Reduction of per-head KL terms when head counts match.
enum class HeadReduction { kSum, kMean };

std::string to_string(Interpolation mode);
std::string to_string(Aggregation mode);
std::string to_string(AttentionLayers mode);
Interpolation parse_interpolation(const std::string& text);
Aggregation parse_aggregation(const std::string& text);
AttentionLayers parse_attention_layers(const std::string& text);

struct DistillConfig {
  double lambda = 0.1;
  double temperature = 10.0;
  double log_floor = 1e-8;
  Interpolation interpolation = Interpolation::kBicubic;
  Aggregation aggregation = Aggregation::kLogSum;
  AttentionLayers attention_layers = AttentionLayers::kLast;
  bool align_patch_tokens = false;
  SquaredError squared_error = SquaredError::kMean;
  HeadReduction head_reduction = HeadReduction::kSum;
  /// Keep the class self-attention entry in the compared distributions.
  bool include_class_entry = true;

  /// Throws ConfigError unless lambda >= 0, temperature > 0, log_floor > 0.
  void validate() const;
};

/// Affine stack mapping student class tokens into the teacher's space.
/// GELU between layers, none after the last; hidden width is out_dim.
class Projector {
 public:
  Projector() = default;
  Projector(std::size_t in_dim, std::size_t out_dim, std::size_t depth,
            std::uint64_t seed);

  std::size_t in_dim() const { return in_dim_; }
  std::size_t out_dim() const { return out_dim_; }
  std::size_t depth() const { return weights_.size(); }

  /// x is [in_dim] or [rows x in_dim]; the result has the same rank.
  Tensor forward(const Tensor& x) const;

  std::vector<NamedParam> named(const std::string& prefix = "projector.") const;
  Projector alias() const;
  Projector clone() const;
  static Projector from_named(const std::vector<NamedParam>& tensors,
                              const std::string& prefix = "projector.");

 private:
  std::size_t in_dim_ = 0;
  std::size_t out_dim_ = 0;
  std::vector<Tensor> weights_;
  std::vector<Tensor> biases_;
};

/// Class-token attention of one layer: one length-(N+1) row per head.
struct ClassAttention {
  std::vector<Tensor> heads;
  std::size_t grid = 0;  // square patch grid side, grid * grid == N

  std::size_t num_heads() const { return heads.size(); }
  std::size_t num_patches() const { return grid * grid; }

  static ClassAttention from_record(const AttentionRecord& record,
                                    std::size_t layer);
  /// Throws DimensionError on grid/length mismatch and ContractError when a
  /// head is not a probability vector within `tolerance`.
  void validate(double tolerance = 1e-6) const;
};

/// MSE between the teacher class token and the projected student token.
/// The teacher side never receives gradient.
Tensor pa_loss(const Tensor& teacher_cls, const Tensor& student_cls,
               const Projector& projector,
               SquaredError reduction = SquaredError::kMean);

/// sum_j p_j * ln(max(p_j, floor) / max(q_j, floor)); only q is differentiated.
Tensor kl_divergence(const Tensor& p, const Tensor& q, double floor = 1e-8);

struct Grid {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t cells() const { return width * height; }
  bool operator==(const Grid&) const = default;
};

/// Resamples a row-major height x width field. Bicubic uses the Keys kernel
/// (a = -0.5) with clamped taps; sample centres follow the half-pixel
/// convention src = (dst + 0.5) * in / out - 0.5.
std::vector<double> resample(std::span<const double> field, Grid from,
                             Grid to, Interpolation mode);

struct InterpolatedAttention {
  std::vector<double> values;  // length to.cells() + 1
  bool uniform_fallback = false;
};

/// Maps a class-attention row onto another patch grid: patch entries are
/// resampled, clamped at zero and rescaled to carry 1 - a_0; entry 0 is kept.
InterpolatedAttention interpolate_attention(std::span<const double> row,
                                            Grid from, Grid to,
                                            Interpolation mode);

/// softmax((1/T) * sum_h ln(max(a_h, floor))).
Tensor aggregate_heads(const std::vector<Tensor>& heads, double temperature,
                       double floor = 1e-8);

/// Elementwise mean/min/max over heads, floored and renormalized to sum 1.
Tensor aggregate_heads_alt(const std::vector<Tensor>& heads,
                           Aggregation strategy, double floor = 1e-8);

/// Dispatches to aggregate_heads or aggregate_heads_alt per cfg.aggregation.
Tensor aggregate(const std::vector<Tensor>& heads, const DistillConfig& cfg);

/// Shape relation between teacher and student attention.
enum class AgCase {
  kSameShape,             // equal heads, equal patches
  kResample,              // equal heads, different patches
  kAggregate,             // different heads, equal patches
  kResampleAndAggregate,  // both differ
};

std::string to_string(AgCase c);
AgCase select_case(const ClassAttention& teacher,
                   const ClassAttention& student);

/// Attention guidance loss for one layer, teacher side gradient-free.
Tensor ag_loss(const ClassAttention& teacher, const ClassAttention& student,
               const DistillConfig& cfg);

/// Same as ag_loss but forces a particular pipeline; throws DimensionError
/// when the shapes make the pipeline undefined (e.g. per-head KL with
/// different head counts).
Tensor ag_loss_via(AgCase path, const ClassAttention& teacher,
                   const ClassAttention& student, const DistillConfig& cfg);

/// Last-layer loss, or the mean over layers when cfg selects all layers
/// (requires equal depth, else UnsupportedError).
Tensor ag_loss_layers(const AttentionRecord& teacher,
                      const AttentionRecord& student,
                      const DistillConfig& cfg);

/// pa + lambda * ag
Tensor total_loss(const Tensor& pa, const Tensor& ag, double lambda);

/// MSE between teacher patch tokens and projected student patch tokens,
/// averaged over tokens. Different token counts are unsupported.
Tensor patch_token_alignment(const Tensor& teacher_patches,
                             const Tensor& student_patches,
                             const Projector& projector,
                             SquaredError reduction = SquaredError::kMean);

}  // namespace akd
