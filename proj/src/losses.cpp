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

#include <cmath>

#include "akd/distill.hpp"
#include "akd/errors.hpp"
#include "akd/ops.hpp"

namespace akd {

namespace {

constexpr double kNormalizationTolerance = 1e-5;

double sum_of(std::span<const double> v) {
  double total = 0.0;
  for (double x : v) total += x;
  return total;
}

void require_distribution(const Tensor& t, const char* what) {
  const double total = sum_of(t.data());
  if (std::abs(total - 1.0) > kNormalizationTolerance) {
    throw ContractError(std::string(what) + " sums to " +
                        std::to_string(total) + ", expected 1");
  }
  for (double v : t.data()) {
    if (v < 0.0) throw ContractError(std::string(what) + " has negative mass");
  }
}

Tensor reduce_squared_error(const Tensor& diff, SquaredError reduction,
                            std::size_t rows) {
  Tensor sq = square(diff);
  if (reduction == SquaredError::kMean) return mean(sq);
  return scale(sum(sq), 1.0 / static_cast<double>(rows));
}

Tensor drop_class_entry(const Tensor& row) {
  return normalize_sum(slice(row, 0, 1, row.numel()));
}

Tensor compare(const Tensor& teacher, const Tensor& student,
               const DistillConfig& cfg) {
  if (cfg.include_class_entry) {
    return kl_divergence(teacher, student, cfg.log_floor);
  }
  return kl_divergence(drop_class_entry(teacher.detach()),
                       drop_class_entry(student), cfg.log_floor);
}

std::vector<Tensor> detached(const std::vector<Tensor>& heads) {
  std::vector<Tensor> out;
  out.reserve(heads.size());
  for (const auto& h : heads) out.push_back(h.detach());
  return out;
}

std::vector<Tensor> resampled_teacher(const ClassAttention& teacher,
                                      const ClassAttention& student,
                                      Interpolation mode) {
  const Grid from{teacher.grid, teacher.grid};
  const Grid to{student.grid, student.grid};
  std::vector<Tensor> out;
  for (const auto& head : teacher.heads) {
    out.push_back(Tensor::vector(
        interpolate_attention(head.data(), from, to, mode).values));
  }
  return out;
}

Tensor per_head(const std::vector<Tensor>& teacher,
                const std::vector<Tensor>& student, const DistillConfig& cfg) {
  Tensor total;
  for (std::size_t h = 0; h < teacher.size(); ++h) {
    Tensor term = compare(teacher[h], student[h], cfg);
    total = total.defined() ? add(total, term) : term;
  }
  if (cfg.head_reduction == HeadReduction::kMean) {
    total = scale(total, 1.0 / static_cast<double>(teacher.size()));
  }
  return total;
}

}  // namespace

std::string to_string(Interpolation mode) {
  switch (mode) {
    case Interpolation::kBicubic: return "bicubic";
    case Interpolation::kBilinear: return "bilinear";
    case Interpolation::kNearest: return "nearest";
  }
  return "?";
}

std::string to_string(Aggregation mode) {
  switch (mode) {
    case Aggregation::kLogSum: return "log_sum";
    case Aggregation::kMean: return "mean";
    case Aggregation::kMin: return "min";
    case Aggregation::kMax: return "max";
  }
  return "?";
}

std::string to_string(AttentionLayers mode) {
  return mode == AttentionLayers::kLast ? "last" : "all";
}

Interpolation parse_interpolation(const std::string& text) {
  if (text == "bicubic") return Interpolation::kBicubic;
  if (text == "bilinear") return Interpolation::kBilinear;
  if (text == "nearest") return Interpolation::kNearest;
  throw ConfigError("unknown interpolation '" + text + "'");
}

Aggregation parse_aggregation(const std::string& text) {
  if (text == "log_sum") return Aggregation::kLogSum;
  if (text == "mean") return Aggregation::kMean;
  if (text == "min") return Aggregation::kMin;
  if (text == "max") return Aggregation::kMax;
  throw ConfigError("unknown aggregation '" + text + "'");
}

AttentionLayers parse_attention_layers(const std::string& text) {
  if (text == "last") return AttentionLayers::kLast;
  if (text == "all") return AttentionLayers::kAll;
  throw ConfigError("unknown attention_layers '" + text + "'");
}

std::string to_string(AgCase c) {
  switch (c) {
    case AgCase::kSameShape: return "same_shape";
    case AgCase::kResample: return "resample";
    case AgCase::kAggregate: return "aggregate";
    case AgCase::kResampleAndAggregate: return "resample_and_aggregate";
  }
  return "?";
}

void DistillConfig::validate() const {
  if (!(lambda >= 0.0)) throw ConfigError("distill.lambda must be >= 0");
  if (!(temperature > 0.0)) throw ConfigError("distill.temperature must be > 0");
  if (!(log_floor > 0.0)) throw ConfigError("distill.log_floor must be > 0");
}

ClassAttention ClassAttention::from_record(const AttentionRecord& record,
                                           std::size_t layer) {
  if (layer >= record.layers()) {
    throw DimensionError("attention record has " +
                         std::to_string(record.layers()) + " layers, asked for " +
                         std::to_string(layer));
  }
  return {record.class_rows[layer], record.grid};
}

void ClassAttention::validate(double tolerance) const {
  if (heads.empty()) throw ContractError("class attention without heads");
  for (const auto& h : heads) {
    if (h.rank() != 1 || h.numel() != num_patches() + 1) {
      throw DimensionError("attention row " + to_string(h.shape()) +
                           " does not match a " + std::to_string(grid) + "x" +
                           std::to_string(grid) + " patch grid");
    }
    const double total = sum_of(h.data());
    if (std::abs(total - 1.0) > tolerance) {
      throw ContractError("attention row sums to " + std::to_string(total));
    }
    for (double v : h.data()) {
      if (v < 0.0) throw ContractError("attention row has negative entries");
    }
  }
}

Tensor pa_loss(const Tensor& teacher_cls, const Tensor& student_cls,
               const Projector& projector, SquaredError reduction) {
  if (teacher_cls.rank() != 1 || teacher_cls.numel() != projector.out_dim()) {
    throw ConfigError("teacher class token " + to_string(teacher_cls.shape()) +
                      " does not match projector output width " +
                      std::to_string(projector.out_dim()));
  }
  if (student_cls.rank() != 1 || student_cls.numel() != projector.in_dim()) {
    throw ConfigError("student class token " + to_string(student_cls.shape()) +
                      " does not match projector input width " +
                      std::to_string(projector.in_dim()));
  }
  Tensor diff = sub(teacher_cls.detach(), projector.forward(student_cls));
  return reduce_squared_error(diff, reduction, 1);
}

Tensor kl_divergence(const Tensor& p, const Tensor& q, double floor) {
  if (p.rank() != 1 || q.rank() != 1 || p.numel() != q.numel()) {
    throw DimensionError("kl_divergence: lengths differ, " +
                         to_string(p.shape()) + " vs " + to_string(q.shape()));
  }
  require_distribution(p, "kl_divergence target");
  require_distribution(q, "kl_divergence prediction");
  // Elementwise p * (ln p - ln q), so identical inputs give exactly zero.
  std::vector<double> log_p(p.numel());
  for (std::size_t j = 0; j < log_p.size(); ++j)
    log_p[j] = std::log(std::max(p.at(j), floor));
  Tensor target = p.detach();
  return sum(mul(target, sub(Tensor::vector(std::move(log_p)), log(clamp_min(q, floor)))));
}

Tensor aggregate_heads(const std::vector<Tensor>& heads, double temperature,
                       double floor) {
  if (heads.empty()) throw ContractError("aggregate_heads: empty head list");
  if (!(temperature > 0.0)) {
    throw ContractError("aggregate_heads: temperature must be positive");
  }
  Tensor logits;
  for (const auto& h : heads) {
    Tensor term = log(clamp_min(h, floor));
    logits = logits.defined() ? add(logits, term) : term;
  }
  return softmax(scale(logits, 1.0 / temperature), 0);
}

Tensor aggregate_heads_alt(const std::vector<Tensor>& heads,
                           Aggregation strategy, double floor) {
  if (heads.empty()) throw ContractError("aggregate_heads_alt: empty head list");
  Tensor acc = heads.front();
  for (std::size_t h = 1; h < heads.size(); ++h) {
    switch (strategy) {
      case Aggregation::kMean: acc = add(acc, heads[h]); break;
      case Aggregation::kMin: acc = minimum(acc, heads[h]); break;
      case Aggregation::kMax: acc = maximum(acc, heads[h]); break;
      case Aggregation::kLogSum:
        throw ContractError("aggregate_heads_alt: use aggregate_heads for log_sum");
    }
  }
  if (strategy == Aggregation::kMean) {
    acc = scale(acc, 1.0 / static_cast<double>(heads.size()));
  }
  return normalize_sum(clamp_min(acc, floor));
}

Tensor aggregate(const std::vector<Tensor>& heads, const DistillConfig& cfg) {
  if (cfg.aggregation == Aggregation::kLogSum) {
    return aggregate_heads(heads, cfg.temperature, cfg.log_floor);
  }
  return aggregate_heads_alt(heads, cfg.aggregation, cfg.log_floor);
}

AgCase select_case(const ClassAttention& teacher,
                   const ClassAttention& student) {
  const bool same_heads = teacher.num_heads() == student.num_heads();
  const bool same_patches = teacher.num_patches() == student.num_patches();
  if (same_heads && same_patches) return AgCase::kSameShape;
  if (same_heads) return AgCase::kResample;
  if (same_patches) return AgCase::kAggregate;
  return AgCase::kResampleAndAggregate;
}

Tensor ag_loss_via(AgCase path, const ClassAttention& teacher,
                   const ClassAttention& student, const DistillConfig& cfg) {
  teacher.validate();
  student.validate();
  const bool same_heads = teacher.num_heads() == student.num_heads();
  const bool same_patches = teacher.num_patches() == student.num_patches();
  switch (path) {
    case AgCase::kSameShape:
      if (!same_heads || !same_patches) {
        throw DimensionError("per-head KL needs equal heads and patches");
      }
      return per_head(teacher.heads, student.heads, cfg);
    case AgCase::kResample:
      if (!same_heads) throw DimensionError("per-head KL needs equal head counts");
      return per_head(resampled_teacher(teacher, student, cfg.interpolation),
                      student.heads, cfg);
    case AgCase::kAggregate:
      if (!same_patches) {
        throw DimensionError("aggregation without resampling needs equal patch counts");
      }
      return compare(aggregate(detached(teacher.heads), cfg),
                     aggregate(student.heads, cfg), cfg);
    case AgCase::kResampleAndAggregate:
      return compare(
          aggregate(resampled_teacher(teacher, student, cfg.interpolation), cfg),
          aggregate(student.heads, cfg), cfg);
  }
  throw ContractError("unknown attention guidance case");
}

Tensor ag_loss(const ClassAttention& teacher, const ClassAttention& student,
               const DistillConfig& cfg) {
  return ag_loss_via(select_case(teacher, student), teacher, student, cfg);
}

Tensor ag_loss_layers(const AttentionRecord& teacher,
                      const AttentionRecord& student,
                      const DistillConfig& cfg) {
  if (teacher.layers() == 0 || student.layers() == 0) {
    throw ContractError("attention record without layers");
  }
  if (cfg.attention_layers == AttentionLayers::kLast) {
    return ag_loss(ClassAttention::from_record(teacher, teacher.layers() - 1),
                   ClassAttention::from_record(student, student.layers() - 1),
                   cfg);
  }
  if (teacher.layers() != student.layers()) {
    throw UnsupportedError(
        "all-layer attention guidance needs equal depth (teacher " +
        std::to_string(teacher.layers()) + ", student " +
        std::to_string(student.layers()) + ")");
  }
  Tensor total;
  for (std::size_t l = 0; l < teacher.layers(); ++l) {
    Tensor term = ag_loss(ClassAttention::from_record(teacher, l),
                          ClassAttention::from_record(student, l), cfg);
    total = total.defined() ? add(total, term) : term;
  }
  return scale(total, 1.0 / static_cast<double>(teacher.layers()));
}

Tensor total_loss(const Tensor& pa, const Tensor& ag, double lambda) {
  if (!(lambda >= 0.0)) throw ContractError("total_loss: lambda must be >= 0");
  return add(pa, scale(ag, lambda));
}

Tensor patch_token_alignment(const Tensor& teacher_patches,
                             const Tensor& student_patches,
                             const Projector& projector,
                             SquaredError reduction) {
  if (teacher_patches.rank() != 2 || student_patches.rank() != 2) {
    throw DimensionError("patch token alignment expects token matrices");
  }
  if (teacher_patches.dim(0) != student_patches.dim(0)) {
    throw UnsupportedError(
        "patch token alignment with different token counts (teacher " +
        std::to_string(teacher_patches.dim(0)) + ", student " +
        std::to_string(student_patches.dim(0)) + ") is undefined");
  }
  if (teacher_patches.dim(1) != projector.out_dim()) {
    throw ConfigError("teacher patch width does not match projector output");
  }
  Tensor diff =
      sub(teacher_patches.detach(), projector.forward(student_patches));
  return reduce_squared_error(diff, reduction, teacher_patches.dim(0));
}

}  // namespace akd
