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

#include "akd/ablation.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "akd/errors.hpp"
#include "akd/eval.hpp"

namespace akd {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string describe(const ViTConfig& c) {
  return fmt::format("L{}-H{}-P{}-D{}", c.layers, c.heads, c.patch_size,
                     c.embed_dim());
}

std::string case_name(const ViTConfig& teacher, const ViTConfig& student) {
  const bool heads = teacher.heads == student.heads;
  const bool patches = teacher.num_patches() == student.num_patches();
  if (heads && patches) return "a";
  if (heads) return "b";
  if (patches) return "c";
  return "d";
}

// Keeps the embedding width when the head count changes, if it divides.
ViTConfig with_heads(ViTConfig c, std::size_t heads) {
  const std::size_t d = c.embed_dim();
  c.heads = heads;
  if (d % heads == 0) c.head_dim = d / heads;
  if (c.mlp_hidden != 0 && c.mlp_hidden % c.embed_dim() != 0) c.mlp_hidden = 0;
  return c;
}

// The attention term only feeds the log here, so its layer choice must not
// make the baseline unsupported.
DistillConfig pa_only(DistillConfig d) {
  d.lambda = 0.0;
  d.attention_layers = AttentionLayers::kLast;
  return d;
}

std::string number(double v) {
  if (std::isnan(v)) return "";
  return fmt::format("{:.6g}", v);
}

std::string quoted(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

}  // namespace

std::string to_string(AblationAxis axis) {
  switch (axis) {
    case AblationAxis::kArchitecture: return "architecture";
    case AblationAxis::kAggregation: return "aggregation";
    case AblationAxis::kLoss: return "loss";
  }
  return "?";
}

AblationAxis parse_ablation_axis(const std::string& text) {
  if (text == "architecture") return AblationAxis::kArchitecture;
  if (text == "aggregation") return AblationAxis::kAggregation;
  if (text == "loss") return AblationAxis::kLoss;
  throw ConfigError("unknown ablation axis '" + text +
                    "' (architecture, aggregation, loss)");
}

std::vector<AblationVariant> ablation_variants(const RunConfig& cfg,
                                               AblationAxis axis) {
  const ViTConfig& t = cfg.vit_teacher;
  const ViTConfig& s = cfg.vit_student;
  const DistillConfig& d = cfg.distill;
  std::vector<AblationVariant> out;
  switch (axis) {
    case AblationAxis::kArchitecture: {
      std::vector<std::pair<std::string, ViTConfig>> students;
      students.emplace_back("base", s);
      if (s.heads != t.heads)
        students.emplace_back("teacher_heads", with_heads(s, t.heads));
      if (s.patch_size != t.patch_size) {
        ViTConfig p = s;
        p.patch_size = t.patch_size;
        students.emplace_back("teacher_patch", p);
        if (s.heads != t.heads) {
          ViTConfig b = with_heads(p, t.heads);
          students.emplace_back("teacher_heads_patch", b);
        }
      }
      if (s.layers > 1) {
        ViTConfig h = s;
        h.layers = s.layers / 2;
        students.emplace_back("half_depth", h);
      }
      for (const auto& [name, student] : students) {
        out.push_back({name + "/pa", student, pa_only(d)});
        out.push_back({name + "/pa+ag", student, d});
      }
      break;
    }
    case AblationAxis::kAggregation: {
      out.push_back({"pa", s, pa_only(d)});
      for (auto a : {Aggregation::kLogSum, Aggregation::kMean,
                     Aggregation::kMin, Aggregation::kMax}) {
        DistillConfig v = d;
        v.aggregation = a;
        v.attention_layers = AttentionLayers::kLast;
        out.push_back({to_string(a), s, v});
      }
      break;
    }
    case AblationAxis::kLoss: {
      ViTConfig m = s;
      m.layers = t.layers;
      m.patch_size = t.patch_size;
      DistillConfig last = d;
      last.attention_layers = AttentionLayers::kLast;
      last.align_patch_tokens = false;
      DistillConfig all = last;
      all.attention_layers = AttentionLayers::kAll;
      DistillConfig tokens = last;
      tokens.align_patch_tokens = true;
      out.push_back({"pa", m, pa_only(last)});
      out.push_back({"pa+ag", m, last});
      out.push_back({"pa+ag_all_layers", m, all});
      out.push_back({"pa+ag+patch_tokens", m, tokens});
      break;
    }
  }
  return out;
}

std::vector<AblationRow> run_ablation(const RunConfig& cfg, AblationAxis axis,
                                      const AblationInputs& in) {
  if (in.teacher == nullptr || in.train == nullptr || in.val == nullptr) {
    throw ConfigError("ablation needs a teacher, train and val data");
  }
  cfg.validate();
  const Teacher& teacher = *in.teacher;
  const std::size_t teacher_dim = teacher.config.embed_dim();
  // Drift is always the last-layer log-sum divergence so rows compare.
  DistillConfig drift_cfg;
  drift_cfg.interpolation = cfg.distill.interpolation;

  auto evaluate = [&](const ViTParams& params, const ViTConfig& config,
                      AblationRow& row) {
    auto train = extract_features(params, config, *in.train, in.threads);
    auto val = extract_features(params, config, *in.val, in.threads);
    row.knn_top1 = knn_classify(train, val, cfg.eval.knn_k, cfg.eval.knn_tau,
                                in.threads);
    row.linear_top1 = linear_probe(train, val, cfg.eval.probe);
    row.attention_drift =
        mean_attention_drift(teacher.params, teacher.config, params, config,
                             *in.val, drift_cfg, in.threads);
  };

  std::vector<AblationRow> rows;
  auto emit = [&](AblationRow row) {
    if (in.on_row) in.on_row(row);
    rows.push_back(std::move(row));
  };

  const auto variants = ablation_variants(cfg, axis);
  {
    const ViTConfig& base = variants.front().student;
    const auto t0 = std::chrono::steady_clock::now();
    AblationRow row;
    row.axis = to_string(axis);
    row.variant = "random_init";
    row.student = describe(base);
    row.ag_case = case_name(teacher.config, base);
    row.lambda = kNaN;
    row.status = "random_init";
    row.loss_pa = row.loss_ag = row.loss_total = kNaN;
    auto student = Student::create(base, teacher_dim,
                                   cfg.projector_depth, cfg.train.seed);
    evaluate(student.params, student.config, row);
    row.wall_time_s = seconds_since(t0);
    emit(std::move(row));
  }

  for (const auto& v : variants) {
    const auto t0 = std::chrono::steady_clock::now();
    AblationRow row;
    row.axis = to_string(axis);
    row.variant = v.name;
    row.student = describe(v.student);
    row.ag_case = case_name(teacher.config, v.student);
    row.lambda = v.distill.lambda;
    if (v.distill.lambda > 0.0) {
      row.aggregation = to_string(v.distill.aggregation);
      row.attention_layers = to_string(v.distill.attention_layers);
    }
    row.patch_tokens = v.distill.align_patch_tokens;
    spdlog::info("ablation {} / {} ({}, case {})", row.axis, row.variant,
                 row.student, row.ag_case);
    try {
      v.student.validate();
      DistillRun run;
      run.teacher = teacher;
      run.student = Student::create(v.student, teacher_dim,
                                    cfg.projector_depth, cfg.train.seed);
      run.distill = v.distill;
      run.train = cfg.train;
      run.data = in.train;
      run.threads = in.threads;
      auto result = run_distillation(std::move(run));
      const auto& last = result.history.back();
      row.loss_pa = last.loss_pa;
      row.loss_ag = last.loss_ag;
      row.loss_total = last.loss_total;
      evaluate(result.student.params, result.student.config, row);
      row.status = "ok";
    } catch (const UnsupportedError& e) {
      row.status = "unsupported";
      row.note = e.what();
      row.knn_top1 = row.linear_top1 = row.attention_drift = kNaN;
      row.loss_pa = row.loss_ag = row.loss_total = kNaN;
    } catch (const ConfigError& e) {
      row.status = "unsupported";
      row.note = e.what();
      row.knn_top1 = row.linear_top1 = row.attention_drift = kNaN;
      row.loss_pa = row.loss_ag = row.loss_total = kNaN;
    }
    row.wall_time_s = seconds_since(t0);
    emit(std::move(row));
  }
  return rows;
}

std::string ablation_csv_header() {
  return "axis,variant,student,ag_case,lambda,aggregation,attention_layers,"
         "patch_tokens,status,knn_top1,linear_top1,loss_pa,loss_ag,loss_total,"
         "attention_drift,wall_time_s,note";
}

std::string ablation_csv_line(const AblationRow& r) {
  return fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                     quoted(r.axis), quoted(r.variant), quoted(r.student),
                     r.ag_case, number(r.lambda), r.aggregation,
                     r.attention_layers, r.patch_tokens ? 1 : 0, r.status,
                     number(r.knn_top1), number(r.linear_top1),
                     number(r.loss_pa), number(r.loss_ag),
                     number(r.loss_total), number(r.attention_drift),
                     fmt::format("{:.3f}", r.wall_time_s), quoted(r.note));
}

std::string ablation_csv(const std::vector<AblationRow>& rows) {
  std::string out = ablation_csv_header() + "\n";
  for (const auto& r : rows) out += ablation_csv_line(r) + "\n";
  return out;
}

}  // namespace akd
