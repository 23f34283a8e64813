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

// Acceptance suite. One PASS/FAIL line per criterion; exit status is the
// number of failures. Criterion 5 trains real models and takes minutes.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include "akd/ablation.hpp"
#include "akd/checkpoint.hpp"
#include "akd/config.hpp"
#include "akd/data.hpp"
#include "akd/distill.hpp"
#include "akd/eval.hpp"
#include "akd/gradsuite.hpp"
#include "akd/io.hpp"
#include "akd/ops.hpp"
#include "akd/trainer.hpp"
#include "reference_resampler.hpp"
#include "test_util.hpp"

using namespace akd;
namespace fs = std::filesystem;
using akd::testing::random_distribution;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("akd_accept_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

bool is_distribution(std::span<const double> v, double tol = 1e-6) {
  double total = 0.0;
  for (double x : v) {
    if (!(x >= 0.0)) return false;
    total += x;
  }
  return std::abs(total - 1.0) <= tol;
}

// 1 -------------------------------------------------------------------------

Outcome gradient_suite() {
  const auto t0 = Clock::now();
  DistillConfig plain;
  DistillConfig heavy;
  heavy.lambda = 1.0;
  heavy.temperature = 2.0;
  heavy.interpolation = Interpolation::kBilinear;
  std::size_t checks = 0, failed = 0;
  double worst = 0.0;
  std::string worst_name;
  for (const auto& cfg : {plain, heavy}) {
    for (auto form : {BlockForm::kSingleNorm, BlockForm::kPreNorm}) {
      for (std::uint64_t seed : {11u, 12u, 13u}) {
        for (auto& p : gradient_problems(cfg, form, seed)) {
          // Independent oracle: per-leaf central differences, h = 1e-3.
          const auto f = [&] { return p.loss().item(); };
          std::vector<std::vector<double>> analytic;
          {
            for (auto& l : p.leaves) {
              l.set_requires_grad(true);
              l.zero_grad();
            }
            Tape tape;
            TapeScope scope(tape);
            tape.backward(p.loss());
            for (auto& l : p.leaves) analytic.push_back(l.grad());
          }
          for (std::size_t i = 0; i < p.leaves.size(); ++i) {
            auto numeric = akd::testing::numeric_gradient(f, p.leaves[i], 1e-3);
            const double err = akd::testing::relative_error(analytic[i], numeric);
            ++checks;
            if (err > 1e-4) ++failed;
            if (err > worst) {
              worst = err;
              worst_name = p.name + "#" + std::to_string(seed) + ":" + p.leaf_names[i];
            }
          }
        }
      }
    }
  }
  const double elapsed = seconds_since(t0);
  return {failed == 0 && elapsed < 120.0,
          fmt::format("{} leaf checks, {} over 1e-4, worst {:.2e} ({}), {:.1f}s",
                      checks, failed, worst, worst_name, elapsed)};
}

// 2 -------------------------------------------------------------------------

Outcome distribution_invariants() {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<std::size_t> heads_d(1, 3), hd_d(2, 4), pick(0, 3);
  std::uniform_int_distribution<std::size_t> side(1, 8);
  std::uniform_real_distribution<double> temp(0.5, 100.0);
  const std::size_t patches[] = {1, 2, 4, 8};
  const Interpolation modes[] = {Interpolation::kBicubic, Interpolation::kBilinear,
                                 Interpolation::kNearest};
  std::size_t rows = 0, interps = 0, aggs = 0, kls = 0;
  std::size_t bad_rows = 0, bad_interp = 0, bad_agg = 0, bad_kl = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    ViTConfig c;
    c.image_size = 8;
    c.channels = 2;
    c.patch_size = patches[pick(rng)];
    c.layers = 1;
    c.heads = heads_d(rng);
    c.head_dim = hd_d(rng);
    c.mlp_hidden = c.embed_dim() * 2;
    auto params = init_vit(c, rng());
    // Spread the logits well beyond init scale.
    std::uniform_real_distribution<double> w(-1.0, 1.0);
    for (auto& np : params.named())
      for (auto& v : np.tensor.mutable_data()) v = w(rng);
    auto image = akd::testing::random_tensor({2, 8, 8}, rng, -2.0, 2.0);
    NoGradScope no_grad;
    auto out = vit_forward(image, params, c, true);
    for (const auto& map : out.attention.full_maps.front()) {
      const auto s = map.shape();
      for (std::size_t r = 0; r < s[0]; ++r) {
        ++rows;
        if (!is_distribution(map.data().subspan(r * s[1], s[1]))) ++bad_rows;
      }
    }
    const std::size_t g = c.grid();
    std::vector<Tensor> resampled;
    const Grid to{side(rng), side(rng)};
    for (const auto& row : out.attention.class_rows.front()) {
      auto ip = interpolate_attention(row.data(), {g, g}, to, modes[trial % 3]);
      ++interps;
      if (!is_distribution(ip.values)) ++bad_interp;
      resampled.push_back(Tensor::vector(ip.values));
    }
    for (const auto& heads : {out.attention.class_rows.front(), resampled}) {
      ++aggs;
      if (!is_distribution(aggregate_heads(heads, temp(rng)).data())) ++bad_agg;
      for (auto a : {Aggregation::kMean, Aggregation::kMin, Aggregation::kMax}) {
        ++aggs;
        if (!is_distribution(aggregate_heads_alt(heads, a).data())) ++bad_agg;
      }
    }
    // KL: independent pair, a perturbed pair, and the identical pair.
    const std::size_t n = 2 + trial % 64;
    auto p = random_distribution(n, rng, 0.5);
    auto q = random_distribution(n, rng, 0.5);
    auto r = p;
    r[0] += 1e-3;
    r[1] = std::max(0.0, r[1] - 1e-3);
    double total = 0.0;
    for (double x : r) total += x;
    for (auto& x : r) x /= total;
    const double kpq = kl_divergence(Tensor::vector(p), Tensor::vector(q)).item();
    const double kpr = kl_divergence(Tensor::vector(p), Tensor::vector(r)).item();
    const double kpp = kl_divergence(Tensor::vector(p), Tensor::vector(p)).item();
    kls += 3;
    if (!(kpq > 1e-9)) ++bad_kl;
    if (!(kpr > 0.0)) ++bad_kl;
    if (!(std::abs(kpp) <= 1e-9)) ++bad_kl;
  }
  const std::size_t bad = bad_rows + bad_interp + bad_agg + bad_kl;
  return {bad == 0,
          fmt::format("1000 cases: {} attention rows ({} bad), {} interpolated ({} bad), "
                      "{} aggregated ({} bad), {} KL ({} bad)",
                      rows, bad_rows, interps, bad_interp, aggs, bad_agg, kls, bad_kl)};
}

// 3 -------------------------------------------------------------------------

Outcome case_reductions() {
  std::mt19937_64 rng(77);
  std::uniform_int_distribution<std::size_t> hd(1, 4), gd(1, 6);
  double worst_b = 0.0, worst_id = 0.0;
  std::size_t argmax_flips = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t h = hd(rng), g = gd(rng);
    ClassAttention t, s;
    t.grid = s.grid = g;
    for (std::size_t i = 0; i < h; ++i) {
      t.heads.push_back(Tensor::vector(random_distribution(g * g + 1, rng)));
      s.heads.push_back(Tensor::vector(random_distribution(g * g + 1, rng)));
    }
    DistillConfig cfg;
    cfg.interpolation = static_cast<Interpolation>(trial % 3);
    const double a = ag_loss_via(AgCase::kSameShape, t, s, cfg).item();
    const double b = ag_loss_via(AgCase::kResample, t, s, cfg).item();
    worst_b = std::max(worst_b, std::abs(a - b));

    auto p = Tensor::vector(random_distribution(g * g + 1, rng));
    auto id = aggregate_heads({p}, 1.0);
    for (std::size_t i = 0; i < p.numel(); ++i)
      worst_id = std::max(worst_id, std::abs(id.data()[i] - p.data()[i]));

    auto argmax = [](std::span<const double> v) {
      return std::max_element(v.begin(), v.end()) - v.begin();
    };
    const auto ref = argmax(aggregate_heads(t.heads, 0.5).data());
    for (double temp : {1.0, 10.0, 100.0})
      if (argmax(aggregate_heads(t.heads, temp).data()) != ref) ++argmax_flips;
  }
  return {worst_b <= 1e-6 && worst_id <= 1e-6 && argmax_flips == 0,
          fmt::format("200 trials: |b - a| max {:.2e}, H=1 T=1 identity max {:.2e}, "
                      "argmax changes across T {}",
                      worst_b, worst_id, argmax_flips)};
}

// 4 -------------------------------------------------------------------------

Outcome interpolation_oracle() {
  std::mt19937_64 rng(4);
  const std::pair<Interpolation, const char*> modes[] = {
      {Interpolation::kBicubic, "bicubic"},
      {Interpolation::kBilinear, "bilinear"},
      {Interpolation::kNearest, "nearest"}};
  double worst = 0.0;
  std::size_t pairs = 0;
  for (const auto& [mode, name] : modes) {
    for (int from = 1; from <= 8; ++from) {
      for (int to = 1; to <= 8; ++to) {
        for (int rep = 0; rep < 3; ++rep) {
          auto row = random_distribution(from * from + 1, rng, 0.7);
          auto got = interpolate_attention(
              row, {std::size_t(from), std::size_t(from)},
              {std::size_t(to), std::size_t(to)}, mode);
          auto ref = akd::testing::reference_interpolate_row(row, from, to, name);
          for (std::size_t i = 0; i < ref.size(); ++i)
            worst = std::max(worst, std::abs(got.values[i] - ref[i]));
        }
        ++pairs;
      }
    }
  }
  return {worst <= 1e-6,
          fmt::format("{} grid pairs (1x1..8x8 both ways, 3 modes), max deviation {:.2e}",
                      pairs, worst)};
}

// 5 -------------------------------------------------------------------------

// Toy-scale distillation lr; see README.
constexpr double kDistillLrScale = 4e-3;

Outcome directional_ablation() {
  const auto t0 = Clock::now();
  RunConfig cfg = RunConfig::defaults();
  cfg.set_seed(1);
  cfg.train.total_epochs = 100;
  cfg.train.augment = false;
  cfg.train.lr_scale = kDistillLrScale;

  SyntheticSpec spec;
  spec.count = 5000;
  spec.seed = mix_seed(1, 1);
  const auto train = generate_synthetic(spec);
  spec.count = 1000;
  spec.seed = mix_seed(1, 2);
  const auto val = generate_synthetic(spec);

  auto classifier = Classifier::create(cfg.vit_teacher, 8, cfg.pretrain.seed);
  pretrain_classifier(classifier, train, cfg.pretrain, 1);
  const double teacher_acc = classifier_accuracy(classifier, val, 1);
  const auto teacher = Teacher::frozen(classifier.config, classifier.params);
  std::fprintf(stderr, "  [5] teacher val accuracy %.4f (%.0fs)\n", teacher_acc,
               seconds_since(t0));

  auto knn = [&](const ViTParams& p, const ViTConfig& c) {
    auto a = extract_features(p, c, train);
    auto b = extract_features(p, c, val);
    return knn_classify(a, b, cfg.eval.knn_k, cfg.eval.knn_tau);
  };
  const auto init = Student::create(cfg.vit_student, teacher.config.embed_dim(),
                                    cfg.projector_depth, cfg.train.seed);
  const double random_knn = knn(init.params, init.config);

  auto distill = [&](double lambda) {
    DistillRun run;
    run.teacher = teacher;
    run.student = init.clone();
    run.distill = cfg.distill;
    run.distill.lambda = lambda;
    run.train = cfg.train;
    run.data = &train;
    auto res = run_distillation(std::move(run));
    const double acc = knn(res.student.params, res.student.config);
    std::fprintf(stderr, "  [5] lambda %.2g: k-NN %.4f (%.0fs)\n", lambda, acc,
                 seconds_since(t0));
    return acc;
  };
  const double pa_ag = distill(cfg.distill.lambda);
  const double pa = distill(0.0);
  const double elapsed = seconds_since(t0);
  const bool pass = teacher_acc >= 0.90 && pa_ag >= pa &&
                    pa - random_knn >= 0.10 && pa_ag - random_knn >= 0.10 &&
                    elapsed < 30 * 60;
  return {pass, fmt::format("teacher {:.1f}%, random k-NN {:.1f}%, PA-only {:.1f}%, "
                            "PA+AG {:.1f}%, {:.0f}s",
                            100 * teacher_acc, 100 * random_knn, 100 * pa,
                            100 * pa_ag, elapsed)};
}

// 6 -------------------------------------------------------------------------

std::vector<std::uint8_t> teacher_bytes(const Teacher& t) {
  Checkpoint c;
  append_vit(c, t.params, t.config);
  return encode_checkpoint(c);
}

Outcome teacher_freeze_and_views() {
  SyntheticSpec spec;
  spec.count = 50;
  spec.image_size = 16;
  spec.seed = 6;
  const auto data = generate_synthetic(spec);
  ViTConfig tc;
  tc.image_size = 16;
  tc.patch_size = 4;
  tc.layers = 2;
  tc.heads = 2;
  tc.head_dim = 4;
  ViTConfig sc = tc;
  sc.patch_size = 8;
  sc.heads = 1;
  sc.head_dim = 6;

  std::size_t bad_views = 0, epochs = 0;
  bool frozen = true;
  for (bool aug : {true, false}) {
    const auto teacher = Teacher::frozen(tc, init_vit(tc, 61));
    const auto before = teacher_bytes(teacher);
    DistillRun run;
    run.teacher = teacher;  // shares storage with `teacher`
    run.student = Student::create(sc, tc.embed_dim(), 2, 62);
    run.train.total_epochs = 4;
    run.train.batch_size = 16;
    run.train.lr_scale = 0.05;
    run.train.augment = aug;
    run.data = &data;
    auto res = run_distillation(std::move(run));
    for (const auto& m : res.history) {
      ++epochs;
      if (m.views != data.size()) ++bad_views;
      if (m.steps != (data.size() + 15) / 16) ++bad_views;
    }
    frozen = frozen && teacher_bytes(teacher) == before;

    // Epoch-level path with the caller's teacher directly.
    auto student = Student::create(sc, tc.embed_dim(), 2, 63);
    auto state = OptimizerState::for_params(student.named());
    TrainConfig t;
    t.total_epochs = 2;
    t.batch_size = 16;
    t.lr_scale = 0.05;
    t.augment = aug;
    for (std::size_t e = 0; e < 2; ++e) {
      auto m = distill_epoch(teacher, student, state, data, DistillConfig{}, t,
                             EpochContext{e, 1, nullptr});
      ++epochs;
      if (m.views != data.size()) ++bad_views;
    }
    for (const auto& np : teacher.params.named()) frozen = frozen && !np.tensor.has_grad();
    frozen = frozen && teacher_bytes(teacher) == before;
  }
  return {frozen && bad_views == 0,
          fmt::format("teacher bytes unchanged: {}; {} epochs, {} with views != {} or wrong step count",
                      frozen ? "yes" : "no", epochs, bad_views, data.size())};
}

// 7 and 8 drive the command-line tool --------------------------------------

int sh(const std::string& cmd) {
  const int rc = std::system(cmd.c_str());
  return rc == -1 ? -1 : WEXITSTATUS(rc);
}

std::string cli() { return AKD_CLI_PATH; }
std::string tiny_config() { return std::string(AKD_SOURCE_DIR) + "/configs/tiny.json"; }

std::vector<std::string> lines_without_wall_time(const fs::path& jsonl) {
  std::vector<std::string> out;
  std::ifstream in(jsonl);
  for (std::string line; std::getline(in, line);) {
    auto j = nlohmann::ordered_json::parse(line);
    j.erase("wall_time_s");
    out.push_back(j.dump());
  }
  return out;
}

Outcome reproducibility() {
  const auto dir = scratch("repro");
  const std::string q = " 2>>" + (dir / "log.txt").string() + " >/dev/null";
  const std::string base = cli() + " ";
  int rc = sh(base + "gen-data --seed 7 --count 120 --val-count 40 --image-size 16 --out " +
              (dir / "data").string() + q);
  for (const char* run : {"a", "b"}) {
    rc |= sh(base + "make-teacher --config " + tiny_config() + " --seed 7 --threads 1 --data " +
             (dir / "data").string() + " --out " + (dir / run / "teacher").string() + q);
    rc |= sh(base + "distill --config " + tiny_config() + " --seed 7 --threads 1 --teacher " +
             (dir / run / "teacher" / "teacher.akd").string() + " --data " +
             (dir / "data").string() + " --out " + (dir / run / "student").string() + q);
  }
  if (rc != 0) return {false, "command failed, see " + (dir / "log.txt").string()};
  const auto ma = lines_without_wall_time(dir / "a" / "student" / "metrics.jsonl");
  const auto mb = lines_without_wall_time(dir / "b" / "student" / "metrics.jsonl");
  const bool teacher_same = read_file((dir / "a" / "teacher" / "teacher.akd").string()) ==
                            read_file((dir / "b" / "teacher" / "teacher.akd").string());
  const bool final_same = read_file((dir / "a" / "student" / "final.akd").string()) ==
                          read_file((dir / "b" / "student" / "final.akd").string());
  std::size_t snapshots = 0, snapshot_diff = 0;
  for (const auto& e : fs::directory_iterator(dir / "a" / "student")) {
    const auto name = e.path().filename().string();
    if (name.rfind("checkpoint_epoch_", 0) != 0) continue;
    ++snapshots;
    if (read_file(e.path().string()) != read_file((dir / "b" / "student" / name).string()))
      ++snapshot_diff;
  }
  const bool pass = !ma.empty() && ma == mb && teacher_same && final_same && snapshot_diff == 0;
  return {pass, fmt::format("{} metric lines equal: {}; final checkpoint identical: {}; "
                            "{} epoch snapshots, {} differ; teacher identical: {}",
                            ma.size(), ma == mb ? "yes" : "no", final_same ? "yes" : "no",
                            snapshots, snapshot_diff, teacher_same ? "yes" : "no")};
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

Outcome aggregation_harness() {
  const auto dir = scratch("ablate");
  const int rc = sh(cli() + " ablate --axis aggregation --config " + tiny_config() +
                    " --seed 8 --threads 1 --count 160 --val-count 48 --out " +
                    dir.string() + " >" + (dir / "stdout.csv").string() + " 2>" +
                    (dir / "log.txt").string());
  if (rc != 0) return {false, fmt::format("ablate exited {}", rc)};
  const std::vector<std::string> columns = {
      "axis", "variant", "student", "ag_case", "lambda", "aggregation",
      "attention_layers", "patch_tokens", "status", "knn_top1", "linear_top1",
      "loss_pa", "loss_ag", "loss_total", "attention_drift", "wall_time_s", "note"};
  std::ifstream in(dir / "ablation_aggregation.csv");
  std::string line;
  if (!std::getline(in, line) || split_csv_line(line) != columns)
    return {false, "missing or wrong CSV header"};
  auto col = [&](const std::string& name) {
    return std::find(columns.begin(), columns.end(), name) - columns.begin();
  };
  std::vector<std::string> seen;
  std::size_t problems = 0, rows = 0;
  for (; std::getline(in, line); ++rows) {
    const auto f = split_csv_line(line);
    if (f.size() != columns.size()) {
      ++problems;
      continue;
    }
    if (f[col("axis")] != "aggregation") ++problems;
    if (f[col("status")] == "ok") seen.push_back(f[col("variant")]);
    for (const char* metric : {"knn_top1", "linear_top1", "attention_drift"}) {
      const double v = std::strtod(f[col(metric)].c_str(), nullptr);
      if (f[col(metric)].empty() || !(v >= 0.0) || !std::isfinite(v)) ++problems;
      if (std::string(metric) != "attention_drift" && v > 1.0) ++problems;
    }
    if (f[col("status")] == "ok")
      for (const char* loss : {"loss_pa", "loss_ag", "loss_total"})
        if (!std::isfinite(std::strtod(f[col(loss)].c_str(), nullptr))) ++problems;
  }
  std::size_t strategies = 0;
  for (const char* s : {"log_sum", "mean", "min", "max"})
    strategies += std::count(seen.begin(), seen.end(), s);
  const bool same_stdout = read_file((dir / "stdout.csv").string()) ==
                           read_file((dir / "ablation_aggregation.csv").string());
  return {problems == 0 && strategies == 4 && same_stdout,
          fmt::format("{} rows, {}/4 aggregations ok, {} schema problems, stdout matches file: {}",
                      rows, strategies, problems, same_stdout ? "yes" : "no")};
}

}  // namespace

int main(int argc, char** argv) {
  spdlog::set_level(spdlog::level::warn);
  // Optional arguments select criteria by number; default runs all.
  std::vector<bool> selected(9, argc == 1);
  for (int i = 1; i < argc; ++i) {
    const int k = std::atoi(argv[i]);
    if (k >= 1 && k <= 8) selected[k] = true;
  }
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"gradient suite", gradient_suite},
      {"distribution invariants", distribution_invariants},
      {"case reductions", case_reductions},
      {"interpolation oracle", interpolation_oracle},
      {"directional ablation", directional_ablation},
      {"teacher freeze and single view", teacher_freeze_and_views},
      {"reproducibility", reproducibility},
      {"aggregation ablation harness", aggregation_harness},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (!selected[i + 1]) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::printf("[%s] %zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1,
                criteria[i].first.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  return failures;
}
