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

#include "akd/gradsuite.hpp"

#include <memory>
#include <random>

#include "akd/data.hpp"
#include "akd/ops.hpp"

namespace akd {
namespace {

Tensor uniform(Shape shape, std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> v(numel(shape));
  for (auto& x : v) x = dist(rng);
  return Tensor::from(std::move(shape), std::move(v));
}

// Teacher rows are fixed probability vectors; student rows come from
// softmax over trainable logits so the check covers the full path.
ClassAttention fixed_attention(std::size_t heads, std::size_t grid,
                               std::mt19937_64& rng) {
  std::gamma_distribution<double> gamma(1.0, 1.0);
  ClassAttention a;
  a.grid = grid;
  for (std::size_t h = 0; h < heads; ++h) {
    std::vector<double> p(grid * grid + 1);
    double total = 0.0;
    for (auto& x : p) total += (x = gamma(rng) + 1e-6);
    for (auto& x : p) x /= total;
    a.heads.push_back(Tensor::vector(std::move(p)));
  }
  return a;
}

struct StudentRows {
  std::vector<Tensor> logits;
  std::size_t grid = 0;
  ClassAttention build() const {
    ClassAttention a;
    a.grid = grid;
    for (const auto& l : logits) a.heads.push_back(softmax(l, 0));
    return a;
  }
};

StudentRows student_rows(std::size_t heads, std::size_t grid,
                         std::mt19937_64& rng) {
  StudentRows s;
  s.grid = grid;
  for (std::size_t h = 0; h < heads; ++h)
    s.logits.push_back(uniform({grid * grid + 1}, rng, -2.0, 2.0));
  return s;
}

void randomize(const ViTParams& p, std::mt19937_64& rng) {
  // Init-scale rows sit on the sharp part of layer norm for a 1e-3 step.
  std::uniform_real_distribution<double> dist(-0.3, 0.3);
  for (auto& np : p.named())
    if (np.trainable)
      for (auto& v : np.tensor.mutable_data()) v = dist(rng);
}

void add_leaves(GradProblem& g, const std::vector<NamedParam>& named) {
  for (const auto& np : named) {
    if (!np.trainable) continue;
    g.leaves.push_back(np.tensor);
    g.leaf_names.push_back(np.name);
  }
}

}  // namespace

std::vector<GradProblem> gradient_problems(const DistillConfig& cfg,
                                           BlockForm form,
                                           std::uint64_t seed) {
  cfg.validate();
  std::mt19937_64 rng(mix_seed(seed, 0x67726164));
  std::vector<GradProblem> out;

  {
    const std::size_t ds = 5, dt = 7;
    auto t_cls = uniform({dt}, rng, -1.0, 1.0);
    auto s_cls = uniform({ds}, rng, -1.0, 1.0);
    auto proj = std::make_shared<Projector>(ds, dt, 2, rng());
    GradProblem g{"pa_loss", seed, {}, {s_cls}, {"student_cls"}};
    add_leaves(g, proj->named());
    const auto reduction = cfg.squared_error;
    g.loss = [=] { return pa_loss(t_cls, s_cls, *proj, reduction); };
    out.push_back(std::move(g));
  }

  struct Shapes {
    std::size_t th, tg, sh, sg;
    const char* name;
  };
  const Shapes shapes[] = {
      {3, 3, 3, 3, "ag_loss/a"},
      {2, 4, 2, 2, "ag_loss/b"},
      {4, 3, 2, 3, "ag_loss/c"},
      {4, 4, 2, 2, "ag_loss/d"},
  };
  for (const auto& s : shapes) {
    auto teacher = fixed_attention(s.th, s.tg, rng);
    auto student = std::make_shared<StudentRows>(student_rows(s.sh, s.sg, rng));
    GradProblem g{s.name, seed, {}, student->logits, {}};
    for (std::size_t h = 0; h < s.sh; ++h)
      g.leaf_names.push_back("logits." + std::to_string(h));
    g.loss = [=] { return ag_loss(teacher, student->build(), cfg); };
    out.push_back(std::move(g));
  }

  {
    const std::size_t ds = 4, dt = 6;
    auto t_cls = uniform({dt}, rng, -1.0, 1.0);
    auto s_cls = uniform({ds}, rng, -1.0, 1.0);
    auto proj = std::make_shared<Projector>(ds, dt, 2, rng());
    auto teacher = fixed_attention(4, 4, rng);
    auto student = std::make_shared<StudentRows>(student_rows(2, 2, rng));
    GradProblem g{"total_loss", seed, {}, {s_cls}, {"student_cls"}};
    add_leaves(g, proj->named());
    for (std::size_t h = 0; h < student->logits.size(); ++h) {
      g.leaves.push_back(student->logits[h]);
      g.leaf_names.push_back("logits." + std::to_string(h));
    }
    g.loss = [=] {
      return total_loss(pa_loss(t_cls, s_cls, *proj, cfg.squared_error),
                        ag_loss(teacher, student->build(), cfg), cfg.lambda);
    };
    out.push_back(std::move(g));
  }

  {
    ViTConfig tc;
    tc.image_size = 8;
    tc.patch_size = 2;
    tc.channels = 2;
    tc.layers = 2;
    tc.heads = 2;
    tc.head_dim = 3;
    tc.mlp_hidden = 12;
    ViTConfig sc = tc;
    sc.patch_size = 4;
    sc.heads = 1;
    sc.head_dim = 4;
    sc.block_form = form;

    auto tp = init_vit(tc, rng());
    randomize(tp, rng);
    auto sp = std::make_shared<ViTParams>(init_vit(sc, rng()));
    randomize(*sp, rng);
    auto proj = std::make_shared<Projector>(sc.embed_dim(), tc.embed_dim(), 2,
                                            rng());
    auto image = uniform({tc.channels, tc.image_size, tc.image_size}, rng,
                         -1.0, 1.0);
    Tensor t_cls;
    ClassAttention t_rows;
    {
      NoGradScope no_grad;
      auto t = vit_forward(image, tp, tc);
      t_cls = t.class_token.detach();
      t_rows = ClassAttention::from_record(t.attention, tc.layers - 1);
      for (auto& h : t_rows.heads) h = h.detach();
    }
    GradProblem g{"vit2_total_loss", seed, {}, {}, {}};
    add_leaves(g, sp->named());
    add_leaves(g, proj->named());
    g.loss = [=] {
      auto s = vit_forward(image, *sp, sc);
      auto s_rows = ClassAttention::from_record(s.attention, sc.layers - 1);
      return total_loss(pa_loss(t_cls, s.class_token, *proj, cfg.squared_error),
                        ag_loss(t_rows, s_rows, cfg), cfg.lambda);
    };
    out.push_back(std::move(g));
  }
  return out;
}

std::vector<GradCheckResult> run_gradient_suite(
    const DistillConfig& cfg, BlockForm form,
    const std::vector<std::uint64_t>& seeds, const GradCheckOptions& options) {
  std::vector<GradCheckResult> results;
  for (auto seed : seeds) {
    for (auto& p : gradient_problems(cfg, form, seed)) {
      auto r = check_gradients(p.name + "#" + std::to_string(seed), p.loss,
                               p.leaves, p.leaf_names, options);
      results.push_back(std::move(r));
    }
  }
  return results;
}

}  // namespace akd
