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

#include "akd/vit.hpp"

#include <cmath>
#include <map>
#include <random>
#include <sstream>

#include "akd/errors.hpp"
#include "akd/ops.hpp"

namespace akd {

std::string to_string(BlockForm form) {
  return form == BlockForm::kSingleNorm ? "single_ln" : "pre_ln";
}

std::string to_string(PosEmbed pos) {
  return pos == PosEmbed::kLearnable ? "learnable" : "fixed_sincos";
}

BlockForm parse_block_form(const std::string& text) {
  if (text == "single_ln") return BlockForm::kSingleNorm;
  if (text == "pre_ln") return BlockForm::kPreNorm;
  throw ConfigError("unknown block_form '" + text +
                    "' (expected single_ln or pre_ln)");
}

PosEmbed parse_pos_embed(const std::string& text) {
  if (text == "learnable") return PosEmbed::kLearnable;
  if (text == "fixed_sincos") return PosEmbed::kFixedSinCos;
  throw ConfigError("unknown pos_embed '" + text +
                    "' (expected learnable or fixed_sincos)");
}

void ViTConfig::validate() const {
  if (image_size == 0 || patch_size == 0 || channels == 0 || layers == 0 ||
      heads == 0 || head_dim == 0) {
    throw ConfigError("ViT dimensions must be positive");
  }
  if (image_size % patch_size != 0) {
    throw ConfigError("patch_size " + std::to_string(patch_size) +
                      " does not divide image_size " +
                      std::to_string(image_size));
  }
  if (mlp_hidden != 0 && mlp_hidden % embed_dim() != 0) {
    throw ConfigError("mlp_hidden must be a multiple of embed_dim " +
                      std::to_string(embed_dim()));
  }
  if (pos_embed == PosEmbed::kFixedSinCos && embed_dim() % 4 != 0) {
    throw ConfigError("fixed_sincos positional embedding needs embed_dim % 4 == 0");
  }
}

namespace {

template <class Fn>
void for_each_block_param(const BlockParams& b, bool pre_norm, Fn&& fn) {
  if (pre_norm) {
    fn("norm_attn.weight", b.norm_attn_w, false);
    fn("norm_attn.bias", b.norm_attn_b, false);
  }
  fn("attn.q.weight", b.q_w, true);
  fn("attn.q.bias", b.q_b, false);
  fn("attn.k.weight", b.k_w, true);
  fn("attn.k.bias", b.k_b, false);
  fn("attn.v.weight", b.v_w, true);
  fn("attn.v.bias", b.v_b, false);
  fn("attn.proj.weight", b.proj_w, true);
  fn("attn.proj.bias", b.proj_b, false);
  fn("norm_mlp.weight", b.norm_mlp_w, false);
  fn("norm_mlp.bias", b.norm_mlp_b, false);
  fn("mlp.fc1.weight", b.fc1_w, true);
  fn("mlp.fc1.bias", b.fc1_b, false);
  fn("mlp.fc2.weight", b.fc2_w, true);
  fn("mlp.fc2.bias", b.fc2_b, false);
}

// Mutable twin used when (re)assigning tensors by name.
template <class Fn>
void for_each_slot(ViTParams& p, bool pre_norm, Fn&& fn) {
  fn("patch_embed.weight", p.patch_w);
  fn("patch_embed.bias", p.patch_b);
  fn("cls_token", p.cls_token);
  fn("pos_embed", p.pos_embed);
  for (std::size_t l = 0; l < p.blocks.size(); ++l) {
    auto& b = p.blocks[l];
    const std::string prefix = "blocks." + std::to_string(l) + ".";
    if (pre_norm) {
      fn(prefix + "norm_attn.weight", b.norm_attn_w);
      fn(prefix + "norm_attn.bias", b.norm_attn_b);
    }
    fn(prefix + "attn.q.weight", b.q_w);
    fn(prefix + "attn.q.bias", b.q_b);
    fn(prefix + "attn.k.weight", b.k_w);
    fn(prefix + "attn.k.bias", b.k_b);
    fn(prefix + "attn.v.weight", b.v_w);
    fn(prefix + "attn.v.bias", b.v_b);
    fn(prefix + "attn.proj.weight", b.proj_w);
    fn(prefix + "attn.proj.bias", b.proj_b);
    fn(prefix + "norm_mlp.weight", b.norm_mlp_w);
    fn(prefix + "norm_mlp.bias", b.norm_mlp_b);
    fn(prefix + "mlp.fc1.weight", b.fc1_w);
    fn(prefix + "mlp.fc1.bias", b.fc1_b);
    fn(prefix + "mlp.fc2.weight", b.fc2_w);
    fn(prefix + "mlp.fc2.bias", b.fc2_b);
  }
  fn("norm.weight", p.norm_w);
  fn("norm.bias", p.norm_b);
}

bool has_pre_norm(const ViTParams& p) {
  return !p.blocks.empty() && p.blocks.front().norm_attn_w.defined();
}

}  // namespace

std::vector<NamedParam> ViTParams::named() const {
  std::vector<NamedParam> out;
  const bool pre_norm = has_pre_norm(*this);
  out.push_back({"patch_embed.weight", patch_w, true, true});
  out.push_back({"patch_embed.bias", patch_b, false, true});
  out.push_back({"cls_token", cls_token, false, true});
  out.push_back({"pos_embed", pos_embed, false, pos_embed.requires_grad()});
  for (std::size_t l = 0; l < blocks.size(); ++l) {
    const std::string prefix = "blocks." + std::to_string(l) + ".";
    for_each_block_param(blocks[l], pre_norm,
                         [&](const char* name, const Tensor& t, bool decay) {
                           out.push_back({prefix + name, t, decay, true});
                         });
  }
  out.push_back({"norm.weight", norm_w, false, true});
  out.push_back({"norm.bias", norm_b, false, true});
  return out;
}

ViTParams ViTParams::alias() const {
  ViTParams copy = *this;
  for_each_slot(copy, has_pre_norm(copy),
                [](const std::string&, Tensor& t) { t = t.alias(); });
  return copy;
}

ViTParams ViTParams::clone() const {
  ViTParams copy = *this;
  for_each_slot(copy, has_pre_norm(copy),
                [](const std::string&, Tensor& t) { t = t.clone(); });
  return copy;
}

std::vector<std::pair<std::string, Shape>> expected_shapes(
    const ViTConfig& c) {
  const std::size_t d = c.embed_dim(), m = c.mlp_width();
  std::vector<std::pair<std::string, Shape>> out = {
      {"patch_embed.weight", {c.channels * c.patch_size * c.patch_size, d}},
      {"patch_embed.bias", {d}},
      {"cls_token", {d}},
      {"pos_embed", {c.tokens(), d}},
  };
  for (std::size_t l = 0; l < c.layers; ++l) {
    const std::string p = "blocks." + std::to_string(l) + ".";
    if (c.block_form == BlockForm::kPreNorm) {
      out.push_back({p + "norm_attn.weight", {d}});
      out.push_back({p + "norm_attn.bias", {d}});
    }
    for (const char* proj : {"q", "k", "v", "proj"}) {
      out.push_back({p + "attn." + proj + ".weight", {d, d}});
      out.push_back({p + "attn." + proj + ".bias", {d}});
    }
    out.push_back({p + "norm_mlp.weight", {d}});
    out.push_back({p + "norm_mlp.bias", {d}});
    out.push_back({p + "mlp.fc1.weight", {d, m}});
    out.push_back({p + "mlp.fc1.bias", {m}});
    out.push_back({p + "mlp.fc2.weight", {m, d}});
    out.push_back({p + "mlp.fc2.bias", {d}});
  }
  out.push_back({"norm.weight", {d}});
  out.push_back({"norm.bias", {d}});
  return out;
}

void audit_params(const ViTParams& params, const ViTConfig& config) {
  config.validate();
  std::vector<std::string> problems;
  if (params.blocks.size() != config.layers) {
    problems.push_back("blocks: expected " + std::to_string(config.layers) +
                       " layers, found " +
                       std::to_string(params.blocks.size()));
  } else {
    const bool pre_norm = config.block_form == BlockForm::kPreNorm;
    if (has_pre_norm(params) != pre_norm && !params.blocks.empty()) {
      problems.push_back("block_form: parameters do not match " +
                         to_string(config.block_form));
    } else {
      const auto expected = expected_shapes(config);
      const auto actual = params.named();
      if (expected.size() != actual.size()) {
        problems.push_back("parameter count mismatch");
      } else {
        for (std::size_t i = 0; i < expected.size(); ++i) {
          const auto& t = actual[i].tensor;
          if (!t.defined()) {
            problems.push_back(expected[i].first + ": missing");
          } else if (t.shape() != expected[i].second) {
            problems.push_back(expected[i].first + ": expected " +
                               to_string(expected[i].second) + ", found " +
                               to_string(t.shape()));
          }
        }
      }
    }
  }
  if (!problems.empty()) {
    std::ostringstream os;
    os << "ViT parameter audit failed:";
    for (const auto& p : problems) os << "\n  " << p;
    throw ConfigError(os.str());
  }
}

Tensor sincos_pos_embed(const ViTConfig& config) {
  const std::size_t d = config.embed_dim(), grid = config.grid();
  const std::size_t quarter = d / 4;
  std::vector<double> table(config.tokens() * d, 0.0);
  for (std::size_t gy = 0; gy < grid; ++gy) {
    for (std::size_t gx = 0; gx < grid; ++gx) {
      double* row = table.data() + (1 + gy * grid + gx) * d;
      // First half encodes the column, second half the row.
      for (std::size_t half = 0; half < 2; ++half) {
        const double pos = static_cast<double>(half == 0 ? gx : gy);
        for (std::size_t i = 0; i < quarter; ++i) {
          const double omega =
              1.0 / std::pow(10000.0, static_cast<double>(i) /
                                          static_cast<double>(quarter));
          row[half * 2 * quarter + i] = std::sin(pos * omega);
          row[half * 2 * quarter + quarter + i] = std::cos(pos * omega);
        }
      }
    }
  }
  return Tensor::from({config.tokens(), d}, std::move(table));
}

ViTParams init_vit(const ViTConfig& config, std::uint64_t seed) {
  config.validate();
  std::mt19937_64 rng(seed);
  auto xavier = [&](std::size_t fan_in, std::size_t fan_out) {
    const double bound =
        std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-bound, bound);
    std::vector<double> v(fan_in * fan_out);
    for (auto& x : v) x = dist(rng);
    return Tensor::from({fan_in, fan_out}, std::move(v), true);
  };
  auto trunc_normal = [&](Shape shape, double std) {
    std::normal_distribution<double> dist(0.0, std);
    std::vector<double> v(numel(shape));
    for (auto& x : v) {
      do {
        x = dist(rng);
      } while (std::abs(x) > 2.0 * std);
    }
    return Tensor::from(std::move(shape), std::move(v), true);
  };
  auto zeros = [](std::size_t n) { return Tensor::zeros({n}, true); };
  auto ones = [](std::size_t n) { return Tensor::full({n}, 1.0, true); };

  const std::size_t d = config.embed_dim(), m = config.mlp_width();
  ViTParams p;
  p.patch_w = xavier(config.channels * config.patch_size * config.patch_size, d);
  p.patch_b = zeros(d);
  p.cls_token = trunc_normal({d}, 0.02);
  if (config.pos_embed == PosEmbed::kLearnable) {
    p.pos_embed = trunc_normal({config.tokens(), d}, 0.02);
  } else {
    p.pos_embed = sincos_pos_embed(config);
  }
  for (std::size_t l = 0; l < config.layers; ++l) {
    BlockParams b;
    if (config.block_form == BlockForm::kPreNorm) {
      b.norm_attn_w = ones(d);
      b.norm_attn_b = zeros(d);
    }
    b.q_w = xavier(d, d);
    b.q_b = zeros(d);
    b.k_w = xavier(d, d);
    b.k_b = zeros(d);
    b.v_w = xavier(d, d);
    b.v_b = zeros(d);
    b.proj_w = xavier(d, d);
    b.proj_b = zeros(d);
    b.norm_mlp_w = ones(d);
    b.norm_mlp_b = zeros(d);
    b.fc1_w = xavier(d, m);
    b.fc1_b = zeros(m);
    b.fc2_w = xavier(m, d);
    b.fc2_b = zeros(d);
    p.blocks.push_back(std::move(b));
  }
  p.norm_w = ones(d);
  p.norm_b = zeros(d);
  return p;
}

ViTParams params_from_named(const std::vector<NamedParam>& tensors,
                            const ViTConfig& config,
                            const std::string& prefix) {
  config.validate();
  std::map<std::string, Tensor> by_name;
  for (const auto& t : tensors) by_name[t.name] = t.tensor;
  ViTParams p;
  p.blocks.resize(config.layers);
  const bool pre_norm = config.block_form == BlockForm::kPreNorm;
  std::vector<std::string> missing;
  for_each_slot(p, pre_norm, [&](const std::string& name, Tensor& slot) {
    auto it = by_name.find(prefix + name);
    if (it == by_name.end()) {
      missing.push_back(prefix + name);
      return;
    }
    slot = it->second;
    slot.set_requires_grad(true);
  });
  if (!missing.empty()) {
    std::ostringstream os;
    os << "ViT parameter audit failed:";
    for (const auto& m : missing) os << "\n  " << m << ": missing";
    throw ConfigError(os.str());
  }
  if (config.pos_embed == PosEmbed::kFixedSinCos) {
    p.pos_embed.set_requires_grad(false);
  }
  audit_params(p, config);
  return p;
}

Tensor patch_embed(const Tensor& image, const ViTParams& params,
                   const ViTConfig& config) {
  const Shape expected{config.channels, config.image_size, config.image_size};
  if (image.shape() != expected) {
    throw ConfigError("image shape " + to_string(image.shape()) +
                      " does not match config " + to_string(expected));
  }
  Tensor patches = patchify(image, config.patch_size);
  Tensor projected = add_bias(matmul(patches, params.patch_w), params.patch_b);
  Tensor cls = reshape(params.cls_token, {1, config.embed_dim()});
  return add(concat({cls, projected}, 0), params.pos_embed);
}

MsaOutput msa_forward(const Tensor& z, const BlockParams& block,
                      const ViTConfig& config) {
  const std::size_t d = config.head_dim;
  if (z.rank() != 2 || z.dim(1) != config.embed_dim()) {
    throw DimensionError("msa_forward: token matrix " + to_string(z.shape()) +
                         " does not match embed_dim " +
                         std::to_string(config.embed_dim()));
  }
  Tensor q = add_bias(matmul(z, block.q_w), block.q_b);
  Tensor k = add_bias(matmul(z, block.k_w), block.k_b);
  Tensor v = add_bias(matmul(z, block.v_w), block.v_b);
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));
  MsaOutput out;
  std::vector<Tensor> heads;
  for (std::size_t h = 0; h < config.heads; ++h) {
    Tensor qh = slice(q, 1, h * d, (h + 1) * d);
    Tensor kh = slice(k, 1, h * d, (h + 1) * d);
    Tensor vh = slice(v, 1, h * d, (h + 1) * d);
    Tensor attn = softmax(scale(matmul(qh, transpose(kh)), inv_sqrt_d), 1);
    heads.push_back(matmul(attn, vh));
    out.maps.push_back(std::move(attn));
  }
  Tensor y = heads.size() == 1 ? heads.front() : concat(heads, 1);
  out.y = add_bias(matmul(y, block.proj_w), block.proj_b);
  return out;
}

namespace {

Tensor mlp(const Tensor& x, const BlockParams& b) {
  Tensor hidden = gelu(add_bias(matmul(x, b.fc1_w), b.fc1_b));
  return add_bias(matmul(hidden, b.fc2_w), b.fc2_b);
}

}  // namespace

BlockOutput block_forward(const Tensor& z, const BlockParams& block,
                          const ViTConfig& config) {
  BlockOutput out;
  if (config.block_form == BlockForm::kSingleNorm) {
    MsaOutput msa = msa_forward(z, block, config);
    Tensor mixed = layer_norm(add(msa.y, z), block.norm_mlp_w, block.norm_mlp_b);
    out.z = add(mlp(mixed, block), z);
    out.maps = std::move(msa.maps);
  } else {
    MsaOutput msa = msa_forward(
        layer_norm(z, block.norm_attn_w, block.norm_attn_b), block, config);
    Tensor h = add(z, msa.y);
    out.z = add(h, mlp(layer_norm(h, block.norm_mlp_w, block.norm_mlp_b), block));
    out.maps = std::move(msa.maps);
  }
  return out;
}

EncoderOutput vit_forward(const Tensor& image, const ViTParams& params,
                          const ViTConfig& config, bool record_full_maps) {
  audit_params(params, config);
  const std::size_t tokens = config.tokens(), d = config.embed_dim();
  Tensor z = patch_embed(image, params, config);
  EncoderOutput out;
  out.attention.grid = config.grid();
  for (const auto& block : params.blocks) {
    BlockOutput b = block_forward(z, block, config);
    std::vector<Tensor> rows;
    std::vector<Tensor> maps;
    for (const auto& map : b.maps) {
      rows.push_back(reshape(slice(map, 0, 0, 1), {tokens}));
      if (record_full_maps) maps.push_back(map.detach());
    }
    out.attention.class_rows.push_back(std::move(rows));
    if (record_full_maps) out.attention.full_maps.push_back(std::move(maps));
    z = std::move(b.z);
  }
  Tensor normed = layer_norm(z, params.norm_w, params.norm_b);
  out.class_token = reshape(slice(normed, 0, 0, 1), {d});
  out.patch_tokens = slice(normed, 0, 1, tokens);
  return out;
}

}  // namespace akd
