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

/// Residual layout of one transformer block.
enum class BlockForm {
  /// z' = MLP(LN(MSA(z) + z)) + z, a single normalization per block.
  kSingleNorm,
  /// Conventional pre-norm block: z + MSA(LN(z)), then h + MLP(LN(h)).
  kPreNorm,
};

enum class PosEmbed { kLearnable, kFixedSinCos };

std::string to_string(BlockForm form);
std::string to_string(PosEmbed pos);
BlockForm parse_block_form(const std::string& text);
PosEmbed parse_pos_embed(const std::string& text);

struct ViTConfig {
  std::size_t image_size = 32;
  std::size_t patch_size = 8;
  std::size_t channels = 3;
  std::size_t layers = 6;
  std::size_t heads = 4;
  std::size_t head_dim = 16;
  std::size_t mlp_hidden = 0;  // 0 selects 4 * embed_dim
  BlockForm block_form = BlockForm::kSingleNorm;
  PosEmbed pos_embed = PosEmbed::kLearnable;

  std::size_t embed_dim() const { return heads * head_dim; }
  std::size_t grid() const { return image_size / patch_size; }
  std::size_t num_patches() const { return grid() * grid(); }
  std::size_t tokens() const { return num_patches() + 1; }
  std::size_t mlp_width() const {
    return mlp_hidden == 0 ? 4 * embed_dim() : mlp_hidden;
  }

  /// Throws ConfigError on inconsistent hyperparameters.
  void validate() const;

  bool operator==(const ViTConfig&) const = default;
};

struct BlockParams {
  Tensor norm_attn_w, norm_attn_b;  // kPreNorm only
  Tensor q_w, q_b, k_w, k_b, v_w, v_b;
  Tensor proj_w, proj_b;
  Tensor norm_mlp_w, norm_mlp_b;
  Tensor fc1_w, fc1_b, fc2_w, fc2_b;
};

struct NamedParam {
  std::string name;
  Tensor tensor;
  bool decay = true;      // subject to weight decay
  bool trainable = true;  // false for fixed positional tables
};

struct ViTParams {
  Tensor patch_w, patch_b;
  Tensor cls_token;
  Tensor pos_embed;
  std::vector<BlockParams> blocks;
  Tensor norm_w, norm_b;

  /// Handles to every tensor in a stable order; shares storage with *this.
  std::vector<NamedParam> named() const;
  /// Copy whose tensors share values with *this but own their gradients.
  ViTParams alias() const;
  ViTParams clone() const;
};

std::vector<std::pair<std::string, Shape>> expected_shapes(
    const ViTConfig& config);

/// Throws ConfigError listing every missing or mis-shaped tensor.
void audit_params(const ViTParams& params, const ViTConfig& config);

ViTParams init_vit(const ViTConfig& config, std::uint64_t seed);

/// Rebuilds ViTParams from named tensors (e.g. a checkpoint), then audits.
ViTParams params_from_named(const std::vector<NamedParam>& tensors,
                            const ViTConfig& config,
                            const std::string& prefix = "");

/// Per-layer, per-head class-token attention rows (row 0 of each map).
struct AttentionRecord {
  std::size_t grid = 0;  // patch grid side; rows have grid*grid + 1 entries
  std::vector<std::vector<Tensor>> class_rows;  // [layer][head]
  std::vector<std::vector<Tensor>> full_maps;   // detached; empty unless asked

  std::size_t layers() const { return class_rows.size(); }
  std::size_t heads() const {
    return class_rows.empty() ? 0 : class_rows.front().size();
  }
};

struct EncoderOutput {
  Tensor class_token;   // [D]
  Tensor patch_tokens;  // [N x D]
  AttentionRecord attention;
};

struct MsaOutput {
  Tensor y;                   // [(N+1) x D]
  std::vector<Tensor> maps;   // H post-softmax maps [(N+1) x (N+1)]
};

struct BlockOutput {
  Tensor z;
  std::vector<Tensor> maps;
};

/// [class token; patch projections] + positional embeddings.
Tensor patch_embed(const Tensor& image, const ViTParams& params,
                   const ViTConfig& config);

MsaOutput msa_forward(const Tensor& z, const BlockParams& block,
                      const ViTConfig& config);

BlockOutput block_forward(const Tensor& z, const BlockParams& block,
                          const ViTConfig& config);

EncoderOutput vit_forward(const Tensor& image, const ViTParams& params,
                          const ViTConfig& config,
                          bool record_full_maps = false);

/// 2-D sine-cosine table for the patch grid, zero row for the class token.
Tensor sincos_pos_embed(const ViTConfig& config);

}  // namespace akd
