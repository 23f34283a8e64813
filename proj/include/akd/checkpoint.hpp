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

#include <cstdint>
#include <string>
#include <vector>

#include "akd/tensor.hpp"
#include "akd/vit.hpp"

namespace akd {

enum class DType : std::uint8_t { kF32 = 1, kF64 = 2 };

struct NamedTensor {
  std::string name;
  Tensor tensor;
  DType dtype = DType::kF64;
};

using Checkpoint = std::vector<NamedTensor>;

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// "AKD1", u32 version, u32 count, then per tensor: u32 name length, UTF-8
/// name, u8 dtype tag, u32 rank, u64 extents, little-endian payload. A CRC32
/// of every preceding byte closes the file.
std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt);
/// Verifies the CRC (CrcError carries the CRC field offset) before parsing.
Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes);

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

/// Throws ConfigError when absent.
const Tensor& find_tensor(const Checkpoint& ckpt, const std::string& name);
bool has_tensor(const Checkpoint& ckpt, const std::string& name);

std::vector<NamedParam> as_named(const Checkpoint& ckpt);

/// Architecture record stored next to the weights as "<prefix>meta.vit_config".
Tensor encode_vit_config(const ViTConfig& config);
ViTConfig decode_vit_config(const Tensor& t);

/// Appends params (under `prefix`) and their config record.
void append_vit(Checkpoint& ckpt, const ViTParams& params,
                const ViTConfig& config, const std::string& prefix = "");
/// Rebuilds a ViT from a checkpoint written with append_vit.
std::pair<ViTConfig, ViTParams> load_vit(const Checkpoint& ckpt,
                                         const std::string& prefix = "");

}  // namespace akd
