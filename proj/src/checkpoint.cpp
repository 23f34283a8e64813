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

#include "akd/checkpoint.hpp"

#include <zlib.h>

#include <cmath>
#include <cstring>
#include <set>
#include <sstream>

#include "akd/errors.hpp"
#include "akd/io.hpp"

namespace akd {

namespace {

constexpr char kMagic[4] = {'A', 'K', 'D', '1'};
constexpr std::size_t kHeaderBytes = 12;
constexpr std::size_t kCrcBytes = 4;

std::uint32_t crc32_of(const std::uint8_t* data, std::size_t size) {
  uLong crc = crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed large buffers in pieces.
  while (size > 0) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(size, 1u << 30));
    crc = crc32(crc, data, chunk);
    data += chunk;
    size -= chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

std::string hex(std::uint32_t v) {
  std::ostringstream os;
  os << "0x" << std::hex << v;
  return os.str();
}

// Stable field order of the architecture record.
enum ConfigField {
  kImageSize,
  kPatchSize,
  kChannels,
  kLayers,
  kHeads,
  kHeadDim,
  kMlpHidden,
  kBlockForm,
  kPosEmbed,
  kFieldCount
};

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt) {
  std::set<std::string> seen;
  ByteWriter w;
  w.raw(kMagic, 4);
  w.u32(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(ckpt.size()));
  for (const auto& nt : ckpt) {
    if (nt.name.empty()) throw ContractError("checkpoint tensor with empty name");
    if (!seen.insert(nt.name).second) {
      throw ContractError("duplicate checkpoint tensor '" + nt.name + "'");
    }
    if (!nt.tensor.defined()) {
      throw ContractError("checkpoint tensor '" + nt.name + "' is undefined");
    }
    w.u32(static_cast<std::uint32_t>(nt.name.size()));
    w.raw(nt.name.data(), nt.name.size());
    w.u8(static_cast<std::uint8_t>(nt.dtype));
    const auto& shape = nt.tensor.shape();
    w.u32(static_cast<std::uint32_t>(shape.size()));
    for (std::size_t e : shape) w.u64(e);
    for (double v : nt.tensor.data()) {
      if (nt.dtype == DType::kF64) {
        w.f64(v);
      } else {
        w.f32(static_cast<float>(v));
      }
    }
  }
  auto& bytes = w.bytes();
  w.u32(crc32_of(bytes.data(), bytes.size()));
  return std::move(bytes);
}

Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < kHeaderBytes + kCrcBytes) {
    throw FormatError("checkpoint is " + std::to_string(bytes.size()) +
                      " bytes, shorter than header and CRC");
  }
  const std::size_t crc_offset = bytes.size() - kCrcBytes;
  std::uint32_t stored;
  std::memcpy(&stored, bytes.data() + crc_offset, kCrcBytes);
  const std::uint32_t computed = crc32_of(bytes.data(), crc_offset);
  if (stored != computed) {
    throw CrcError("checkpoint CRC mismatch at offset " +
                       std::to_string(crc_offset) + ": stored " + hex(stored) +
                       ", computed " + hex(computed),
                   crc_offset);
  }

  ByteReader r(bytes.data(), crc_offset);
  if (std::memcmp(r.take(4), kMagic, 4) != 0) {
    throw FormatError("not a checkpoint (bad magic at offset 0)");
  }
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version));
  }
  const std::uint32_t count = r.u32();
  Checkpoint out;
  out.reserve(count);
  std::set<std::string> seen;
  for (std::uint32_t t = 0; t < count; ++t) {
    const std::size_t entry_offset = r.offset();
    NamedTensor nt;
    const std::uint32_t name_len = r.u32();
    const auto* name = r.take(name_len);
    nt.name.assign(reinterpret_cast<const char*>(name), name_len);
    if (nt.name.empty() || !seen.insert(nt.name).second) {
      throw FormatError("empty or duplicate tensor name at offset " +
                        std::to_string(entry_offset));
    }
    const std::uint8_t tag = r.u8();
    if (tag != static_cast<std::uint8_t>(DType::kF32) &&
        tag != static_cast<std::uint8_t>(DType::kF64)) {
      throw FormatError("unknown dtype tag " + std::to_string(tag) +
                        " at offset " + std::to_string(r.offset() - 1));
    }
    nt.dtype = static_cast<DType>(tag);
    const std::uint32_t rank = r.u32();
    Shape shape(rank);
    std::size_t n = 1;
    for (auto& e : shape) {
      const std::uint64_t ext = r.u64();
      if (ext == 0 || ext > r.remaining()) {
        throw FormatError("bad extent " + std::to_string(ext) + " for '" +
                          nt.name + "' at offset " + std::to_string(r.offset() - 8));
      }
      e = static_cast<std::size_t>(ext);
      n *= e;
    }
    const std::size_t width = nt.dtype == DType::kF64 ? 8 : 4;
    if (n > r.remaining() / width) {
      throw FormatError("payload of '" + nt.name + "' runs past the end (offset " +
                        std::to_string(r.offset()) + ")");
    }
    std::vector<double> values(n);
    for (auto& v : values) v = nt.dtype == DType::kF64 ? r.f64() : r.f32();
    nt.tensor = Tensor::from(shape, std::move(values));
    out.push_back(std::move(nt));
  }
  if (r.remaining() != 0) {
    throw FormatError(std::to_string(r.remaining()) +
                      " unexpected bytes before the CRC at offset " +
                      std::to_string(r.offset()));
  }
  return out;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  write_file(path, encode_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::string& path) {
  return decode_checkpoint(read_file(path));
}

bool has_tensor(const Checkpoint& ckpt, const std::string& name) {
  for (const auto& nt : ckpt)
    if (nt.name == name) return true;
  return false;
}

const Tensor& find_tensor(const Checkpoint& ckpt, const std::string& name) {
  for (const auto& nt : ckpt)
    if (nt.name == name) return nt.tensor;
  throw ConfigError("checkpoint has no tensor '" + name + "'");
}

std::vector<NamedParam> as_named(const Checkpoint& ckpt) {
  std::vector<NamedParam> out;
  out.reserve(ckpt.size());
  for (const auto& nt : ckpt) out.push_back({nt.name, nt.tensor, true, true});
  return out;
}

Tensor encode_vit_config(const ViTConfig& config) {
  std::vector<double> v(kFieldCount);
  v[kImageSize] = static_cast<double>(config.image_size);
  v[kPatchSize] = static_cast<double>(config.patch_size);
  v[kChannels] = static_cast<double>(config.channels);
  v[kLayers] = static_cast<double>(config.layers);
  v[kHeads] = static_cast<double>(config.heads);
  v[kHeadDim] = static_cast<double>(config.head_dim);
  v[kMlpHidden] = static_cast<double>(config.mlp_hidden);
  v[kBlockForm] = config.block_form == BlockForm::kPreNorm ? 1.0 : 0.0;
  v[kPosEmbed] = config.pos_embed == PosEmbed::kFixedSinCos ? 1.0 : 0.0;
  return Tensor::vector(std::move(v));
}

ViTConfig decode_vit_config(const Tensor& t) {
  if (t.shape() != Shape{kFieldCount}) {
    throw FormatError("architecture record has shape " + to_string(t.shape()));
  }
  auto field = [&](int i) -> std::size_t {
    const double v = t.at(static_cast<std::size_t>(i));
    if (!(v >= 0.0) || v != std::floor(v)) {
      throw FormatError("architecture record field " + std::to_string(i) +
                        " is not a non-negative integer");
    }
    return static_cast<std::size_t>(v);
  };
  ViTConfig c;
  c.image_size = field(kImageSize);
  c.patch_size = field(kPatchSize);
  c.channels = field(kChannels);
  c.layers = field(kLayers);
  c.heads = field(kHeads);
  c.head_dim = field(kHeadDim);
  c.mlp_hidden = field(kMlpHidden);
  c.block_form = field(kBlockForm) == 1 ? BlockForm::kPreNorm : BlockForm::kSingleNorm;
  c.pos_embed = field(kPosEmbed) == 1 ? PosEmbed::kFixedSinCos : PosEmbed::kLearnable;
  c.validate();
  return c;
}

void append_vit(Checkpoint& ckpt, const ViTParams& params,
                const ViTConfig& config, const std::string& prefix) {
  for (const auto& np : params.named()) {
    ckpt.push_back({prefix + np.name, np.tensor.detach(), DType::kF64});
  }
  ckpt.push_back({prefix + "meta.vit_config", encode_vit_config(config), DType::kF64});
}

std::pair<ViTConfig, ViTParams> load_vit(const Checkpoint& ckpt,
                                         const std::string& prefix) {
  ViTConfig config = decode_vit_config(find_tensor(ckpt, prefix + "meta.vit_config"));
  ViTParams params = params_from_named(as_named(ckpt), config, prefix);
  return {config, params};
}

}  // namespace akd
