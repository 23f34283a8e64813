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

#include "akd/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <random>

#include "akd/errors.hpp"
#include "akd/io.hpp"

namespace akd {

namespace {

constexpr char kDatasetMagic[4] = {'A', 'K', 'D', 'D'};

struct ShapeParams {
  double cx, cy, r, thick;
};

// Membership test for the foreground of class `label` at pixel centre (x, y).
bool inside(std::size_t label, const ShapeParams& s, double x, double y) {
  const double dx = x - s.cx, dy = y - s.cy;
  const double t = s.thick;
  switch (label % 8) {
    case 0:  // horizontal bar
      return std::abs(dy) < t && std::abs(dx) < s.r;
    case 1:  // vertical bar
      return std::abs(dx) < t && std::abs(dy) < s.r;
    case 2:  // diagonal bar
      return std::abs(dx - dy) < t * std::sqrt(2.0) &&
             std::abs(dx + dy) < s.r * std::sqrt(2.0);
    case 3:  // plus
      return (std::abs(dy) < t && std::abs(dx) < s.r) ||
             (std::abs(dx) < t && std::abs(dy) < s.r);
    case 4:  // x cross
      return std::max(std::abs(dx), std::abs(dy)) < s.r &&
             (std::abs(dx - dy) < t || std::abs(dx + dy) < t);
    case 5:  // disk
      return dx * dx + dy * dy < s.r * s.r;
    case 6: {  // ring
      const double d = std::sqrt(dx * dx + dy * dy);
      return d < s.r && d > s.r - 1.6 * t;
    }
    default: {  // checkerboard, 4 x 4 cells
      if (std::abs(dx) >= s.r || std::abs(dy) >= s.r) return false;
      const double cell = s.r / 2.0;
      const auto ix = static_cast<long>(std::floor((dx + s.r) / cell));
      const auto iy = static_cast<long>(std::floor((dy + s.r) / cell));
      return (ix + iy) % 2 == 0;
    }
  }
}

std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

}  // namespace

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

const std::vector<std::string>& synthetic_class_names() {
  static const std::vector<std::string> names = {
      "hbar", "vbar", "diagonal", "plus", "cross", "disk", "ring", "checker"};
  return names;
}

std::size_t Dataset::num_classes() const {
  if (labels.empty()) return 0;
  return static_cast<std::size_t>(*std::max_element(labels.begin(), labels.end())) + 1;
}

Tensor Dataset::image(std::size_t index) const {
  if (index >= size()) {
    throw ContractError("sample " + std::to_string(index) + " out of range (" +
                        std::to_string(size()) + " samples)");
  }
  const std::size_t n = image_numel();
  std::vector<double> v(n);
  const std::uint8_t* p = pixels.data() + index * n;
  for (std::size_t i = 0; i < n; ++i) v[i] = (p[i] / 255.0 - 0.5) / 0.25;
  return Tensor::from({channels, height, width}, std::move(v));
}

Dataset Dataset::subset(std::size_t begin, std::size_t end) const {
  if (begin > end || end > size()) throw ContractError("subset range out of bounds");
  Dataset d;
  d.channels = channels;
  d.height = height;
  d.width = width;
  d.labels.assign(labels.begin() + begin, labels.begin() + end);
  const std::size_t n = image_numel();
  d.pixels.assign(pixels.begin() + begin * n, pixels.begin() + end * n);
  return d;
}

Dataset generate_synthetic(const SyntheticSpec& spec) {
  if (spec.classes == 0 || spec.classes > 8) {
    throw ConfigError("synthetic classes must be in [1, 8], got " +
                      std::to_string(spec.classes));
  }
  if (spec.image_size < 8 || spec.channels == 0) {
    throw ConfigError("synthetic images need size >= 8 and channels >= 1");
  }
  Dataset d;
  d.channels = spec.channels;
  d.height = d.width = spec.image_size;
  const std::size_t n = d.image_numel();
  d.labels.resize(spec.count);
  d.pixels.resize(spec.count * n);
  const double side = static_cast<double>(spec.image_size);

  for (std::size_t i = 0; i < spec.count; ++i) {
    const std::size_t label = i % spec.classes;
    d.labels[i] = static_cast<std::uint8_t>(label);
    std::mt19937_64 rng(mix_seed(spec.seed, i));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> noise(0.0, 0.08);

    ShapeParams s;
    s.r = side * (0.2 + 0.14 * unit(rng));
    s.thick = std::max(1.5, s.r * (0.25 + 0.1 * unit(rng)));
    const double margin = s.r * 0.8;
    s.cx = margin + (side - 2 * margin) * unit(rng);
    s.cy = margin + (side - 2 * margin) * unit(rng);

    std::vector<double> bg(spec.channels), fg(spec.channels);
    const double sign = unit(rng) < 0.5 ? -1.0 : 1.0;
    const double contrast = 0.3 + 0.25 * unit(rng);
    for (std::size_t c = 0; c < spec.channels; ++c) {
      bg[c] = sign > 0 ? 0.15 + 0.3 * unit(rng) : 0.55 + 0.3 * unit(rng);
      fg[c] = bg[c] + sign * contrast * (0.7 + 0.3 * unit(rng));
    }

    std::uint8_t* out = d.pixels.data() + i * n;
    for (std::size_t y = 0; y < spec.image_size; ++y) {
      for (std::size_t x = 0; x < spec.image_size; ++x) {
        const bool on = inside(label, s, x + 0.5, y + 0.5);
        for (std::size_t c = 0; c < spec.channels; ++c) {
          const double v = (on ? fg[c] : bg[c]) + noise(rng);
          out[(c * spec.image_size + y) * spec.image_size + x] = to_byte(v);
        }
      }
    }
  }
  return d;
}

std::vector<std::uint8_t> encode_dataset(const Dataset& data) {
  const std::size_t n = data.image_numel();
  if (data.pixels.size() != data.size() * n) {
    throw ContractError("dataset pixel buffer does not match its header");
  }
  ByteWriter w;
  w.raw(kDatasetMagic, 4);
  w.u32(static_cast<std::uint32_t>(data.size()));
  w.u32(static_cast<std::uint32_t>(data.channels));
  w.u32(static_cast<std::uint32_t>(data.height));
  w.u32(static_cast<std::uint32_t>(data.width));
  w.bytes().reserve(20 + data.size() * (n + 1));
  for (std::size_t i = 0; i < data.size(); ++i) {
    w.u8(data.labels[i]);
    w.raw(data.pixels.data() + i * n, n);
  }
  return std::move(w.bytes());
}

Dataset decode_dataset(const std::vector<std::uint8_t>& bytes) {
  ByteReader r(bytes.data(), bytes.size());
  if (std::memcmp(r.take(4), kDatasetMagic, 4) != 0) {
    throw FormatError("not a dataset file (bad magic)");
  }
  Dataset d;
  const std::size_t count = r.u32();
  d.channels = r.u32();
  d.height = r.u32();
  d.width = r.u32();
  if (d.channels == 0 || d.height == 0 || d.width == 0) {
    throw FormatError("dataset header has a zero extent");
  }
  const std::size_t n = d.image_numel();
  if (r.remaining() != count * (n + 1)) {
    throw FormatError("dataset body is " + std::to_string(r.remaining()) +
                      " bytes, header implies " + std::to_string(count * (n + 1)));
  }
  d.labels.resize(count);
  d.pixels.resize(count * n);
  for (std::size_t i = 0; i < count; ++i) {
    d.labels[i] = r.u8();
    std::memcpy(d.pixels.data() + i * n, r.take(n), n);
  }
  return d;
}

void save_dataset(const std::string& path, const Dataset& data) {
  write_file(path, encode_dataset(data));
}

Dataset load_dataset(const std::string& path) { return decode_dataset(read_file(path)); }

Tensor augment(const Tensor& image, std::uint64_t seed, std::size_t pad) {
  if (image.rank() != 3) throw DimensionError("augment expects C x H x W");
  const std::size_t c = image.dim(0), h = image.dim(1), w = image.dim(2);
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> shift(0, 2 * pad);
  const std::size_t oy = shift(rng), ox = shift(rng);
  const bool flip = std::uniform_int_distribution<int>(0, 1)(rng) == 1;
  auto src = image.data();
  std::vector<double> out(src.size(), 0.0);
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t y = 0; y < h; ++y) {
      const long sy = static_cast<long>(y + oy) - static_cast<long>(pad);
      if (sy < 0 || sy >= static_cast<long>(h)) continue;
      for (std::size_t x = 0; x < w; ++x) {
        const std::size_t fx = flip ? w - 1 - x : x;
        const long sx = static_cast<long>(fx + ox) - static_cast<long>(pad);
        if (sx < 0 || sx >= static_cast<long>(w)) continue;
        out[(ch * h + y) * w + x] = src[(ch * h + sy) * w + sx];
      }
    }
  }
  return Tensor::from(image.shape(), std::move(out));
}

}  // namespace akd
