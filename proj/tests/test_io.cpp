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

#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>

#include "akd/checkpoint.hpp"
#include "akd/config.hpp"
#include "akd/data.hpp"
#include "akd/errors.hpp"
#include "akd/io.hpp"
#include "test_util.hpp"

using namespace akd;
namespace fs = std::filesystem;

namespace {

// Bitwise reflected CRC-32 (polynomial 0xEDB88320).
std::uint32_t reference_crc32(const std::uint8_t* data, std::size_t size) {
  std::uint32_t crc = 0xFFFFFFFFu;
  for (std::size_t i = 0; i < size; ++i) {
    crc ^= data[i];
    for (int b = 0; b < 8; ++b) crc = (crc >> 1) ^ (0xEDB88320u & (0u - (crc & 1u)));
  }
  return ~crc;
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void seal(std::vector<std::uint8_t>& bytes) {
  put_u32(bytes, reference_crc32(bytes.data(), bytes.size()));
}

Checkpoint random_checkpoint(std::mt19937_64& rng) {
  Checkpoint c;
  const std::size_t count = rng() % 6;
  for (std::size_t t = 0; t < count; ++t) {
    const std::size_t rank = rng() % 4;
    Shape shape(rank);
    for (auto& e : shape) e = 1 + rng() % 5;
    std::vector<double> values(numel(shape));
    std::uniform_real_distribution<double> u(-1e3, 1e3);
    for (auto& v : values) v = u(rng);
    if (!values.empty() && t == 0) {
      values[0] = -0.0;
      if (values.size() > 1) values[1] = std::numeric_limits<double>::denorm_min();
    }
    c.push_back({"t" + std::to_string(t) + ".\xc3\xa9", Tensor::from(shape, values),
                 DType::kF64});
  }
  return c;
}

bool bitwise_equal(const Tensor& a, const Tensor& b) {
  return a.shape() == b.shape() &&
         std::memcmp(a.data().data(), b.data().data(), a.numel() * sizeof(double)) == 0;
}

}  // namespace

TEST_CASE("checkpoint byte layout") {
  Checkpoint c;
  c.push_back({"ab", Tensor::from({2}, {1.5, -2.0}), DType::kF64});
  c.push_back({"w", Tensor::from({1, 1}, {0.25}), DType::kF32});
  std::vector<std::uint8_t> expected = {'A', 'K', 'D', '1'};
  put_u32(expected, 1);
  put_u32(expected, 2);
  put_u32(expected, 2);
  expected.push_back('a');
  expected.push_back('b');
  expected.push_back(2);
  put_u32(expected, 1);
  put_u64(expected, 2);
  for (double v : {1.5, -2.0}) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    put_u64(expected, bits);
  }
  put_u32(expected, 1);
  expected.push_back('w');
  expected.push_back(1);
  put_u32(expected, 2);
  put_u64(expected, 1);
  put_u64(expected, 1);
  const float f = 0.25f;
  std::uint32_t fbits;
  std::memcpy(&fbits, &f, 4);
  put_u32(expected, fbits);
  seal(expected);
  CHECK(encode_checkpoint(c) == expected);
}

TEST_CASE("checkpoint round trip is bitwise") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    auto c = random_checkpoint(rng);
    auto bytes = encode_checkpoint(c);
    auto back = decode_checkpoint(bytes);
    REQUIRE(back.size() == c.size());
    for (std::size_t i = 0; i < c.size(); ++i) {
      CHECK(back[i].name == c[i].name);
      CHECK(back[i].dtype == DType::kF64);
      CHECK(bitwise_equal(back[i].tensor, c[i].tensor));
    }
    CHECK(encode_checkpoint(back) == bytes);
  }
  Checkpoint f32;
  f32.push_back({"x", Tensor::vector({0.1, 1e30, -3.0}), DType::kF32});
  auto back = decode_checkpoint(encode_checkpoint(f32));
  CHECK(back[0].tensor.at(0) == static_cast<double>(0.1f));
  CHECK(back[0].dtype == DType::kF32);
}

TEST_CASE("checkpoint corruption is detected") {
  std::mt19937_64 rng(3);
  Checkpoint c;
  c.push_back({"a", Tensor::from({3, 2}, {1, 2, 3, 4, 5, 6}), DType::kF64});
  const auto bytes = encode_checkpoint(c);
  for (std::size_t pos = 0; pos < bytes.size(); ++pos) {
    auto bad = bytes;
    bad[pos] ^= static_cast<std::uint8_t>(1u << (rng() % 8));
    try {
      decode_checkpoint(bad);
      FAIL("corruption at byte " << pos << " not detected");
    } catch (const CrcError& e) {
      CHECK(e.offset() == bytes.size() - 4);
      CHECK(std::string(e.what()).find(std::to_string(bytes.size() - 4)) !=
            std::string::npos);
    }
  }
  for (std::size_t len : {0u, 5u, 15u, 40u}) {
    std::vector<std::uint8_t> cut(bytes.begin(), bytes.begin() + len);
    CHECK_THROWS_AS(decode_checkpoint(cut), FormatError);
  }
}

TEST_CASE("structurally invalid checkpoints with valid CRC") {
  std::vector<std::uint8_t> bad_magic = {'A', 'K', 'D', '2'};
  put_u32(bad_magic, 1);
  put_u32(bad_magic, 0);
  seal(bad_magic);
  CHECK_THROWS_WITH_AS(decode_checkpoint(bad_magic), doctest::Contains("magic"),
                       FormatError);

  std::vector<std::uint8_t> bad_version = {'A', 'K', 'D', '1'};
  put_u32(bad_version, 9);
  put_u32(bad_version, 0);
  seal(bad_version);
  CHECK_THROWS_WITH_AS(decode_checkpoint(bad_version), doctest::Contains("version"),
                       FormatError);

  std::vector<std::uint8_t> short_body = {'A', 'K', 'D', '1'};
  put_u32(short_body, 1);
  put_u32(short_body, 1);
  put_u32(short_body, 1);
  short_body.push_back('x');
  short_body.push_back(2);
  put_u32(short_body, 1);
  put_u64(short_body, 4);
  seal(short_body);
  CHECK_THROWS_AS(decode_checkpoint(short_body), FormatError);

  std::vector<std::uint8_t> bad_tag = {'A', 'K', 'D', '1'};
  put_u32(bad_tag, 1);
  put_u32(bad_tag, 1);
  put_u32(bad_tag, 1);
  bad_tag.push_back('x');
  bad_tag.push_back(7);
  put_u32(bad_tag, 0);
  seal(bad_tag);
  CHECK_THROWS_WITH_AS(decode_checkpoint(bad_tag), doctest::Contains("dtype"),
                       FormatError);

  auto extra = encode_checkpoint({});
  extra.resize(extra.size() - 4);
  extra.push_back(0);
  seal(extra);
  CHECK_THROWS_AS(decode_checkpoint(extra), FormatError);
}

TEST_CASE("checkpoint misuse") {
  Checkpoint dup;
  dup.push_back({"a", Tensor::vector({1}), DType::kF64});
  dup.push_back({"a", Tensor::vector({2}), DType::kF64});
  CHECK_THROWS_AS(encode_checkpoint(dup), ContractError);
  CHECK_THROWS_AS(find_tensor(dup, "zz"), ConfigError);
  CHECK(has_tensor(dup, "a"));
  CHECK_THROWS_AS(load_checkpoint("/nonexistent/file.akd"), FormatError);
}

TEST_CASE("vit checkpoints") {
  ViTConfig c;
  c.image_size = 16;
  c.patch_size = 4;
  c.layers = 2;
  c.heads = 2;
  c.head_dim = 4;
  c.block_form = BlockForm::kPreNorm;
  c.pos_embed = PosEmbed::kFixedSinCos;
  CHECK(decode_vit_config(encode_vit_config(c)) == c);
  auto p = init_vit(c, 4);
  Checkpoint ckpt;
  append_vit(ckpt, p, c, "teacher.");
  auto dir = fs::temp_directory_path() / "akd_test_ckpt";
  fs::remove_all(dir);
  save_checkpoint((dir / "m.akd").string(), ckpt);
  auto [c2, p2] = load_vit(load_checkpoint((dir / "m.akd").string()), "teacher.");
  CHECK(c2 == c);
  auto a = p.named(), b = p2.named();
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].name == b[i].name);
    CHECK(bitwise_equal(a[i].tensor, b[i].tensor));
  }
  CHECK_FALSE(p2.pos_embed.requires_grad());
  fs::remove_all(dir);

  Checkpoint missing = ckpt;
  missing.erase(missing.begin());
  CHECK_THROWS_AS(load_vit(missing, "teacher."), ConfigError);
}

TEST_CASE("synthetic dataset") {
  SyntheticSpec s;
  s.count = 83;
  s.seed = 5;
  auto a = generate_synthetic(s), b = generate_synthetic(s);
  CHECK(encode_dataset(a) == encode_dataset(b));
  s.seed = 6;
  CHECK(generate_synthetic(s).pixels != a.pixels);
  CHECK(a.size() == 83);
  CHECK(a.num_classes() == 8);
  std::vector<int> counts(8);
  for (auto l : a.labels) counts[l]++;
  for (int c = 0; c < 8; ++c) CHECK(counts[c] == (c < 3 ? 11 : 10));
  // Prefixes agree: each sample depends only on (seed, index).
  s.seed = 5;
  s.count = 10;
  auto prefix = generate_synthetic(s);
  CHECK(prefix == a.subset(0, 10));

  auto img = a.image(0);
  CHECK(img.shape() == Shape{3, 32, 32});
  CHECK(img.at(0) == doctest::Approx((a.pixels[0] / 255.0 - 0.5) / 0.25));
  CHECK_THROWS_AS(a.image(83), ContractError);
  s.classes = 9;
  CHECK_THROWS_AS(generate_synthetic(s), ConfigError);
}

TEST_CASE("dataset file format") {
  SyntheticSpec s;
  s.count = 4;
  s.image_size = 8;
  s.channels = 1;
  auto d = generate_synthetic(s);
  auto bytes = encode_dataset(d);
  REQUIRE(bytes.size() == 20 + 4 * 65);
  CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "AKDD");
  std::uint32_t header[4];
  std::memcpy(header, bytes.data() + 4, 16);
  CHECK(header[0] == 4);
  CHECK(header[1] == 1);
  CHECK(header[2] == 8);
  CHECK(header[3] == 8);
  CHECK(bytes[20] == d.labels[0]);
  CHECK(bytes[20 + 65] == d.labels[1]);
  CHECK(std::memcmp(bytes.data() + 21, d.pixels.data(), 64) == 0);
  CHECK(decode_dataset(bytes) == d);

  auto truncated = bytes;
  truncated.pop_back();
  CHECK_THROWS_AS(decode_dataset(truncated), FormatError);
  auto magic = bytes;
  magic[0] = 'X';
  CHECK_THROWS_AS(decode_dataset(magic), FormatError);

  auto path = (fs::temp_directory_path() / "akd_test_data.bin").string();
  save_dataset(path, d);
  CHECK(load_dataset(path) == d);
  fs::remove(path);
}

TEST_CASE("augmentation") {
  std::mt19937_64 rng(2);
  auto img = akd::testing::random_tensor({2, 5, 6}, rng);
  CHECK(augment(img, 9).to_vector() == augment(img, 9).to_vector());
  int flipped = 0, kept = 0;
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    auto out = augment(img, seed, 0);
    auto v = out.to_vector();
    bool same = v == img.to_vector();
    bool mirror = true;
    for (std::size_t c = 0; c < 2; ++c)
      for (std::size_t y = 0; y < 5; ++y)
        for (std::size_t x = 0; x < 6; ++x)
          mirror = mirror && v[(c * 5 + y) * 6 + x] == img.data()[(c * 5 + y) * 6 + 5 - x];
    CHECK((same || mirror));
    flipped += mirror;
    kept += same;
  }
  CHECK(flipped > 5);
  CHECK(kept > 5);
  // With padding, every output pixel is zero or some input pixel.
  auto padded = augment(img, 123, 2).to_vector();
  auto src = img.to_vector();
  for (double v : padded)
    CHECK((v == 0.0 || std::find(src.begin(), src.end(), v) != src.end()));
}

TEST_CASE("run config parsing") {
  auto d = RunConfig::defaults();
  auto parsed = parse_run_config(nlohmann::json::object());
  CHECK(parsed.vit_teacher == d.vit_teacher);
  CHECK(parsed.vit_student == d.vit_student);
  CHECK(parsed.train.batch_size == 64);
  CHECK(parsed.distill.lambda == 0.1);

  auto round = parse_run_config(nlohmann::json::parse(to_json(d).dump()));
  CHECK(to_json(round) == to_json(d));

  auto doc = nlohmann::json::parse(R"({
    "vit_student": {"layers": 3, "block_form": "pre_ln"},
    "distill": {"aggregation": "mean", "lambda": 0.5, "projector_depth": 2},
    "train": {"batch_size": 32, "warmup_epochs": 3, "pretrain": {"total_epochs": 4}},
    "eval": {"knn_k": 5}
  })");
  auto c = parse_run_config(doc);
  CHECK(c.vit_student.layers == 3);
  CHECK(c.vit_student.block_form == BlockForm::kPreNorm);
  CHECK(c.distill.aggregation == Aggregation::kMean);
  CHECK(c.projector_depth == 2);
  CHECK(c.train.batch_size == 32);
  CHECK(*c.train.warmup_epochs == 3.0);
  CHECK(c.pretrain.total_epochs == 4);
  CHECK(c.eval.knn_k == 5);
}

TEST_CASE("run config errors name the schema path") {
  auto fails_at = [](const char* text, const std::string& path) {
    try {
      parse_run_config(nlohmann::json::parse(text));
    } catch (const ConfigError& e) {
      const std::string msg = e.what();
      INFO(msg);
      CHECK(msg.rfind(path, 0) == 0);
      return;
    }
    FAIL("no error for " << text);
  };
  fails_at(R"({"bogus": 1})", "$.bogus");
  fails_at(R"({"train": {"pretrain": {"foo": true}}})", "$.train.pretrain.foo");
  fails_at(R"({"train": {"batch_size": 0}})", "$.train.batch_size");
  fails_at(R"({"train": {"batch_size": "64"}})", "$.train.batch_size");
  fails_at(R"({"train": {"batch_size": -3}})", "$.train.batch_size");
  fails_at(R"({"distill": {"aggregation": "median"}})", "$.distill.aggregation");
  fails_at(R"({"distill": {"lambda": -1}})", "$.distill");
  fails_at(R"({"vit_teacher": {"heads": 3, "patch_size": 5}})", "$.vit_teacher");
  fails_at(R"({"vit_student": []})", "$.vit_student");
  fails_at(R"({"eval": {"knn_tau": 0}})", "$.eval.knn_tau");
  fails_at(R"({"train": {"warmup_epochs": 500}})", "$.train");
  fails_at(R"([1, 2])", "$");
  CHECK_THROWS_AS(load_run_config("/nonexistent.json"), ConfigError);
}
