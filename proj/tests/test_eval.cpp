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

#include <cmath>
#include <filesystem>
#include <numeric>
#include <random>

#include "akd/errors.hpp"
#include "akd/eval.hpp"
#include "akd/io.hpp"
#include "test_util.hpp"

using namespace akd;
namespace fs = std::filesystem;

namespace {

FeatureBank make_bank(std::vector<std::vector<double>> rows, std::vector<int> labels,
                      bool normalize = true) {
  FeatureBank b;
  b.rows = rows.size();
  b.dim = rows.empty() ? 0 : rows[0].size();
  for (auto& r : rows) b.features.insert(b.features.end(), r.begin(), r.end());
  b.labels = std::move(labels);
  if (normalize) b.normalize();
  return b;
}

FeatureBank gaussian_clusters(std::size_t per_class, std::uint64_t seed,
                              bool normalize = true) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, 0.15);
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  for (int c = 0; c < 2; ++c) {
    for (std::size_t i = 0; i < per_class; ++i) {
      rows.push_back({(c == 0 ? 1.0 : -1.0) + nd(rng), 0.3 + nd(rng)});
      labels.push_back(c);
    }
  }
  return make_bank(rows, labels, normalize);
}

FeatureBank random_bank(std::size_t n, std::size_t dim, std::size_t classes,
                        std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  std::vector<std::vector<double>> rows(n, std::vector<double>(dim));
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (auto& v : rows[i]) v = nd(rng);
    labels[i] = static_cast<int>(i % classes);
  }
  std::shuffle(labels.begin(), labels.end(), rng);
  return make_bank(rows, labels);
}

ViTConfig small_vit() {
  ViTConfig c;
  c.image_size = 16;
  c.patch_size = 4;
  c.layers = 2;
  c.heads = 3;
  c.head_dim = 4;
  return c;
}

}  // namespace

TEST_CASE("feature bank normalization and validation") {
  auto b = make_bank({{3, 4}, {0, 2}}, {0, 1});
  CHECK(b.row(0)[0] == doctest::Approx(0.6));
  CHECK(b.row(1)[1] == doctest::Approx(1.0));
  CHECK_NOTHROW(b.validate());
  b.features[0] = 5.0;
  CHECK_THROWS_AS(b.validate(), ContractError);
  CHECK_THROWS_AS(make_bank({{0, 0}}, {0}), NumericError);
  auto bad = make_bank({{1, 0}}, {0, 1}, false);
  CHECK_THROWS_AS(bad.validate(), ContractError);

  auto g = gaussian_clusters(10, 1);
  auto round = FeatureBank::from_checkpoint(decode_checkpoint(encode_checkpoint(g.to_checkpoint())));
  CHECK(round.features == g.features);
  CHECK(round.labels == g.labels);
  CHECK(round.normalized);
}

TEST_CASE("knn self match and separated clusters") {
  auto train = gaussian_clusters(100, 1);
  CHECK(knn_classify(train, train, 1) == 1.0);
  auto query = gaussian_clusters(100, 2);
  CHECK(knn_classify(train, query) >= 0.99);
}

TEST_CASE("knn on shuffled labels is at chance") {
  const std::size_t classes = 4;
  auto train = random_bank(2000, 8, classes, 5);
  auto query = random_bank(2000, 8, classes, 6);
  const double acc = knn_classify(train, query);
  CHECK(std::abs(acc - 1.0 / classes) <= 0.05);
}

TEST_CASE("knn is invariant to positive row rescaling") {
  auto raw = gaussian_clusters(50, 3, false);
  auto query = gaussian_clusters(30, 4);
  auto a = raw;
  a.normalize();
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> us(0.01, 100.0);
  auto scaled = raw;
  for (std::size_t i = 0; i < scaled.rows; ++i) {
    const double s = us(rng);
    for (std::size_t j = 0; j < scaled.dim; ++j) scaled.features[i * scaled.dim + j] *= s;
  }
  scaled.normalize();
  CHECK(knn_predict(a, query, 7) == knn_predict(scaled, query, 7));
}

TEST_CASE("knn contracts and thread independence") {
  auto train = gaussian_clusters(10, 1);
  CHECK_THROWS_AS(knn_classify(train, train, 21), ContractError);
  CHECK_THROWS_AS(knn_classify(train, train, 0), ContractError);
  auto raw = gaussian_clusters(10, 1, false);
  CHECK_THROWS_AS(knn_classify(raw, train, 1), ContractError);
  auto other = make_bank({{1, 0, 0}}, {0});
  CHECK_THROWS_AS(knn_classify(train, other, 1), DimensionError);

  auto big = random_bank(300, 6, 3, 8);
  auto q = random_bank(200, 6, 3, 9);
  CHECK(knn_predict(big, q, 20, 0.07, 1) == knn_predict(big, q, 20, 0.07, 4));
}

TEST_CASE("knn vote weighting") {
  // Two close neighbours of class 1 outvote one exact match of class 0 only
  // when the temperature is large.
  auto train = make_bank({{1.0, 0.0}, {0.9, 0.43589}, {0.9, -0.43589}}, {0, 1, 1});
  auto query = make_bank({{1.0, 0.0}}, {0});
  CHECK(knn_predict(train, query, 3, 0.01)[0] == 0);
  CHECK(knn_predict(train, query, 3, 10.0)[0] == 1);
}

TEST_CASE("linear probe") {
  auto train = gaussian_clusters(100, 11);
  auto test = gaussian_clusters(100, 12);
  CHECK(linear_probe(train, test) >= 0.99);

  const std::size_t classes = 4;
  FeatureBank zeros;
  zeros.rows = 400;
  zeros.dim = 5;
  zeros.features.assign(400 * 5, 0.0);
  for (std::size_t i = 0; i < 400; ++i) zeros.labels.push_back(static_cast<int>(i % classes));
  const double acc = linear_probe(zeros, zeros);
  CHECK(std::abs(acc - 1.0 / classes) <= 0.05);

  auto noise_train = random_bank(300, 6, 3, 1), noise_test = random_bank(100, 6, 3, 2);
  LinearProbeConfig cfg;
  cfg.epochs = 5;
  const double a = linear_probe(noise_train, noise_test, cfg);
  CHECK(a >= 0.0);
  CHECK(a <= 1.0);
  CHECK(a == linear_probe(noise_train, noise_test, cfg));
}

TEST_CASE("extract_features follows dataset order") {
  SyntheticSpec s;
  s.count = 12;
  s.image_size = 16;
  auto data = generate_synthetic(s);
  auto c = small_vit();
  auto p = init_vit(c, 2);
  auto bank = extract_features(p, c, data, 1);
  auto threaded = extract_features(p, c, data, 3);
  CHECK(bank.features == threaded.features);
  CHECK(bank.rows == 12);
  CHECK(bank.labels[5] == data.labels[5]);
  auto direct = vit_forward(data.image(5), p, c).class_token.to_vector();
  double norm = 0.0;
  for (double v : direct) norm += v * v;
  norm = std::sqrt(norm);
  for (std::size_t j = 0; j < bank.dim; ++j)
    CHECK(bank.row(5)[j] == doctest::Approx(direct[j] / norm).epsilon(1e-12));
  auto raw = extract_features(p, c, data, 1, false);
  CHECK_FALSE(raw.normalized);
  CHECK(raw.row(5)[0] == doctest::Approx(direct[0]).epsilon(1e-12));
}

TEST_CASE("pgm encoding") {
  auto bytes = encode_pgm({0.5, 1.0, 0.75, 0.5}, 2, 2);
  const std::string header = "P5\n2 2\n255\n";
  REQUIRE(bytes.size() == header.size() + 4);
  CHECK(std::string(bytes.begin(), bytes.begin() + header.size()) == header);
  CHECK(bytes[header.size() + 0] == 0);
  CHECK(bytes[header.size() + 1] == 255);
  CHECK(bytes[header.size() + 2] == 128);
  auto flat = encode_pgm({0.3, 0.3}, 2, 1);
  CHECK(flat.back() == 0);
  CHECK_THROWS_AS(encode_pgm({1.0}, 2, 2), DimensionError);
}

TEST_CASE("attention export") {
  auto c = small_vit();
  auto p = init_vit(c, 7);
  std::mt19937_64 rng(3);
  auto image = akd::testing::random_tensor({3, 16, 16}, rng);
  DistillConfig cfg;
  auto dir = fs::temp_directory_path() / "akd_test_export";
  fs::remove_all(dir);
  auto ex = export_attention(p, c, image, std::nullopt, cfg, dir.string());
  CHECK(ex.layer == 1);
  CHECK(ex.rows.size() == 3);
  for (std::size_t h = 0; h < 3; ++h) {
    auto patches = ex.patch_map(h);
    CHECK(patches.size() == 16);
    const double mass = std::accumulate(patches.begin(), patches.end(), 0.0);
    CHECK(std::abs(mass - (1.0 - ex.rows[h][0])) <= 1e-6);
  }
  auto agg = aggregate_heads(
      vit_forward(image, p, c).attention.class_rows[1], cfg.temperature, cfg.log_floor);
  for (std::size_t i = 0; i < ex.aggregate.size(); ++i)
    CHECK(ex.aggregate[i] == doctest::Approx(agg.at(i)).epsilon(1e-12));

  CHECK(ex.files.size() == 5);
  for (const auto& f : ex.files) CHECK(fs::exists(f));
  auto raw = load_checkpoint((dir / "attention.akd").string());
  const auto& maps = find_tensor(raw, "maps");
  CHECK(maps.shape() == Shape{4, 16, 16});
  // Nearest upsampling: every pixel is exactly its patch's value.
  for (std::size_t h = 0; h < 3; ++h) {
    for (std::size_t y = 0; y < 16; ++y)
      for (std::size_t x = 0; x < 16; ++x)
        CHECK(maps.data()[(h * 16 + y) * 16 + x] ==
              ex.rows[h][1 + (y / 4) * 4 + x / 4]);
  }
  auto pgm = read_file((dir / "head_0.pgm").string());
  CHECK(pgm.size() == std::string("P5\n16 16\n255\n").size() + 256);
  fs::remove_all(dir);

  auto first = export_attention(p, c, image, 0, cfg);
  CHECK(first.layer == 0);
  CHECK(first.files.empty());
  CHECK_THROWS_AS(export_attention(p, c, image, 2, cfg), ContractError);
  CHECK(aggregate_kl(ex, ex, cfg) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(aggregate_kl(ex, first, cfg) > 0.0);

  auto sc = c;
  sc.patch_size = 8;
  sc.heads = 1;
  auto small = export_attention(init_vit(sc, 1), sc, image, std::nullopt, cfg);
  CHECK(small.grid == 2);
  CHECK(aggregate_kl(ex, small, cfg) >= 0.0);
}

TEST_CASE("attention drift") {
  auto c = small_vit();
  auto sc = c;
  sc.patch_size = 8;
  sc.heads = 2;
  auto tp = init_vit(c, 1), sp = init_vit(sc, 2);
  std::mt19937_64 rng(5);
  auto image = akd::testing::random_tensor({3, 16, 16}, rng);
  auto t = vit_forward(image, tp, c).attention;
  auto s = vit_forward(image, sp, sc).attention;
  DistillConfig cfg;
  CHECK(attention_drift(t, t, cfg) == 0.0);
  CHECK(attention_drift(s, s, cfg) == 0.0);
  CHECK(attention_drift(t, s, cfg) == doctest::Approx(ag_loss_layers(t, s, cfg).item()));
  CHECK(attention_drift(t, s, cfg) > 0.0);

  SyntheticSpec spec;
  spec.count = 6;
  spec.image_size = 16;
  auto data = generate_synthetic(spec);
  CHECK(mean_attention_drift(tp, c, tp, c, data, cfg) == 0.0);
  const double d1 = mean_attention_drift(tp, c, sp, sc, data, cfg, 1);
  CHECK(d1 > 0.0);
  CHECK(d1 == mean_attention_drift(tp, c, sp, sc, data, cfg, 3));
}
