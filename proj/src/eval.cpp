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

#include "akd/eval.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <random>

#include "akd/errors.hpp"
#include "akd/io.hpp"
#include "akd/ops.hpp"
#include "akd/parallel.hpp"
#include "akd/trainer.hpp"

namespace akd {

namespace {

void require_normalized(const FeatureBank& bank, const char* which) {
  if (!bank.normalized) {
    throw ContractError(std::string(which) + " feature bank is not normalized");
  }
  bank.validate();
}

}  // namespace

std::size_t FeatureBank::num_classes() const {
  if (labels.empty()) return 0;
  return static_cast<std::size_t>(*std::max_element(labels.begin(), labels.end())) + 1;
}

void FeatureBank::normalize() {
  for (std::size_t i = 0; i < rows; ++i) {
    double* r = features.data() + i * dim;
    double sq = 0.0;
    for (std::size_t j = 0; j < dim; ++j) sq += r[j] * r[j];
    if (!(sq > 0.0) || !std::isfinite(sq)) {
      throw NumericError("feature row " + std::to_string(i) +
                         " has zero or non-finite norm");
    }
    const double inv = 1.0 / std::sqrt(sq);
    for (std::size_t j = 0; j < dim; ++j) r[j] *= inv;
  }
  normalized = true;
}

void FeatureBank::validate() const {
  if (features.size() != rows * dim || labels.size() != rows) {
    throw ContractError("feature bank has " + std::to_string(features.size()) +
                        " values and " + std::to_string(labels.size()) +
                        " labels for " + std::to_string(rows) + " x " +
                        std::to_string(dim));
  }
  for (int l : labels)
    if (l < 0) throw ContractError("negative label in feature bank");
  if (!normalized) return;
  for (std::size_t i = 0; i < rows; ++i) {
    double sq = 0.0;
    for (double v : row(i)) sq += v * v;
    if (std::abs(std::sqrt(sq) - 1.0) > 1e-6) {
      throw ContractError("feature row " + std::to_string(i) + " has norm " +
                          std::to_string(std::sqrt(sq)));
    }
  }
}

Checkpoint FeatureBank::to_checkpoint() const {
  validate();
  Checkpoint ckpt;
  ckpt.push_back({"features", Tensor::from({rows, dim}, features), DType::kF64});
  ckpt.push_back({"labels", Tensor::vector({labels.begin(), labels.end()}), DType::kF64});
  ckpt.push_back({"normalized", Tensor::vector({normalized ? 1.0 : 0.0}), DType::kF64});
  return ckpt;
}

FeatureBank FeatureBank::from_checkpoint(const Checkpoint& ckpt) {
  const Tensor& f = find_tensor(ckpt, "features");
  const Tensor& l = find_tensor(ckpt, "labels");
  if (f.rank() != 2 || l.shape() != Shape{f.dim(0)}) {
    throw FormatError("feature bank tensors have shapes " + to_string(f.shape()) +
                      " and " + to_string(l.shape()));
  }
  FeatureBank b;
  b.rows = f.dim(0);
  b.dim = f.dim(1);
  b.features = f.to_vector();
  for (double v : l.data()) b.labels.push_back(static_cast<int>(v));
  b.normalized = find_tensor(ckpt, "normalized").at(0) != 0.0;
  b.validate();
  return b;
}

FeatureBank extract_features(const ViTParams& params, const ViTConfig& config,
                             const Dataset& data, std::size_t threads,
                             bool normalize) {
  FeatureBank bank;
  bank.rows = data.size();
  bank.dim = config.embed_dim();
  bank.features.resize(bank.rows * bank.dim);
  bank.labels.assign(data.labels.begin(), data.labels.end());
  audit_params(params, config);
  parallel_for(data.size(), threads, [&](std::size_t i) {
    NoGradScope no_grad;
    EncoderOutput out = vit_forward(data.image(i), params, config);
    std::copy(out.class_token.data().begin(), out.class_token.data().end(),
              bank.features.begin() + i * bank.dim);
  });
  if (normalize) bank.normalize();
  return bank;
}

std::vector<int> knn_predict(const FeatureBank& train, const FeatureBank& query,
                             std::size_t k, double tau, std::size_t threads) {
  require_normalized(train, "train");
  require_normalized(query, "query");
  if (train.dim != query.dim) {
    throw DimensionError("feature dims differ: train " + std::to_string(train.dim) +
                         ", query " + std::to_string(query.dim));
  }
  if (k == 0 || k > train.rows) {
    throw ContractError("k = " + std::to_string(k) + " outside [1, " +
                        std::to_string(train.rows) + "]");
  }
  if (!(tau > 0.0)) throw ContractError("knn temperature must be > 0");
  const std::size_t classes = std::max(train.num_classes(), query.num_classes());
  std::vector<int> predictions(query.rows);
  parallel_for(query.rows, threads, [&](std::size_t q) {
    auto qr = query.row(q);
    std::vector<std::pair<double, std::size_t>> sims(train.rows);
    for (std::size_t i = 0; i < train.rows; ++i) {
      auto tr = train.row(i);
      double s = 0.0;
      for (std::size_t j = 0; j < train.dim; ++j) s += qr[j] * tr[j];
      sims[i] = {s, i};
    }
    std::partial_sort(sims.begin(), sims.begin() + static_cast<std::ptrdiff_t>(k),
                      sims.end(), [](const auto& a, const auto& b) {
                        return a.first != b.first ? a.first > b.first
                                                  : a.second < b.second;
                      });
    std::vector<double> votes(classes, 0.0);
    for (std::size_t n = 0; n < k; ++n) {
      votes[static_cast<std::size_t>(train.labels[sims[n].second])] +=
          std::exp(sims[n].first / tau);
    }
    predictions[q] = static_cast<int>(std::max_element(votes.begin(), votes.end()) -
                                      votes.begin());
  });
  return predictions;
}

double knn_classify(const FeatureBank& train, const FeatureBank& query,
                    std::size_t k, double tau, std::size_t threads) {
  if (query.rows == 0) throw ContractError("empty query bank");
  const auto pred = knn_predict(train, query, k, tau, threads);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == query.labels[i];
  return static_cast<double>(correct) / static_cast<double>(query.rows);
}

double linear_probe(const FeatureBank& train, const FeatureBank& test,
                    const LinearProbeConfig& cfg) {
  train.validate();
  test.validate();
  if (train.dim != test.dim) throw DimensionError("feature dims differ");
  if (train.rows == 0 || test.rows == 0) throw ContractError("empty feature bank");
  if (cfg.batch_size == 0 || cfg.epochs == 0) {
    throw ConfigError("linear probe needs batch_size and epochs >= 1");
  }
  const std::size_t d = train.dim;
  const std::size_t classes = std::max<std::size_t>(
      2, std::max(train.num_classes(), test.num_classes()));
  Tensor w = Tensor::zeros({d, classes});
  Tensor b = Tensor::zeros({classes});
  const std::vector<NamedParam> params = {{"probe.weight", w, true, true},
                                          {"probe.bias", b, false, true}};
  OptimizerState state = OptimizerState::for_params(params);
  AdamWConfig adamw;
  adamw.weight_decay = cfg.weight_decay;

  auto scores = [&](std::span<const double> x, std::vector<double>& out) {
    auto wd = w.data();
    auto bd = b.data();
    for (std::size_t c = 0; c < classes; ++c) out[c] = bd[c];
    for (std::size_t j = 0; j < d; ++j) {
      const double xv = x[j];
      for (std::size_t c = 0; c < classes; ++c) out[c] += xv * wd[j * classes + c];
    }
  };

  std::vector<std::size_t> order(train.rows);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(cfg.seed);
  std::vector<double> logits(classes);
  std::vector<std::vector<double>> grads = {std::vector<double>(d * classes),
                                            std::vector<double>(classes)};
  for (std::size_t e = 0; e < cfg.epochs; ++e) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < train.rows; start += cfg.batch_size) {
      const std::size_t end = std::min(train.rows, start + cfg.batch_size);
      const double inv = 1.0 / static_cast<double>(end - start);
      std::fill(grads[0].begin(), grads[0].end(), 0.0);
      std::fill(grads[1].begin(), grads[1].end(), 0.0);
      for (std::size_t s = start; s < end; ++s) {
        const std::size_t i = order[s];
        auto x = train.row(i);
        scores(x, logits);
        const double mx = *std::max_element(logits.begin(), logits.end());
        double z = 0.0;
        for (auto& v : logits) z += (v = std::exp(v - mx));
        for (std::size_t c = 0; c < classes; ++c) {
          const double delta =
              (logits[c] / z - (static_cast<int>(c) == train.labels[i] ? 1.0 : 0.0)) * inv;
          grads[1][c] += delta;
          for (std::size_t j = 0; j < d; ++j) grads[0][j * classes + c] += x[j] * delta;
        }
      }
      adamw_step(params, grads, state, cfg.lr, adamw);
    }
  }
  std::size_t correct = 0;
  for (std::size_t i = 0; i < test.rows; ++i) {
    scores(test.row(i), logits);
    const int pred =
        static_cast<int>(std::max_element(logits.begin(), logits.end()) - logits.begin());
    correct += pred == test.labels[i];
  }
  return static_cast<double>(correct) / static_cast<double>(test.rows);
}

std::vector<double> AttentionExport::patch_map(std::size_t head) const {
  if (head > rows.size()) throw ContractError("no such head " + std::to_string(head));
  const auto& src = head < rows.size() ? rows[head] : aggregate;
  return {src.begin() + 1, src.end()};
}

std::vector<std::uint8_t> encode_pgm(const std::vector<double>& values,
                                     std::size_t width, std::size_t height) {
  if (values.size() != width * height) {
    throw DimensionError("PGM needs " + std::to_string(width * height) +
                         " values, got " + std::to_string(values.size()));
  }
  const std::string header =
      "P5\n" + std::to_string(width) + " " + std::to_string(height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  const double range = *hi - *lo;
  for (double v : values) {
    const double t = range > 0.0 ? (v - *lo) / range : 0.0;
    out.push_back(static_cast<std::uint8_t>(std::lround(t * 255.0)));
  }
  return out;
}

AttentionExport export_attention(const ViTParams& params, const ViTConfig& config,
                                 const Tensor& image,
                                 std::optional<std::size_t> layer,
                                 const DistillConfig& cfg,
                                 const std::string& out_dir) {
  namespace fs = std::filesystem;
  NoGradScope no_grad;
  EncoderOutput out = vit_forward(image, params, config);
  const std::size_t l = layer.value_or(config.layers - 1);
  if (l >= config.layers) {
    throw ContractError("layer " + std::to_string(l) + " outside a " +
                        std::to_string(config.layers) + "-layer model");
  }
  AttentionExport ex;
  ex.layer = l;
  ex.grid = config.grid();
  ex.image_size = config.image_size;
  for (const auto& row : out.attention.class_rows[l]) ex.rows.push_back(row.to_vector());
  ex.aggregate = aggregate(out.attention.class_rows[l], cfg).to_vector();
  if (out_dir.empty()) return ex;

  fs::create_directories(out_dir);
  const std::size_t side = config.image_size, p = config.patch_size;
  const std::size_t maps = ex.rows.size() + 1;
  std::vector<double> upsampled(maps * side * side);
  for (std::size_t m = 0; m < maps; ++m) {
    const auto patches = ex.patch_map(m);
    std::vector<double> img(side * side);
    for (std::size_t y = 0; y < side; ++y)
      for (std::size_t x = 0; x < side; ++x)
        img[y * side + x] = patches[(y / p) * ex.grid + x / p];
    std::copy(img.begin(), img.end(), upsampled.begin() + m * side * side);
    const std::string name =
        m < ex.rows.size() ? "head_" + std::to_string(m) + ".pgm" : "aggregate.pgm";
    const std::string path = (fs::path(out_dir) / name).string();
    write_file(path, encode_pgm(img, side, side));
    ex.files.push_back(path);
  }
  std::vector<double> flat;
  for (const auto& r : ex.rows) flat.insert(flat.end(), r.begin(), r.end());
  Checkpoint raw;
  raw.push_back({"rows", Tensor::from({ex.rows.size(), ex.rows[0].size()}, flat), DType::kF64});
  raw.push_back({"aggregate", Tensor::vector(ex.aggregate), DType::kF64});
  raw.push_back({"maps", Tensor::from({maps, side, side}, upsampled), DType::kF64});
  raw.push_back({"layer", Tensor::vector({static_cast<double>(l)}), DType::kF64});
  const std::string path = (fs::path(out_dir) / "attention.akd").string();
  save_checkpoint(path, raw);
  ex.files.push_back(path);
  return ex;
}

double aggregate_kl(const AttentionExport& reference, const AttentionExport& other,
                    const DistillConfig& cfg) {
  NoGradScope no_grad;
  auto mapped = interpolate_attention(reference.aggregate,
                                      {reference.grid, reference.grid},
                                      {other.grid, other.grid}, cfg.interpolation);
  return kl_divergence(Tensor::vector(mapped.values), Tensor::vector(other.aggregate),
                       cfg.log_floor)
      .item();
}

double attention_drift(const AttentionRecord& teacher,
                       const AttentionRecord& student, const DistillConfig& cfg) {
  NoGradScope no_grad;
  return ag_loss_layers(teacher, student, cfg).item();
}

double mean_attention_drift(const ViTParams& teacher, const ViTConfig& teacher_config,
                            const ViTParams& student, const ViTConfig& student_config,
                            const Dataset& data, const DistillConfig& cfg,
                            std::size_t threads) {
  if (data.size() == 0) throw ContractError("drift over an empty dataset");
  std::vector<double> drift(data.size());
  parallel_for(data.size(), threads, [&](std::size_t i) {
    NoGradScope no_grad;
    Tensor image = data.image(i);
    auto t = vit_forward(image, teacher, teacher_config);
    auto s = vit_forward(image, student, student_config);
    drift[i] = attention_drift(t.attention, s.attention, cfg);
  });
  return std::accumulate(drift.begin(), drift.end(), 0.0) /
         static_cast<double>(data.size());
}

}  // namespace akd
