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

#include <cmath>
#include <map>
#include <random>

#include "akd/distill.hpp"
#include "akd/errors.hpp"
#include "akd/ops.hpp"

namespace akd {

Projector::Projector(std::size_t in_dim, std::size_t out_dim,
                     std::size_t depth, std::uint64_t seed)
    : in_dim_(in_dim), out_dim_(out_dim) {
  if (in_dim == 0 || out_dim == 0 || depth == 0) {
    throw ConfigError("projector dimensions and depth must be positive");
  }
  std::mt19937_64 rng(seed);
  for (std::size_t l = 0; l < depth; ++l) {
    const std::size_t fan_in = l == 0 ? in_dim : out_dim;
    const double bound =
        std::sqrt(6.0 / static_cast<double>(fan_in + out_dim));
    std::uniform_real_distribution<double> dist(-bound, bound);
    std::vector<double> w(fan_in * out_dim);
    for (auto& v : w) v = dist(rng);
    weights_.push_back(Tensor::from({fan_in, out_dim}, std::move(w), true));
    biases_.push_back(Tensor::zeros({out_dim}, true));
  }
}

Tensor Projector::forward(const Tensor& x) const {
  if (weights_.empty()) throw ContractError("projector is not initialized");
  const bool vector_input = x.rank() == 1;
  if (x.shape().back() != in_dim_) {
    throw ConfigError("projector expects width " + std::to_string(in_dim_) +
                      ", got " + to_string(x.shape()));
  }
  Tensor h = vector_input ? reshape(x, {1, in_dim_}) : x;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    h = add_bias(matmul(h, weights_[l]), biases_[l]);
    if (l + 1 < weights_.size()) h = gelu(h);
  }
  return vector_input ? reshape(h, {out_dim_}) : h;
}

std::vector<NamedParam> Projector::named(const std::string& prefix) const {
  std::vector<NamedParam> out;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    const std::string p = prefix + std::to_string(l) + ".";
    out.push_back({p + "weight", weights_[l], true, true});
    out.push_back({p + "bias", biases_[l], false, true});
  }
  return out;
}

Projector Projector::alias() const {
  Projector copy = *this;
  for (auto& w : copy.weights_) w = w.alias();
  for (auto& b : copy.biases_) b = b.alias();
  return copy;
}

Projector Projector::clone() const {
  Projector copy = *this;
  for (auto& w : copy.weights_) w = w.clone();
  for (auto& b : copy.biases_) b = b.clone();
  return copy;
}

Projector Projector::from_named(const std::vector<NamedParam>& tensors,
                                const std::string& prefix) {
  std::map<std::string, Tensor> by_name;
  for (const auto& t : tensors) by_name[t.name] = t.tensor;
  Projector p;
  for (std::size_t l = 0;; ++l) {
    const std::string base = prefix + std::to_string(l) + ".";
    auto w = by_name.find(base + "weight");
    auto b = by_name.find(base + "bias");
    if (w == by_name.end() && b == by_name.end()) break;
    if (w == by_name.end() || b == by_name.end()) {
      throw ConfigError("projector layer " + std::to_string(l) +
                        " is incomplete");
    }
    const auto& ws = w->second.shape();
    const bool ok = ws.size() == 2 && b->second.shape() == Shape{ws[1]} &&
                    (l == 0 || ws[0] == p.out_dim_);
    if (!ok) {
      throw ConfigError("projector layer " + std::to_string(l) +
                        " has inconsistent shapes " + to_string(ws));
    }
    if (l == 0) {
      p.in_dim_ = ws[0];
      p.out_dim_ = ws[1];
    } else if (ws[1] != p.out_dim_) {
      throw ConfigError("projector hidden width mismatch at layer " +
                        std::to_string(l));
    }
    p.weights_.push_back(w->second);
    p.biases_.push_back(b->second);
    p.weights_.back().set_requires_grad(true);
    p.biases_.back().set_requires_grad(true);
  }
  if (p.weights_.empty()) throw ConfigError("no projector tensors found");
  return p;
}

}  // namespace akd
