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

#include "akd/tensor.hpp"

#include <algorithm>
#include <functional>
#include <numeric>
#include <sstream>

#include "akd/errors.hpp"

namespace akd {

namespace {
thread_local Tape* g_active_tape = nullptr;
}  // namespace

std::size_t numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

std::span<double> detail::TensorImpl::grad_buffer() {
  if (grad.empty()) grad.assign(data->size(), 0.0);
  return grad;
}

Tensor make_tensor(Shape shape, std::vector<double> values,
                   bool requires_grad) {
  for (auto extent : shape) {
    if (extent == 0) {
      throw DimensionError("tensor extents must be positive, got " +
                           to_string(shape));
    }
  }
  if (numel(shape) != values.size()) {
    throw DimensionError("shape " + to_string(shape) + " needs " +
                         std::to_string(numel(shape)) + " values, got " +
                         std::to_string(values.size()));
  }
  auto impl = std::make_shared<detail::TensorImpl>();
  impl->shape = std::move(shape);
  impl->data = std::make_shared<std::vector<double>>(std::move(values));
  impl->requires_grad = requires_grad;
  return Tensor(std::move(impl));
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  std::vector<double> values(akd::numel(shape), value);
  return make_tensor(std::move(shape), std::move(values), requires_grad);
}

Tensor Tensor::from(Shape shape, std::vector<double> values,
                    bool requires_grad) {
  return make_tensor(std::move(shape), std::move(values), requires_grad);
}

Tensor Tensor::vector(std::vector<double> values, bool requires_grad) {
  Shape shape{values.size()};
  return make_tensor(std::move(shape), std::move(values), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return make_tensor({1}, {value}, requires_grad);
}

const Shape& Tensor::shape() const {
  if (!impl_) throw ContractError("use of undefined tensor");
  return impl_->shape;
}

std::size_t Tensor::dim(std::size_t axis) const {
  const auto& s = shape();
  if (axis >= s.size()) {
    throw DimensionError("axis " + std::to_string(axis) +
                         " out of range for shape " + to_string(s));
  }
  return s[axis];
}

std::size_t Tensor::numel() const { return akd::numel(shape()); }

std::span<const double> Tensor::data() const {
  if (!impl_) throw ContractError("use of undefined tensor");
  return *impl_->data;
}

std::span<double> Tensor::mutable_data() {
  if (!impl_) throw ContractError("use of undefined tensor");
  return *impl_->data;
}

std::vector<double> Tensor::to_vector() const {
  auto d = data();
  return {d.begin(), d.end()};
}

double Tensor::item() const {
  if (numel() != 1) {
    throw DimensionError("item() on tensor of shape " + to_string(shape()));
  }
  return data()[0];
}

double Tensor::at(std::size_t i) const { return data()[i]; }

double Tensor::at(std::size_t row, std::size_t col) const {
  return data()[row * dim(1) + col];
}

bool Tensor::requires_grad() const { return impl_ && impl_->requires_grad; }

void Tensor::set_requires_grad(bool value) {
  if (!impl_) throw ContractError("use of undefined tensor");
  impl_->requires_grad = value;
}

bool Tensor::has_grad() const { return impl_ && !impl_->grad.empty(); }

std::vector<double> Tensor::grad() const {
  if (!impl_) throw ContractError("use of undefined tensor");
  if (impl_->grad.empty()) return std::vector<double>(impl_->data->size(), 0.0);
  return impl_->grad;
}

void Tensor::zero_grad() {
  if (impl_) impl_->grad.clear();
}

Tensor Tensor::detach() const {
  auto impl = std::make_shared<detail::TensorImpl>();
  impl->shape = shape();
  impl->data = impl_->data;
  return Tensor(std::move(impl));
}

Tensor Tensor::alias() const {
  auto t = detach();
  t.impl_->requires_grad = impl_->requires_grad;
  return t;
}

Tensor Tensor::clone() const {
  return make_tensor(shape(), to_vector(), requires_grad());
}

void Tape::record(const Tensor& output, std::vector<Tensor> inputs,
                  BackwardFn backward) {
  entries_.push_back({output.impl_ptr(), std::move(inputs),
                      std::move(backward)});
}

void Tape::backward(const Tensor& root) {
  if (!root.defined() || root.numel() != 1) {
    throw ContractError("backward() needs a scalar root, got " +
                        (root.defined() ? to_string(root.shape())
                                        : std::string("undefined")));
  }
  // Intermediate gradients are rebuilt from scratch on every call so that
  // repeated calls accumulate only on leaves.
  for (auto& entry : entries_) entry.output->grad.clear();
  root.impl()->grad_buffer()[0] += 1.0;
  for (std::size_t i = entries_.size(); i-- > 0;) {
    auto& entry = entries_[i];
    if (observer_) observer_(i);
    if (entry.output->grad.empty()) continue;
    entry.backward(entry.output->grad);
  }
}

TapeScope::TapeScope(Tape& tape) : previous_(g_active_tape) {
  g_active_tape = &tape;
}

TapeScope::~TapeScope() { g_active_tape = previous_; }

NoGradScope::NoGradScope() : previous_(g_active_tape) {
  g_active_tape = nullptr;
}

NoGradScope::~NoGradScope() { g_active_tape = previous_; }

Tape* active_tape() noexcept { return g_active_tape; }

void backward(const Tensor& root) {
  Tape* tape = active_tape();
  if (tape == nullptr) {
    throw ContractError("backward() called without an active tape");
  }
  tape->backward(root);
}

}  // namespace akd
