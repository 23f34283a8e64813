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
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace akd {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string to_string(const Shape& shape);

namespace detail {

struct TensorImpl {
  Shape shape;
  // Shared so that worker-local parameter aliases read the master values.
  std::shared_ptr<std::vector<double>> data;
  std::vector<double> grad;  // empty until first accumulation
  bool requires_grad = false;

  std::span<double> grad_buffer();
};

}  // namespace detail

/// Dense row-major array of doubles with an optional gradient.
///
/// Copies are shallow: two Tensor handles may refer to the same node. Use
/// clone() for a deep copy, detach() for a gradient-free view of the values
/// and alias() for an independent leaf that shares the values but owns its
/// own gradient buffer.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values,
                     bool requires_grad = false);
  static Tensor vector(std::vector<double> values, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const noexcept { return impl_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const;

  std::span<const double> data() const;
  std::span<double> mutable_data();
  std::vector<double> to_vector() const;
  double item() const;
  double at(std::size_t i) const;
  double at(std::size_t row, std::size_t col) const;

  bool requires_grad() const;
  void set_requires_grad(bool value);
  bool has_grad() const;
  /// Gradient values; zeros when nothing has been accumulated yet.
  std::vector<double> grad() const;
  void zero_grad();

  Tensor detach() const;
  Tensor alias() const;
  Tensor clone() const;

  detail::TensorImpl* impl() const noexcept { return impl_.get(); }
  const std::shared_ptr<detail::TensorImpl>& impl_ptr() const noexcept {
    return impl_;
  }

 private:
  explicit Tensor(std::shared_ptr<detail::TensorImpl> impl)
      : impl_(std::move(impl)) {}
  friend Tensor make_tensor(Shape, std::vector<double>, bool);

  std::shared_ptr<detail::TensorImpl> impl_;
};

Tensor make_tensor(Shape shape, std::vector<double> values, bool requires_grad);

/// Ordered log of differentiable operations for one backward pass.
///
/// Operations record themselves on the tape installed by the innermost
/// TapeScope of the calling thread. With no active tape nothing is recorded
/// and results never require gradients.
class Tape {
 public:
  using BackwardFn = std::function<void(std::span<const double> out_grad)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  void record(const Tensor& output, std::vector<Tensor> inputs,
              BackwardFn backward);

  /// Accumulates d(root)/d(leaf) into every reachable leaf that requires
  /// gradients. Root must hold exactly one element.
  void backward(const Tensor& root);

  std::size_t size() const noexcept { return entries_.size(); }
  void clear() noexcept { entries_.clear(); }

  /// Invoked for every entry as it is replayed; used to verify ordering.
  void set_replay_observer(std::function<void(std::size_t)> observer) {
    observer_ = std::move(observer);
  }

 private:
  struct Entry {
    std::shared_ptr<detail::TensorImpl> output;
    std::vector<Tensor> inputs;
    BackwardFn backward;
  };
  std::vector<Entry> entries_;
  std::function<void(std::size_t)> observer_;
};

class TapeScope {
 public:
  explicit TapeScope(Tape& tape);
  ~TapeScope();
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape* previous_;
};

/// Suspends recording on this thread (teacher passes, metrics).
class NoGradScope {
 public:
  NoGradScope();
  ~NoGradScope();
  NoGradScope(const NoGradScope&) = delete;
  NoGradScope& operator=(const NoGradScope&) = delete;

 private:
  Tape* previous_;
};

Tape* active_tape() noexcept;

/// Runs backward on the tape currently installed on this thread.
void backward(const Tensor& root);

}  // namespace akd
