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

#include "akd/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/Core>

#include "akd/errors.hpp"

namespace akd {

namespace {

bool tracking(const std::vector<Tensor>& inputs) {
  if (active_tape() == nullptr) return false;
  return std::any_of(inputs.begin(), inputs.end(),
                     [](const Tensor& t) { return t.requires_grad(); });
}

// Creates the op result and, when any input is tracked, records the
// backward closure produced by make_backward().
template <class MakeBackward>
Tensor emit(Shape shape, std::vector<double> values, std::vector<Tensor> inputs,
            MakeBackward&& make_backward) {
  const bool track = tracking(inputs);
  Tensor out = make_tensor(std::move(shape), std::move(values), track);
  if (track) {
    active_tape()->record(out, std::move(inputs), make_backward(out));
  }
  return out;
}

// Gradient sink of a tracked input; empty when the input is not tracked.
std::span<double> sink(const Tensor& t) {
  if (!t.requires_grad()) return {};
  return t.impl()->grad_buffer();
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " +
                         to_string(a.shape()) + " vs " + to_string(b.shape()));
  }
}

void require_rank(const Tensor& t, std::size_t rank, const char* op) {
  if (t.rank() != rank) {
    throw DimensionError(std::string(op) + ": expected rank " +
                         std::to_string(rank) + ", got shape " +
                         to_string(t.shape()));
  }
}

void require_finite(std::span<const double> values, const char* op) {
  for (double v : values) {
    if (!std::isfinite(v)) {
      throw NumericError(std::string(op) + ": non-finite input");
    }
  }
}

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMatrix>;
using Map = Eigen::Map<RowMatrix>;

// c[m x n] += a[m x k] * b[k x n]
void gemm_acc(const double* a, const double* b, double* c, std::size_t m,
              std::size_t k, std::size_t n) {
  const auto mi = static_cast<Eigen::Index>(m), ki = static_cast<Eigen::Index>(k),
             ni = static_cast<Eigen::Index>(n);
  Map(c, mi, ni).noalias() += ConstMap(a, mi, ki) * ConstMap(b, ki, ni);
}

// c[m x k] += a[m x n] * b[k x n]^T
void gemm_nt_acc(const double* a, const double* b, double* c, std::size_t m,
                 std::size_t n, std::size_t k) {
  const auto mi = static_cast<Eigen::Index>(m), ki = static_cast<Eigen::Index>(k),
             ni = static_cast<Eigen::Index>(n);
  Map(c, mi, ki).noalias() += ConstMap(a, mi, ni) * ConstMap(b, ki, ni).transpose();
}

// c[k x n] += a[m x k]^T * b[m x n]
void gemm_tn_acc(const double* a, const double* b, double* c, std::size_t m,
                 std::size_t k, std::size_t n) {
  const auto mi = static_cast<Eigen::Index>(m), ki = static_cast<Eigen::Index>(k),
             ni = static_cast<Eigen::Index>(n);
  Map(c, ki, ni).noalias() += ConstMap(a, mi, ki).transpose() * ConstMap(b, mi, ni);
}

std::vector<double> transposed(std::span<const double> a, std::size_t rows,
                               std::size_t cols) {
  std::vector<double> t(a.size());
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) t[j * rows + i] = a[i * cols + j];
  return t;
}

struct AxisSplit {
  std::size_t outer, extent, inner;
};

AxisSplit split_axis(const Shape& shape, std::size_t axis, const char* op) {
  if (axis >= shape.size()) {
    throw DimensionError(std::string(op) + ": axis " + std::to_string(axis) +
                         " invalid for shape " + to_string(shape));
  }
  AxisSplit s{1, shape[axis], 1};
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

template <class Fwd, class Deriv>
Tensor unary(const Tensor& x, Fwd fwd, Deriv deriv) {
  auto xs = x.data();
  std::vector<double> out(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) out[i] = fwd(xs[i]);
  return emit(x.shape(), std::move(out), {x}, [x, deriv](const Tensor&) {
    return [x, deriv](std::span<const double> g) {
      auto gx = sink(x);
      auto xs = x.data();
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * deriv(xs[i]);
    };
  });
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw DimensionError("matmul: incompatible shapes " + to_string(a.shape()) +
                         " and " + to_string(b.shape()));
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<double> out(m * n, 0.0);
  gemm_acc(a.data().data(), b.data().data(), out.data(), m, k, n);
  return emit({m, n}, std::move(out), {a, b}, [a, b, m, k, n](const Tensor&) {
    return [a, b, m, k, n](std::span<const double> g) {
      if (a.requires_grad()) {
        gemm_nt_acc(g.data(), b.data().data(), sink(a).data(), m, n, k);
      }
      if (b.requires_grad()) {
        gemm_tn_acc(a.data().data(), g.data(), sink(b).data(), m, k, n);
      }
    };
  });
}

Tensor transpose(const Tensor& a) {
  require_rank(a, 2, "transpose");
  const std::size_t rows = a.dim(0), cols = a.dim(1);
  return emit({cols, rows}, transposed(a.data(), rows, cols), {a},
              [a, rows, cols](const Tensor&) {
                return [a, rows, cols](std::span<const double> g) {
                  auto ga = sink(a);
                  for (std::size_t i = 0; i < rows; ++i)
                    for (std::size_t j = 0; j < cols; ++j)
                      ga[i * cols + j] += g[j * rows + i];
                };
              });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  auto as = a.data(), bs = b.data();
  std::vector<double> out(as.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = as[i] + bs[i];
  return emit(a.shape(), std::move(out), {a, b}, [a, b](const Tensor&) {
    return [a, b](std::span<const double> g) {
      for (const Tensor* t : {&a, &b}) {
        auto gt = sink(*t);
        for (std::size_t i = 0; i < gt.size(); ++i) gt[i] += g[i];
      }
    };
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  auto as = a.data(), bs = b.data();
  std::vector<double> out(as.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = as[i] - bs[i];
  return emit(a.shape(), std::move(out), {a, b}, [a, b](const Tensor&) {
    return [a, b](std::span<const double> g) {
      auto ga = sink(a);
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i];
      auto gb = sink(b);
      for (std::size_t i = 0; i < gb.size(); ++i) gb[i] -= g[i];
    };
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  auto as = a.data(), bs = b.data();
  std::vector<double> out(as.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = as[i] * bs[i];
  return emit(a.shape(), std::move(out), {a, b}, [a, b](const Tensor&) {
    return [a, b](std::span<const double> g) {
      auto as = a.data(), bs = b.data();
      auto ga = sink(a);
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i] * bs[i];
      auto gb = sink(b);
      for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += g[i] * as[i];
    };
  });
}

namespace {

// Elementwise selection; ties route the gradient to the first operand.
template <class Pick>
Tensor select(const Tensor& a, const Tensor& b, Pick pick_a, const char* op) {
  require_same_shape(a, b, op);
  auto as = a.data(), bs = b.data();
  std::vector<double> out(as.size());
  std::vector<bool> from_a(as.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    from_a[i] = pick_a(as[i], bs[i]);
    out[i] = from_a[i] ? as[i] : bs[i];
  }
  return emit(a.shape(), std::move(out), {a, b},
              [a, b, from_a = std::move(from_a)](const Tensor&) {
                return [a, b, from_a](std::span<const double> g) {
                  auto ga = sink(a);
                  auto gb = sink(b);
                  for (std::size_t i = 0; i < g.size(); ++i) {
                    if (from_a[i]) {
                      if (!ga.empty()) ga[i] += g[i];
                    } else if (!gb.empty()) {
                      gb[i] += g[i];
                    }
                  }
                };
              });
}

}  // namespace

Tensor maximum(const Tensor& a, const Tensor& b) {
  return select(a, b, [](double x, double y) { return x >= y; }, "maximum");
}

Tensor minimum(const Tensor& a, const Tensor& b) {
  return select(a, b, [](double x, double y) { return x <= y; }, "minimum");
}

Tensor add_bias(const Tensor& x, const Tensor& bias) {
  require_rank(x, 2, "add_bias");
  const std::size_t rows = x.dim(0), cols = x.dim(1);
  if (bias.numel() != cols) {
    throw DimensionError("add_bias: bias " + to_string(bias.shape()) +
                         " does not match " + to_string(x.shape()));
  }
  auto xs = x.data(), bs = bias.data();
  std::vector<double> out(xs.begin(), xs.end());
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) out[i * cols + j] += bs[j];
  return emit(x.shape(), std::move(out), {x, bias},
              [x, bias, rows, cols](const Tensor&) {
                return [x, bias, rows, cols](std::span<const double> g) {
                  auto gx = sink(x);
                  for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[i];
                  auto gb = sink(bias);
                  if (gb.empty()) return;
                  for (std::size_t i = 0; i < rows; ++i)
                    for (std::size_t j = 0; j < cols; ++j)
                      gb[j] += g[i * cols + j];
                };
              });
}

Tensor scale(const Tensor& x, double factor) {
  return unary(
      x, [factor](double v) { return v * factor; },
      [factor](double) { return factor; });
}

Tensor square(const Tensor& x) {
  return unary(
      x, [](double v) { return v * v; }, [](double v) { return 2.0 * v; });
}

Tensor gelu(const Tensor& x) {
  constexpr double inv_sqrt2 = 0.70710678118654752440;
  const double inv_sqrt_2pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);
  return unary(
      x, [](double v) { return 0.5 * v * (1.0 + std::erf(v * inv_sqrt2)); },
      [inv_sqrt_2pi](double v) {
        return 0.5 * (1.0 + std::erf(v * inv_sqrt2)) +
               v * inv_sqrt_2pi * std::exp(-0.5 * v * v);
      });
}

Tensor log(const Tensor& x) {
  for (double v : x.data()) {
    if (!(v > 0.0)) throw NumericError("log: non-positive or NaN input");
  }
  return unary(
      x, [](double v) { return std::log(v); }, [](double v) { return 1.0 / v; });
}

Tensor clamp_min(const Tensor& x, double floor) {
  return unary(
      x, [floor](double v) { return std::max(v, floor); },
      [floor](double v) { return v > floor ? 1.0 : 0.0; });
}

Tensor layer_norm(const Tensor& x) {
  const std::size_t cols = x.shape().back();
  const std::size_t rows = x.numel() / cols;
  auto xs = x.data();
  std::vector<double> out(xs.size());
  std::vector<double> rstd(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = xs.data() + r * cols;
    double mu = 0.0;
    for (std::size_t j = 0; j < cols; ++j) mu += row[j];
    mu /= static_cast<double>(cols);
    double var = 0.0;
    for (std::size_t j = 0; j < cols; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= static_cast<double>(cols);
    rstd[r] = 1.0 / std::sqrt(var + kLayerNormEps);
    for (std::size_t j = 0; j < cols; ++j)
      out[r * cols + j] = (row[j] - mu) * rstd[r];
  }
  return emit(x.shape(), std::move(out), {x},
              [x, rows, cols, rstd = std::move(rstd)](const Tensor& y) {
                return [x, y = y.detach(), rows, cols,
                        rstd](std::span<const double> g) {
                  auto gx = sink(x);
                  auto xhat = y.data();
                  const double n = static_cast<double>(cols);
                  for (std::size_t r = 0; r < rows; ++r) {
                    const double* gr = g.data() + r * cols;
                    const double* hr = xhat.data() + r * cols;
                    double mean_g = 0.0, mean_gh = 0.0;
                    for (std::size_t j = 0; j < cols; ++j) {
                      mean_g += gr[j];
                      mean_gh += gr[j] * hr[j];
                    }
                    mean_g /= n;
                    mean_gh /= n;
                    for (std::size_t j = 0; j < cols; ++j)
                      gx[r * cols + j] +=
                          rstd[r] * (gr[j] - mean_g - hr[j] * mean_gh);
                  }
                };
              });
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta) {
  const std::size_t cols = x.shape().back();
  if (gamma.numel() != cols || beta.numel() != cols) {
    throw DimensionError("layer_norm: affine parameters " +
                         to_string(gamma.shape()) + "/" +
                         to_string(beta.shape()) + " do not match " +
                         to_string(x.shape()));
  }
  Tensor normalized = layer_norm(x);
  Tensor rows = x.rank() == 2 ? normalized : reshape(normalized, {x.numel() / cols, cols});
  // gamma * xhat + beta, gamma and beta broadcast over rows.
  const std::size_t nrows = rows.dim(0);
  auto hs = rows.data(), gs = gamma.data(), bs = beta.data();
  std::vector<double> out(hs.size());
  for (std::size_t r = 0; r < nrows; ++r)
    for (std::size_t j = 0; j < cols; ++j)
      out[r * cols + j] = hs[r * cols + j] * gs[j] + bs[j];
  Tensor y = emit(rows.shape(), std::move(out), {rows, gamma, beta},
                  [rows, gamma, beta, nrows, cols](const Tensor&) {
                    return [rows, gamma, beta, nrows,
                            cols](std::span<const double> g) {
                      auto hs = rows.data(), gs = gamma.data();
                      auto gh = sink(rows);
                      auto gg = sink(gamma);
                      auto gb = sink(beta);
                      for (std::size_t r = 0; r < nrows; ++r) {
                        for (std::size_t j = 0; j < cols; ++j) {
                          const double gv = g[r * cols + j];
                          if (!gh.empty()) gh[r * cols + j] += gv * gs[j];
                          if (!gg.empty()) gg[j] += gv * hs[r * cols + j];
                          if (!gb.empty()) gb[j] += gv;
                        }
                      }
                    };
                  });
  return x.rank() == 2 ? y : reshape(y, x.shape());
}

Tensor softmax(const Tensor& x, std::size_t axis) {
  const auto s = split_axis(x.shape(), axis, "softmax");
  auto xs = x.data();
  require_finite(xs, "softmax");
  std::vector<double> out(xs.size());
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t in = 0; in < s.inner; ++in) {
      const std::size_t base = o * s.extent * s.inner + in;
      double mx = xs[base];
      for (std::size_t k = 1; k < s.extent; ++k)
        mx = std::max(mx, xs[base + k * s.inner]);
      double total = 0.0;
      for (std::size_t k = 0; k < s.extent; ++k) {
        const double e = std::exp(xs[base + k * s.inner] - mx);
        out[base + k * s.inner] = e;
        total += e;
      }
      for (std::size_t k = 0; k < s.extent; ++k) out[base + k * s.inner] /= total;
    }
  }
  return emit(x.shape(), std::move(out), {x}, [x, s](const Tensor& y) {
    return [x, y = y.detach(), s](std::span<const double> g) {
      auto gx = sink(x);
      auto ys = y.data();
      for (std::size_t o = 0; o < s.outer; ++o) {
        for (std::size_t in = 0; in < s.inner; ++in) {
          const std::size_t base = o * s.extent * s.inner + in;
          double dot = 0.0;
          for (std::size_t k = 0; k < s.extent; ++k)
            dot += g[base + k * s.inner] * ys[base + k * s.inner];
          for (std::size_t k = 0; k < s.extent; ++k) {
            const std::size_t i = base + k * s.inner;
            gx[i] += ys[i] * (g[i] - dot);
          }
        }
      }
    };
  });
}

Tensor log_softmax(const Tensor& x, std::size_t axis) {
  const auto s = split_axis(x.shape(), axis, "log_softmax");
  auto xs = x.data();
  require_finite(xs, "log_softmax");
  std::vector<double> out(xs.size());
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t in = 0; in < s.inner; ++in) {
      const std::size_t base = o * s.extent * s.inner + in;
      double mx = xs[base];
      for (std::size_t k = 1; k < s.extent; ++k)
        mx = std::max(mx, xs[base + k * s.inner]);
      double total = 0.0;
      for (std::size_t k = 0; k < s.extent; ++k)
        total += std::exp(xs[base + k * s.inner] - mx);
      const double lse = mx + std::log(total);
      for (std::size_t k = 0; k < s.extent; ++k)
        out[base + k * s.inner] = xs[base + k * s.inner] - lse;
    }
  }
  return emit(x.shape(), std::move(out), {x}, [x, s](const Tensor& y) {
    return [x, y = y.detach(), s](std::span<const double> g) {
      auto gx = sink(x);
      auto ys = y.data();
      for (std::size_t o = 0; o < s.outer; ++o) {
        for (std::size_t in = 0; in < s.inner; ++in) {
          const std::size_t base = o * s.extent * s.inner + in;
          double total = 0.0;
          for (std::size_t k = 0; k < s.extent; ++k) total += g[base + k * s.inner];
          for (std::size_t k = 0; k < s.extent; ++k) {
            const std::size_t i = base + k * s.inner;
            gx[i] += g[i] - std::exp(ys[i]) * total;
          }
        }
      }
    };
  });
}

Tensor normalize_sum(const Tensor& x) {
  auto xs = x.data();
  double total = 0.0;
  for (double v : xs) total += v;
  if (!(total > 0.0)) {
    throw NumericError("normalize_sum: sum must be positive");
  }
  std::vector<double> out(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) out[i] = xs[i] / total;
  return emit(x.shape(), std::move(out), {x}, [x, total](const Tensor& y) {
    return [x, y = y.detach(), total](std::span<const double> g) {
      auto gx = sink(x);
      auto ys = y.data();
      double dot = 0.0;
      for (std::size_t i = 0; i < g.size(); ++i) dot += g[i] * ys[i];
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += (g[i] - dot) / total;
    };
  });
}

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
  if (parts.empty()) throw ContractError("concat: no inputs");
  const Shape& first = parts.front().shape();
  const auto s0 = split_axis(first, axis, "concat");
  std::size_t extent = 0;
  for (const auto& p : parts) {
    const Shape& sh = p.shape();
    bool ok = sh.size() == first.size();
    for (std::size_t i = 0; ok && i < sh.size(); ++i)
      ok = i == axis || sh[i] == first[i];
    if (!ok) {
      throw DimensionError("concat: shape " + to_string(sh) +
                           " incompatible with " + to_string(first) +
                           " along axis " + std::to_string(axis));
    }
    extent += sh[axis];
  }
  Shape shape = first;
  shape[axis] = extent;
  std::vector<double> out(numel(shape));
  std::size_t offset = 0;
  for (const auto& p : parts) {
    const std::size_t pe = p.dim(axis) * s0.inner;
    auto ps = p.data();
    for (std::size_t o = 0; o < s0.outer; ++o)
      std::copy_n(ps.data() + o * pe, pe,
                  out.data() + o * extent * s0.inner + offset);
    offset += pe;
  }
  return emit(shape, std::move(out), parts,
              [parts, s0, extent](const Tensor&) {
                return [parts, s0, extent](std::span<const double> g) {
                  std::size_t offset = 0;
                  for (const auto& p : parts) {
                    const std::size_t span_len = p.numel() / s0.outer;
                    auto gp = sink(p);
                    if (!gp.empty()) {
                      for (std::size_t o = 0; o < s0.outer; ++o)
                        for (std::size_t i = 0; i < span_len; ++i)
                          gp[o * span_len + i] +=
                              g[o * extent * s0.inner + offset + i];
                    }
                    offset += span_len;
                  }
                };
              });
}

Tensor slice(const Tensor& x, std::size_t axis, std::size_t begin,
             std::size_t end) {
  const auto s = split_axis(x.shape(), axis, "slice");
  if (begin >= end || end > s.extent) {
    throw DimensionError("slice: range [" + std::to_string(begin) + ", " +
                         std::to_string(end) + ") invalid for shape " +
                         to_string(x.shape()) + " axis " +
                         std::to_string(axis));
  }
  Shape shape = x.shape();
  shape[axis] = end - begin;
  const std::size_t len = (end - begin) * s.inner;
  auto xs = x.data();
  std::vector<double> out(s.outer * len);
  for (std::size_t o = 0; o < s.outer; ++o)
    std::copy_n(xs.data() + o * s.extent * s.inner + begin * s.inner, len,
                out.data() + o * len);
  return emit(shape, std::move(out), {x}, [x, s, begin, len](const Tensor&) {
    return [x, s, begin, len](std::span<const double> g) {
      auto gx = sink(x);
      for (std::size_t o = 0; o < s.outer; ++o)
        for (std::size_t i = 0; i < len; ++i)
          gx[o * s.extent * s.inner + begin * s.inner + i] += g[o * len + i];
    };
  });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (numel(shape) != x.numel()) {
    throw DimensionError("reshape: cannot view " + to_string(x.shape()) +
                         " as " + to_string(shape));
  }
  return emit(std::move(shape), x.to_vector(), {x}, [x](const Tensor&) {
    return [x](std::span<const double> g) {
      auto gx = sink(x);
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[i];
    };
  });
}

Tensor sum(const Tensor& x) {
  double total = 0.0;
  for (double v : x.data()) total += v;
  return emit({1}, {total}, {x}, [x](const Tensor&) {
    return [x](std::span<const double> g) {
      auto gx = sink(x);
      for (auto& v : gx) v += g[0];
    };
  });
}

Tensor mean(const Tensor& x) {
  return scale(sum(x), 1.0 / static_cast<double>(x.numel()));
}

Tensor patchify(const Tensor& image, std::size_t patch) {
  require_rank(image, 3, "patchify");
  const std::size_t channels = image.dim(0), height = image.dim(1),
                    width = image.dim(2);
  if (patch == 0 || height % patch != 0 || width % patch != 0) {
    throw DimensionError("patchify: patch " + std::to_string(patch) +
                         " does not tile image " + to_string(image.shape()));
  }
  const std::size_t gh = height / patch, gw = width / patch;
  const std::size_t feat = channels * patch * patch;
  // Index map from output element to image element, shared by backward.
  std::vector<std::size_t> index(gh * gw * feat);
  for (std::size_t py = 0; py < gh; ++py)
    for (std::size_t px = 0; px < gw; ++px)
      for (std::size_t c = 0; c < channels; ++c)
        for (std::size_t y = 0; y < patch; ++y)
          for (std::size_t x = 0; x < patch; ++x)
            index[(py * gw + px) * feat + (c * patch + y) * patch + x] =
                (c * height + py * patch + y) * width + px * patch + x;
  auto src = image.data();
  std::vector<double> out(index.size());
  for (std::size_t i = 0; i < index.size(); ++i) out[i] = src[index[i]];
  return emit({gh * gw, feat}, std::move(out), {image},
              [image, index = std::move(index)](const Tensor&) {
                return [image, index](std::span<const double> g) {
                  auto gi = sink(image);
                  for (std::size_t i = 0; i < index.size(); ++i)
                    gi[index[i]] += g[i];
                };
              });
}

}  // namespace akd
