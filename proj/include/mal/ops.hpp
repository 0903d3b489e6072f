// Copyright 2026 The malsum Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mal/linalg.hpp"
#include "mal/tensor.hpp"

// Differentiable operations on mal::Tensor. Every op checks its shapes, checks
// that its output is finite, and records a backward closure when needed.
namespace mal {

namespace detail {

template <typename T>
void require_rank(const Tensor<T>& t, std::size_t rank, const char* op) {
  if (t.rank() != rank) {
    throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                         shape_string(t.shape()));
  }
}

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
  }
}

template <typename T>
T stable_sigmoid(T x) {
  if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
  T e = std::exp(x);
  return e / (T(1) + e);
}

template <typename T>
T stable_softplus(T x) {
  return std::max(x, T(0)) + std::log1p(std::exp(-std::abs(x)));
}

// Elementwise op with derivative expressed through input and output values.
template <typename T, typename F, typename DF>
Tensor<T> unary(const char* op, const Tensor<T>& x, F f, DF df) {
  std::vector<T> out(x.size());
  auto xv = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(xv[i]);
  return make_result<T>(op, x.shape(), std::move(out), {x}, [df](Node<T>& self) {
    T* gx = parent_grad(self, 0);
    if (!gx) return;
    const auto& in = self.parents[0]->value;
    for (std::size_t i = 0; i < self.grad.size(); ++i) gx[i] += self.grad[i] * df(in[i], self.value[i]);
  });
}

}  // namespace detail

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.cols() != b.rows()) {
    throw DimensionError("matmul: cannot multiply " + shape_string(a.shape()) + " by " +
                         shape_string(b.shape()));
  }
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  std::vector<T> out(m * n, T(0));
  auto av = a.data();
  auto bv = b.data();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const T aip = av[i * k + p];
      for (std::size_t j = 0; j < n; ++j) out[i * n + j] += aip * bv[p * n + j];
    }
  }
  return detail::make_result<T>("matmul", {m, n}, std::move(out), {a, b}, [m, k, n](Node<T>& self) {
    const auto& g = self.grad;
    const auto& av = self.parents[0]->value;
    const auto& bv = self.parents[1]->value;
    if (T* ga = detail::parent_grad(self, 0)) {
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          T s = T(0);
          for (std::size_t j = 0; j < n; ++j) s += g[i * n + j] * bv[p * n + j];
          ga[i * k + p] += s;
        }
    }
    if (T* gb = detail::parent_grad(self, 1)) {
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          const T aip = av[i * k + p];
          for (std::size_t j = 0; j < n; ++j) gb[p * n + j] += aip * g[i * n + j];
        }
    }
  });
}

/// Matrix [m×k] times vector [k] -> [m].
template <typename T>
Tensor<T> matvec(const Tensor<T>& a, const Tensor<T>& x) {
  if (a.rank() != 2 || x.rank() != 1 || a.cols() != x.size()) {
    throw DimensionError("matvec: cannot multiply " + shape_string(a.shape()) + " by " +
                         shape_string(x.shape()));
  }
  const std::size_t m = a.rows(), k = a.cols();
  std::vector<T> out(m, T(0));
  auto av = a.data();
  auto xv = x.data();
  for (std::size_t i = 0; i < m; ++i) {
    T s = T(0);
    for (std::size_t p = 0; p < k; ++p) s += av[i * k + p] * xv[p];
    out[i] = s;
  }
  return detail::make_result<T>("matvec", {m}, std::move(out), {a, x}, [m, k](Node<T>& self) {
    const auto& g = self.grad;
    const auto& av = self.parents[0]->value;
    const auto& xv = self.parents[1]->value;
    if (T* ga = detail::parent_grad(self, 0)) {
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) ga[i * k + p] += g[i] * xv[p];
    }
    if (T* gx = detail::parent_grad(self, 1)) {
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) gx[p] += av[i * k + p] * g[i];
    }
  });
}

template <typename T>
Tensor<T> transpose(const Tensor<T>& a) {
  detail::require_rank(a, 2, "transpose");
  const std::size_t m = a.rows(), n = a.cols();
  std::vector<T> out(m * n);
  auto av = a.data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = av[i * n + j];
  return detail::make_result<T>("transpose", {n, m}, std::move(out), {a}, [m, n](Node<T>& self) {
    if (T* ga = detail::parent_grad(self, 0)) {
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += self.grad[j * m + i];
    }
  });
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  detail::require_same_shape(a, b, "add");
  std::vector<T> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + b.data()[i];
  return detail::make_result<T>("add", a.shape(), std::move(out), {a, b}, [](Node<T>& self) {
    for (std::size_t k = 0; k < 2; ++k)
      if (T* g = detail::parent_grad(self, k))
        for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
  });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  detail::require_same_shape(a, b, "sub");
  std::vector<T> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] - b.data()[i];
  return detail::make_result<T>("sub", a.shape(), std::move(out), {a, b}, [](Node<T>& self) {
    if (T* g = detail::parent_grad(self, 0))
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
    if (T* g = detail::parent_grad(self, 1))
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] -= self.grad[i];
  });
}

/// Elementwise (Hadamard) product.
template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  detail::require_same_shape(a, b, "mul");
  std::vector<T> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * b.data()[i];
  return detail::make_result<T>("mul", a.shape(), std::move(out), {a, b}, [](Node<T>& self) {
    const auto& av = self.parents[0]->value;
    const auto& bv = self.parents[1]->value;
    if (T* g = detail::parent_grad(self, 0))
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * bv[i];
    if (T* g = detail::parent_grad(self, 1))
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * av[i];
  });
}

/// alpha * x + beta, elementwise.
template <typename T>
Tensor<T> affine_scalar(const Tensor<T>& x, T alpha, T beta) {
  std::vector<T> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = alpha * x.data()[i] + beta;
  return detail::make_result<T>("affine_scalar", x.shape(), std::move(out), {x}, [alpha](Node<T>& self) {
    if (T* g = detail::parent_grad(self, 0))
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += alpha * self.grad[i];
  });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& x, T alpha) {
  return affine_scalar(x, alpha, T(0));
}

/// x + b where b has one element, or matches the trailing dimension of x.
template <typename T>
Tensor<T> broadcast_add(const Tensor<T>& x, const Tensor<T>& b) {
  std::size_t period;
  if (b.size() == 1) {
    period = 1;
  } else if (b.rank() == 1 && b.size() == x.shape().back()) {
    period = b.size();
  } else {
    throw DimensionError("broadcast_add: cannot broadcast " + shape_string(b.shape()) + " onto " +
                         shape_string(x.shape()));
  }
  std::vector<T> out(x.size());
  auto xv = x.data();
  auto bv = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[i] + bv[i % period];
  return detail::make_result<T>("broadcast_add", x.shape(), std::move(out), {x, b}, [period](Node<T>& self) {
    if (T* g = detail::parent_grad(self, 0))
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
    if (T* g = detail::parent_grad(self, 1))
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i % period] += self.grad[i];
  });
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  return detail::unary(
      "sigmoid", x, [](T v) { return detail::stable_sigmoid(v); },
      [](T, T y) { return y * (T(1) - y); });
}

template <typename T>
Tensor<T> tanh(const Tensor<T>& x) {
  return detail::unary(
      "tanh", x, [](T v) { return std::tanh(v); }, [](T, T y) { return T(1) - y * y; });
}

template <typename T>
Tensor<T> softplus(const Tensor<T>& x) {
  return detail::unary(
      "softplus", x, [](T v) { return detail::stable_softplus(v); },
      [](T v, T) { return detail::stable_sigmoid(v); });
}

template <typename T>
Tensor<T> log(const Tensor<T>& x) {
  return detail::unary(
      "log", x, [](T v) { return std::log(v); }, [](T v, T) { return T(1) / v; });
}

template <typename T>
Tensor<T> exp(const Tensor<T>& x) {
  return detail::unary(
      "exp", x, [](T v) { return std::exp(v); }, [](T, T y) { return y; });
}

/// Clamps into [lo, hi]; clamped elements pass no gradient.
template <typename T>
Tensor<T> clamp(const Tensor<T>& x, T lo, T hi) {
  return detail::unary(
      "clamp", x, [lo, hi](T v) { return std::clamp(v, lo, hi); },
      [lo, hi](T v, T) { return (v < lo || v > hi) ? T(0) : T(1); });
}

/// Identity on values, no gradient flows back through it.
template <typename T>
Tensor<T> detach(const Tensor<T>& x) {
  return Tensor<T>(x.shape(), x.to_vector());
}

/// Softmax over a vector. Masked-out positions (mask[i] == false) output
/// exactly 0 and receive no gradient.
template <typename T>
Tensor<T> softmax(const Tensor<T>& x, std::optional<std::vector<bool>> mask = std::nullopt) {
  detail::require_rank(x, 1, "softmax");
  const std::size_t n = x.size();
  if (mask && mask->size() != n) {
    throw DimensionError("softmax: mask of length " + std::to_string(mask->size()) + " for input " +
                         shape_string(x.shape()));
  }
  auto on = [&](std::size_t i) { return !mask || (*mask)[i]; };
  auto xv = x.data();
  T mx = T(0);
  bool any = false;
  for (std::size_t i = 0; i < n; ++i) {
    if (!on(i)) continue;
    mx = any ? std::max(mx, xv[i]) : xv[i];
    any = true;
  }
  if (!any) throw InvalidMaskError("softmax: every position is masked");
  std::vector<T> out(n, T(0));
  T z = T(0);
  for (std::size_t i = 0; i < n; ++i) {
    if (!on(i)) continue;
    out[i] = std::exp(xv[i] - mx);
    z += out[i];
  }
  for (auto& v : out) v /= z;
  return detail::make_result<T>("softmax", x.shape(), std::move(out), {x}, [](Node<T>& self) {
    T* gx = detail::parent_grad(self, 0);
    if (!gx) return;
    const auto& y = self.value;
    T dot = T(0);
    for (std::size_t i = 0; i < y.size(); ++i) dot += y[i] * self.grad[i];
    // Masked entries have y == 0 so they pick up nothing here.
    for (std::size_t i = 0; i < y.size(); ++i) gx[i] += y[i] * (self.grad[i] - dot);
  });
}

/// Concatenation of two vectors.
template <typename T>
Tensor<T> concat(const Tensor<T>& a, const Tensor<T>& b) {
  detail::require_rank(a, 1, "concat");
  detail::require_rank(b, 1, "concat");
  const std::size_t na = a.size(), nb = b.size();
  std::vector<T> out;
  out.reserve(na + nb);
  out.insert(out.end(), a.data().begin(), a.data().end());
  out.insert(out.end(), b.data().begin(), b.data().end());
  return detail::make_result<T>("concat", {na + nb}, std::move(out), {a, b}, [na, nb](Node<T>& self) {
    if (T* g = detail::parent_grad(self, 0))
      for (std::size_t i = 0; i < na; ++i) g[i] += self.grad[i];
    if (T* g = detail::parent_grad(self, 1))
      for (std::size_t i = 0; i < nb; ++i) g[i] += self.grad[na + i];
  });
}

/// Stacks equal-length vectors as the rows of a matrix.
template <typename T>
Tensor<T> stack_rows(const std::vector<Tensor<T>>& rows) {
  if (rows.empty()) throw EmptyInputError("stack_rows: no rows");
  const std::size_t n = rows[0].size();
  std::vector<T> out;
  out.reserve(rows.size() * n);
  for (const auto& r : rows) {
    detail::require_rank(r, 1, "stack_rows");
    if (r.size() != n) throw DimensionError("stack_rows: ragged rows");
    out.insert(out.end(), r.data().begin(), r.data().end());
  }
  return detail::make_result<T>("stack_rows", {rows.size(), n}, std::move(out), rows, [n](Node<T>& self) {
    for (std::size_t k = 0; k < self.parents.size(); ++k)
      if (T* g = detail::parent_grad(self, k))
        for (std::size_t i = 0; i < n; ++i) g[i] += self.grad[k * n + i];
  });
}

/// Rows `ids` of a matrix, as a [ids.size() × cols] matrix (embedding lookup).
template <typename T>
Tensor<T> gather_rows(const Tensor<T>& m, std::span<const int> ids) {
  detail::require_rank(m, 2, "gather_rows");
  if (ids.empty()) throw EmptyInputError("gather_rows: no ids");
  const std::size_t n = m.cols();
  std::vector<std::size_t> idx;
  idx.reserve(ids.size());
  for (int id : ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= m.rows()) {
      throw VocabularyRangeError("row id " + std::to_string(id) + " outside [0, " + std::to_string(m.rows()) +
                                 ")");
    }
    idx.push_back(static_cast<std::size_t>(id));
  }
  std::vector<T> out;
  out.reserve(idx.size() * n);
  auto mv = m.data();
  for (auto r : idx) out.insert(out.end(), mv.begin() + r * n, mv.begin() + (r + 1) * n);
  return detail::make_result<T>("gather_rows", {idx.size(), n}, std::move(out), {m},
                                [idx, n](Node<T>& self) {
                                  if (T* g = detail::parent_grad(self, 0))
                                    for (std::size_t k = 0; k < idx.size(); ++k)
                                      for (std::size_t i = 0; i < n; ++i) g[idx[k] * n + i] += self.grad[k * n + i];
                                });
}

template <typename T>
Tensor<T> row(const Tensor<T>& m, std::size_t r) {
  detail::require_rank(m, 2, "row");
  if (r >= m.rows()) throw DimensionError("row: index " + std::to_string(r) + " outside " + shape_string(m.shape()));
  const std::size_t n = m.cols();
  std::vector<T> out(m.data().begin() + r * n, m.data().begin() + (r + 1) * n);
  return detail::make_result<T>("row", {n}, std::move(out), {m}, [r, n](Node<T>& self) {
    if (T* g = detail::parent_grad(self, 0))
      for (std::size_t i = 0; i < n; ++i) g[r * n + i] += self.grad[i];
  });
}

template <typename T>
Tensor<T> mean_rows(const Tensor<T>& m) {
  detail::require_rank(m, 2, "mean_rows");
  const std::size_t rows = m.rows(), n = m.cols();
  std::vector<T> out(n, T(0));
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t i = 0; i < n; ++i) out[i] += m.data()[r * n + i];
  for (auto& v : out) v /= static_cast<T>(rows);
  return detail::make_result<T>("mean_rows", {n}, std::move(out), {m}, [rows, n](Node<T>& self) {
    if (T* g = detail::parent_grad(self, 0))
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t i = 0; i < n; ++i) g[r * n + i] += self.grad[i] / static_cast<T>(rows);
  });
}

template <typename T>
Tensor<T> sum(const Tensor<T>& x) {
  T s = T(0);
  for (T v : x.data()) s += v;
  return detail::make_result<T>("sum", {1}, {s}, {x}, [](Node<T>& self) {
    if (T* g = detail::parent_grad(self, 0)) {
      const T gs = self.grad[0];
      for (std::size_t i = 0; i < self.parents[0]->value.size(); ++i) g[i] += gs;
    }
  });
}

template <typename T>
Tensor<T> mean(const Tensor<T>& x) {
  return scale(sum(x), T(1) / static_cast<T>(x.size()));
}

/// Element i of x as a one-element tensor.
template <typename T>
Tensor<T> pick(const Tensor<T>& x, std::size_t i) {
  if (i >= x.size()) throw DimensionError("pick: index " + std::to_string(i) + " outside " + shape_string(x.shape()));
  return detail::make_result<T>("pick", {1}, {x.data()[i]}, {x}, [i](Node<T>& self) {
    if (T* g = detail::parent_grad(self, 0)) g[i] += self.grad[0];
  });
}

/// Solves A·x = b by LU with partial pivoting. The backward pass reuses the
/// factorization: g_b = A⁻ᵀ·g_x and g_A = −g_b·xᵀ.
template <typename T>
Tensor<T> linear_solve(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() != 2 || a.rows() != a.cols() || b.rank() != 1 || b.size() != a.rows()) {
    throw DimensionError("linear_solve: cannot solve " + shape_string(a.shape()) + " against " +
                         shape_string(b.shape()));
  }
  auto lu = std::make_shared<LuFactorization<T>>(a.data(), a.rows());
  std::vector<T> x = lu->solve(b.data());
  const std::size_t n = a.rows();
  return detail::make_result<T>("linear_solve", {n}, std::move(x), {a, b}, [lu, n](Node<T>& self) {
    std::vector<T> gb = lu->solve_transpose(self.grad);
    if (T* g = detail::parent_grad(self, 1))
      for (std::size_t i = 0; i < n; ++i) g[i] += gb[i];
    if (T* g = detail::parent_grad(self, 0))
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) g[i * n + j] -= gb[i] * self.value[j];
  });
}

/// M·D⁻¹ with D = diag(column sums of M). Every column sum must be positive.
template <typename T>
Tensor<T> normalize_columns(const Tensor<T>& m) {
  detail::require_rank(m, 2, "normalize_columns");
  const std::size_t rows = m.rows(), cols = m.cols();
  auto mv = m.data();
  std::vector<T> colsum(cols, T(0));
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) colsum[j] += mv[i * cols + j];
  for (std::size_t j = 0; j < cols; ++j) {
    if (!(colsum[j] > T(0))) throw GraphError("column " + std::to_string(j) + " has non-positive sum");
  }
  std::vector<T> out(rows * cols);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) out[i * cols + j] = mv[i * cols + j] / colsum[j];
  return detail::make_result<T>("normalize_columns", {rows, cols}, std::move(out), {m},
                                [rows, cols, colsum](Node<T>& self) {
                                  T* g = detail::parent_grad(self, 0);
                                  if (!g) return;
                                  const auto& a = self.value;
                                  for (std::size_t j = 0; j < cols; ++j) {
                                    T dot = T(0);
                                    for (std::size_t i = 0; i < rows; ++i) dot += self.grad[i * cols + j] * a[i * cols + j];
                                    for (std::size_t i = 0; i < rows; ++i)
                                      g[i * cols + j] += (self.grad[i * cols + j] - dot) / colsum[j];
                                  }
                                });
}

/// The square submatrix M[idx, idx].
template <typename T>
Tensor<T> gather_submatrix(const Tensor<T>& m, std::vector<std::size_t> idx) {
  if (m.rank() != 2 || m.rows() != m.cols()) throw DimensionError("gather_submatrix: needs a square matrix");
  if (idx.empty()) throw EmptyInputError("gather_submatrix: empty index set");
  const std::size_t n = m.cols(), k = idx.size();
  for (auto i : idx)
    if (i >= n) throw DimensionError("gather_submatrix: index out of range");
  std::vector<T> out(k * k);
  for (std::size_t a = 0; a < k; ++a)
    for (std::size_t b = 0; b < k; ++b) out[a * k + b] = m.data()[idx[a] * n + idx[b]];
  return detail::make_result<T>("gather_submatrix", {k, k}, std::move(out), {m}, [idx, n, k](Node<T>& self) {
    if (T* g = detail::parent_grad(self, 0))
      for (std::size_t a = 0; a < k; ++a)
        for (std::size_t b = 0; b < k; ++b) g[idx[a] * n + idx[b]] += self.grad[a * k + b];
  });
}

/// Vector of length n holding v[k] at position idx[k] and zero elsewhere.
template <typename T>
Tensor<T> scatter(const Tensor<T>& v, std::vector<std::size_t> idx, std::size_t n) {
  detail::require_rank(v, 1, "scatter");
  if (idx.size() != v.size()) throw DimensionError("scatter: index count differs from vector length");
  std::vector<T> out(n, T(0));
  for (std::size_t k = 0; k < idx.size(); ++k) {
    if (idx[k] >= n) throw DimensionError("scatter: index out of range");
    out[idx[k]] = v.data()[k];
  }
  return detail::make_result<T>("scatter", {n}, std::move(out), {v}, [idx](Node<T>& self) {
    if (T* g = detail::parent_grad(self, 0))
      for (std::size_t k = 0; k < idx.size(); ++k) g[k] += self.grad[idx[k]];
  });
}

}  // namespace mal
