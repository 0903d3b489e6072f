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

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mal/errors.hpp"

namespace mal {

/// LU factorization with partial pivoting, P·A = L·U, of a dense row-major
/// n×n matrix. Supports solves against A and Aᵀ so the same factorization
/// serves a forward solve and its adjoint.
template <typename T>
class LuFactorization {
 public:
  static constexpr double kPivotThreshold = 1e-12;

  LuFactorization(std::span<const T> a, std::size_t n) : n_(n), lu_(a.begin(), a.end()), perm_(n) {
    if (lu_.size() != n * n) throw DimensionError("LU input is not square");
    for (std::size_t i = 0; i < n; ++i) perm_[i] = i;
    for (std::size_t k = 0; k < n; ++k) {
      std::size_t piv = k;
      T best = std::abs(at(k, k));
      for (std::size_t i = k + 1; i < n; ++i) {
        if (std::abs(at(i, k)) > best) {
          best = std::abs(at(i, k));
          piv = i;
        }
      }
      if (!(static_cast<double>(best) >= kPivotThreshold)) {
        throw SingularMatrixError("singular matrix: pivot " + std::to_string(static_cast<double>(best)) +
                                  " at column " + std::to_string(k));
      }
      if (piv != k) {
        for (std::size_t j = 0; j < n; ++j) std::swap(at(k, j), at(piv, j));
        std::swap(perm_[k], perm_[piv]);
      }
      const T inv = T(1) / at(k, k);
      for (std::size_t i = k + 1; i < n; ++i) {
        T f = at(i, k) * inv;
        at(i, k) = f;
        if (f == T(0)) continue;
        for (std::size_t j = k + 1; j < n; ++j) at(i, j) -= f * at(k, j);
      }
    }
  }

  std::size_t dim() const { return n_; }

  /// x with A·x = b.
  std::vector<T> solve(std::span<const T> b) const {
    std::vector<T> x(n_);
    for (std::size_t i = 0; i < n_; ++i) x[i] = b[perm_[i]];
    for (std::size_t i = 0; i < n_; ++i) {
      T s = x[i];
      for (std::size_t j = 0; j < i; ++j) s -= at(i, j) * x[j];
      x[i] = s;
    }
    for (std::size_t i = n_; i-- > 0;) {
      T s = x[i];
      for (std::size_t j = i + 1; j < n_; ++j) s -= at(i, j) * x[j];
      x[i] = s / at(i, i);
    }
    return x;
  }

  /// y with Aᵀ·y = g. Aᵀ = Uᵀ·Lᵀ·P.
  std::vector<T> solve_transpose(std::span<const T> g) const {
    std::vector<T> w(g.begin(), g.end());
    for (std::size_t i = 0; i < n_; ++i) {
      T s = w[i];
      for (std::size_t j = 0; j < i; ++j) s -= at(j, i) * w[j];
      w[i] = s / at(i, i);
    }
    for (std::size_t i = n_; i-- > 0;) {
      T s = w[i];
      for (std::size_t j = i + 1; j < n_; ++j) s -= at(j, i) * w[j];
      w[i] = s;
    }
    std::vector<T> y(n_);
    for (std::size_t i = 0; i < n_; ++i) y[perm_[i]] = w[i];
    return y;
  }

 private:
  T& at(std::size_t i, std::size_t j) { return lu_[i * n_ + j]; }
  const T& at(std::size_t i, std::size_t j) const { return lu_[i * n_ + j]; }

  std::size_t n_;
  std::vector<T> lu_;
  std::vector<std::size_t> perm_;
};

}  // namespace mal
