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

// Reference computations written with plain loops over std::vector, sharing
// no code with the library beyond its public types.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <random>
#include <span>
#include <vector>

namespace mal::oracle {

using Vec = std::vector<double>;
using Mat = std::vector<Vec>;  // row-major, Mat[i][j]

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline Mat to_mat(std::span<const double> flat, std::size_t rows, std::size_t cols) {
  Mat m(rows, Vec(cols));
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) m[i][j] = flat[i * cols + j];
  return m;
}

template <typename Tensor>
Mat mat_of(const Tensor& t) {
  return to_mat(t.data(), t.rows(), t.cols());
}

template <typename Tensor>
Vec vec_of(const Tensor& t) {
  return Vec(t.data().begin(), t.data().end());
}

inline Vec mv(const Mat& a, const Vec& x) {
  Vec y(a.size(), 0.0);
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < x.size(); ++j) y[i] += a[i][j] * x[j];
  return y;
}

inline Vec plus(Vec a, const Vec& b) {
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
  return a;
}

inline Vec softmax(const Vec& x) {
  double mx = -std::numeric_limits<double>::infinity();
  for (double v : x) mx = std::max(mx, v);
  Vec y(x.size());
  double z = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) z += (y[i] = std::exp(x[i] - mx));
  for (double& v : y) v /= z;
  return y;
}

inline Vec weighted_rows(const Vec& w, const Mat& rows) {
  Vec c(rows[0].size(), 0.0);
  for (std::size_t t = 0; t < rows.size(); ++t)
    for (std::size_t j = 0; j < c.size(); ++j) c[j] += w[t] * rows[t][j];
  return c;
}

struct Gru {
  Mat w_xr, w_hr, w_xz, w_hz, w_xh, w_hh;
  Vec b_r, b_z, b_h;
};

inline Vec gru(const Gru& p, const Vec& x, const Vec& h) {
  const std::size_t n = h.size();
  Vec r(n), z(n), g(n), out(n);
  Vec ax = mv(p.w_xr, x), ah = mv(p.w_hr, h);
  for (std::size_t i = 0; i < n; ++i) r[i] = sigmoid(ax[i] + ah[i] + p.b_r[i]);
  ax = mv(p.w_xz, x);
  ah = mv(p.w_hz, h);
  for (std::size_t i = 0; i < n; ++i) z[i] = sigmoid(ax[i] + ah[i] + p.b_z[i]);
  Vec rh(n);
  for (std::size_t i = 0; i < n; ++i) rh[i] = r[i] * h[i];
  ax = mv(p.w_xh, x);
  ah = mv(p.w_hh, rh);
  for (std::size_t i = 0; i < n; ++i) g[i] = std::tanh(ax[i] + ah[i] + p.b_h[i]);
  for (std::size_t i = 0; i < n; ++i) out[i] = z[i] * h[i] + (1.0 - z[i]) * g[i];
  return out;
}

/// e_j = v · tanh(query + keys[j]).
inline Vec additive(const Mat& keys, const Vec& query, const Vec& v) {
  Vec e(keys.size(), 0.0);
  for (std::size_t j = 0; j < keys.size(); ++j)
    for (std::size_t i = 0; i < v.size(); ++i) e[j] += v[i] * std::tanh(query[i] + keys[j][i]);
  return e;
}

/// Power iteration p ← (1−d)/n + d·A·p with A the column-normalized M,
/// iterated until successive iterates agree to `tol` in the ∞-norm.
inline Vec power_iteration(const Mat& m, double d, double tol = 1e-12, std::size_t max_iter = 1000000) {
  const std::size_t n = m.size();
  Vec colsum(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) colsum[j] += m[i][j];
  Vec p(n, 1.0 / static_cast<double>(n));
  for (std::size_t it = 0; it < max_iter; ++it) {
    Vec next(n, (1.0 - d) / static_cast<double>(n));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) next[i] += d * m[i][j] / colsum[j] * p[j];
    double delta = 0.0;
    for (std::size_t i = 0; i < n; ++i) delta = std::max(delta, std::abs(next[i] - p[i]));
    p = std::move(next);
    if (delta < tol) break;
  }
  return p;
}

/// Best EOS-terminated continuation of BOS with at most max_len generated
/// tokens, ranked by mean log-probability per generated token (EOS counted).
/// `logprobs(prefix)` gives the next-token log-probabilities after `prefix`.
struct Enumerated {
  std::vector<int> tokens;  // without BOS/EOS
  double logprob = -std::numeric_limits<double>::infinity();
  double score = -std::numeric_limits<double>::infinity();
  std::size_t candidates = 0;
};

inline Enumerated exhaustive_best(const std::function<Vec(const std::vector<int>&)>& logprobs, int bos, int eos,
                                  std::size_t max_len) {
  Enumerated best;
  std::function<void(std::vector<int>&, double)> walk = [&](std::vector<int>& prefix, double lp) {
    const std::size_t generated = prefix.size() - 1;
    if (generated == max_len) return;
    Vec next = logprobs(prefix);
    for (std::size_t w = 0; w < next.size(); ++w) {
      const double total = lp + next[w];
      if (static_cast<int>(w) == eos) {
        ++best.candidates;
        const double score = total / static_cast<double>(generated + 1);
        if (score > best.score) {
          best.score = score;
          best.logprob = total;
          best.tokens.assign(prefix.begin() + 1, prefix.end());
        }
        continue;
      }
      prefix.push_back(static_cast<int>(w));
      walk(prefix, total);
      prefix.pop_back();
    }
  };
  std::vector<int> start{bos};
  walk(start, 0.0);
  return best;
}

}  // namespace mal::oracle
