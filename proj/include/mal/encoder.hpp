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

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mal/ops.hpp"
#include "mal/param_store.hpp"

namespace mal {

struct EncoderConfig {
  std::size_t k_e = 64;  // embedding dim
  std::size_t k_h = 64;  // hidden dim per direction
};

template <typename T>
struct GruParams {
  Tensor<T> w_xr, w_hr, b_r;
  Tensor<T> w_xz, w_hz, b_z;
  Tensor<T> w_xh, w_hh, b_h;

  static GruParams create(ParamStore<T>& store, const std::string& prefix, std::size_t k_in, std::size_t k_h,
                          std::uint64_t seed) {
    GruParams p;
    p.w_xr = store.add(prefix + ".W_xr", {k_h, k_in}, seed);
    p.w_hr = store.add(prefix + ".W_hr", {k_h, k_h}, seed);
    p.b_r = store.add(prefix + ".b_r", {k_h}, seed);
    p.w_xz = store.add(prefix + ".W_xz", {k_h, k_in}, seed);
    p.w_hz = store.add(prefix + ".W_hz", {k_h, k_h}, seed);
    p.b_z = store.add(prefix + ".b_z", {k_h}, seed);
    p.w_xh = store.add(prefix + ".W_xh", {k_h, k_in}, seed);
    p.w_hh = store.add(prefix + ".W_hh", {k_h, k_h}, seed);
    p.b_h = store.add(prefix + ".b_h", {k_h}, seed);
    return p;
  }
};

/// One GRU step in the gating convention
///   r = σ(W_xr x + W_hr h + b_r)
///   z = σ(W_xz x + W_hz h + b_z)
///   g = tanh(W_xh x + W_hh (r ⊙ h) + b_h)
///   h' = z ⊙ h + (1 − z) ⊙ g
/// so a saturated update gate keeps the previous state.
template <typename T>
Tensor<T> gru_cell(const Tensor<T>& x, const Tensor<T>& h_prev, const GruParams<T>& p) {
  auto r = sigmoid(add(add(matvec(p.w_xr, x), matvec(p.w_hr, h_prev)), p.b_r));
  auto z = sigmoid(add(add(matvec(p.w_xz, x), matvec(p.w_hz, h_prev)), p.b_z));
  auto g = tanh(add(add(matvec(p.w_xh, x), matvec(p.w_hh, mul(r, h_prev))), p.b_h));
  return add(mul(z, h_prev), mul(affine_scalar(z, T(-1), T(1)), g));
}

/// Row t of the result is forward_t ‖ backward_t, both directions starting
/// from a zero state.
template <typename T>
Tensor<T> encode_bidirectional(const Tensor<T>& embeddings, const GruParams<T>& fwd, const GruParams<T>& bwd) {
  if (embeddings.rank() != 2) throw DimensionError("encode_bidirectional: embeddings must be a matrix");
  const std::size_t steps = embeddings.rows();
  const std::size_t k_h = fwd.b_r.size();
  std::vector<Tensor<T>> forward(steps), backward(steps);
  auto h = Tensor<T>::zeros({k_h});
  for (std::size_t t = 0; t < steps; ++t) {
    h = gru_cell(row(embeddings, t), h, fwd);
    forward[t] = h;
  }
  h = Tensor<T>::zeros({k_h});
  for (std::size_t t = steps; t-- > 0;) {
    h = gru_cell(row(embeddings, t), h, bwd);
    backward[t] = h;
  }
  std::vector<Tensor<T>> rows;
  rows.reserve(steps);
  for (std::size_t t = 0; t < steps; ++t) rows.push_back(concat(forward[t], backward[t]));
  return stack_rows(rows);
}

template <typename T>
struct SelfAttentionParams {
  Tensor<T> w_hi, w_hj, b_a, v;      // scoring
  Tensor<T> w_hhbar, w_chbar, b_hbar;  // state revision

  static SelfAttentionParams create(ParamStore<T>& store, const std::string& prefix, std::size_t k_h,
                                    std::uint64_t seed) {
    SelfAttentionParams p;
    p.w_hi = store.add(prefix + ".W_hi", {k_h, 2 * k_h}, seed);
    p.w_hj = store.add(prefix + ".W_hj", {k_h, 2 * k_h}, seed);
    p.b_a = store.add(prefix + ".b_a", {k_h}, seed);
    p.v = store.add(prefix + ".v", {1, k_h}, seed);
    p.w_hhbar = store.add(prefix + ".W_hhbar", {k_h, 2 * k_h}, seed);
    p.w_chbar = store.add(prefix + ".W_chbar", {k_h, 2 * k_h}, seed);
    p.b_hbar = store.add(prefix + ".b_hbar", {k_h}, seed);
    return p;
  }
};

template <typename T>
struct SelfAttentionOutput {
  Tensor<T> weights;  // [T×T], rows sum to 1
  Tensor<T> context;  // [T×2k_h]
  Tensor<T> revised;  // [T×k_h]
};

/// Additive attention scores vᵀ tanh(query + keys_j) for every key row.
template <typename T>
Tensor<T> additive_scores(const Tensor<T>& keys, const Tensor<T>& query, const Tensor<T>& v) {
  return matvec(tanh(broadcast_add(keys, query)), row(v, 0));
}

template <typename T>
SelfAttentionOutput<T> self_attention(const Tensor<T>& states, const SelfAttentionParams<T>& p) {
  if (states.rank() != 2) throw DimensionError("self_attention: states must be a matrix");
  const std::size_t steps = states.rows();
  auto queries = matmul(states, transpose(p.w_hi));
  auto keys = matmul(states, transpose(p.w_hj));
  std::vector<Tensor<T>> rows;
  rows.reserve(steps);
  for (std::size_t i = 0; i < steps; ++i) {
    rows.push_back(softmax(additive_scores(keys, add(row(queries, i), p.b_a), p.v)));
  }
  SelfAttentionOutput<T> out;
  out.weights = stack_rows(rows);
  out.context = matmul(out.weights, states);
  out.revised = tanh(broadcast_add(
      add(matmul(states, transpose(p.w_hhbar)), matmul(out.context, transpose(p.w_chbar))), p.b_hbar));
  return out;
}

/// Output layer of the salience classifier. Its weights are distinct from
/// the GRU gate weights.
template <typename T>
struct SalienceHeadParams {
  Tensor<T> w_x, w_h, w_c, w_hbar;  // [1×k] rows
  Tensor<T> b;                      // [1]

  static SalienceHeadParams create(ParamStore<T>& store, const std::string& prefix, const EncoderConfig& cfg,
                                   std::uint64_t seed) {
    SalienceHeadParams p;
    p.w_x = store.add(prefix + ".W_xr", {1, cfg.k_e}, seed);
    p.w_h = store.add(prefix + ".W_hr", {1, 2 * cfg.k_h}, seed);
    p.w_c = store.add(prefix + ".W_cr", {1, 2 * cfg.k_h}, seed);
    p.w_hbar = store.add(prefix + ".W_hbarr", {1, cfg.k_h}, seed);
    p.b = store.add(prefix + ".b_r", {1}, seed);
    return p;
  }
};

/// r̂_t = σ(w_x·x_t + w_h·h_t + w_c·c_t + w_h̄·h̄_t + b), one value per position.
template <typename T>
Tensor<T> predict_salience(const Tensor<T>& embeddings, const Tensor<T>& states, const Tensor<T>& context,
                           const Tensor<T>& revised, const SalienceHeadParams<T>& p) {
  const std::size_t steps = embeddings.rows();
  if (states.rows() != steps || context.rows() != steps || revised.rows() != steps) {
    throw DimensionError("predict_salience: row counts differ");
  }
  auto logits = add(add(matvec(embeddings, row(p.w_x, 0)), matvec(states, row(p.w_h, 0))),
                    add(matvec(context, row(p.w_c, 0)), matvec(revised, row(p.w_hbar, 0))));
  return sigmoid(broadcast_add(logits, p.b));
}

/// a_s = softmax(r̂) over unmasked positions.
template <typename T>
Tensor<T> supervised_attention(const Tensor<T>& r_hat, std::optional<std::vector<bool>> mask = std::nullopt) {
  return softmax(r_hat, std::move(mask));
}

/// c = Hᵀ·a: attention-weighted combination of the rows of H.
template <typename T>
Tensor<T> attention_context(const Tensor<T>& weights, const Tensor<T>& rows) {
  if (rows.rank() != 2 || weights.rank() != 1 || weights.size() != rows.rows()) {
    throw DimensionError("attention_context: weights " + shape_string(weights.shape()) + " for rows " +
                         shape_string(rows.shape()));
  }
  return matvec(transpose(rows), weights);
}

template <typename T>
Tensor<T> supervised_context(const Tensor<T>& a_s, const Tensor<T>& states) {
  return attention_context(a_s, states);
}

template <typename T>
struct EncoderOutput {
  Tensor<T> states;     // H, [T×2k_h]
  Tensor<T> self_context;  // [T×2k_h]
  Tensor<T> revised;    // H̄, [T×k_h]
  Tensor<T> r_hat;      // [T]
  Tensor<T> a_s;        // [T]
  Tensor<T> c_s;        // [2k_h]
  std::size_t length = 0;

  bool has_salience() const { return r_hat.defined(); }
};

}  // namespace mal
