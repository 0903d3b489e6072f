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

#include <vector>

#include "mal/encoder.hpp"
#include "mal/ops.hpp"

namespace mal {

inline constexpr double kDefaultDamping = 0.9;
inline constexpr double kEdgeFloor = 1e-6;

template <typename T>
struct GraphSalience {
  Tensor<T> edges;      // M, [m×m]
  Tensor<T> scores;     // p, [m]
  Tensor<T> attention;  // a_u, [m]
  Tensor<T> context;    // c_u, [k_e]
  std::vector<bool> content_mask;
};

inline std::vector<std::size_t> content_indices(const std::vector<bool>& mask) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < mask.size(); ++i)
    if (mask[i]) idx.push_back(i);
  return idx;
}

/// Edge weights of the word graph: s_ij = x_iᵀ W x_j, then
/// M_ij = softplus(s_ij) + 1e-6 between content words and 0 whenever an
/// endpoint is a stopword or punctuation.
template <typename T>
Tensor<T> edge_weights(const Tensor<T>& embeddings, const Tensor<T>& w_p, const std::vector<bool>& mask) {
  const std::size_t m = embeddings.rows();
  if (mask.size() != m) throw DimensionError("edge_weights: mask length differs from vertex count");
  if (content_indices(mask).empty()) throw GraphError("edge_weights: graph has no content vertex");
  auto raw = matmul(matmul(embeddings, w_p), transpose(embeddings));
  std::vector<T> keep(m * m, T(0));
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) keep[i * m + j] = (mask[i] && mask[j]) ? T(1) : T(0);
  return mul(affine_scalar(softplus(raw), T(1), static_cast<T>(kEdgeFloor)), Tensor<T>({m, m}, std::move(keep)));
}

/// Closed-form PageRank on the content subgraph:
///   p_c = (1 − d)(I − d·M_c·D⁻¹)⁻¹ q,  q = 1/n_c,  D = diag(column sums of M_c)
/// scattered back to length m with zeros at non-content positions.
template <typename T>
Tensor<T> pagerank_closed_form(const Tensor<T>& edges, double damping, const std::vector<bool>& mask) {
  if (!(damping > 0.0 && damping < 1.0)) throw Error("pagerank: damping must lie in (0, 1)");
  const std::size_t m = edges.rows();
  if (edges.rank() != 2 || edges.cols() != m || mask.size() != m) {
    throw DimensionError("pagerank: edge matrix " + shape_string(edges.shape()) + " with mask of length " +
                         std::to_string(mask.size()));
  }
  auto idx = content_indices(mask);
  if (idx.empty()) throw GraphError("pagerank: graph has no content vertex");
  const std::size_t n = idx.size();
  auto transition = normalize_columns(gather_submatrix(edges, idx));
  const T d = static_cast<T>(damping);
  auto system = add(Tensor<T>::identity(n), scale(transition, -d));
  auto rhs = Tensor<T>::filled({n}, (T(1) - d) / static_cast<T>(n));
  return scatter(linear_solve(system, rhs), idx, m);
}

/// a_u = softmax(p) restricted to content positions.
template <typename T>
Tensor<T> unsupervised_attention(const Tensor<T>& scores, const std::vector<bool>& mask) {
  return softmax(scores, mask);
}

/// c_u = Xᵀ·a_u, a combination of word embeddings (not hidden states).
template <typename T>
Tensor<T> unsupervised_context(const Tensor<T>& a_u, const Tensor<T>& embeddings) {
  return attention_context(a_u, embeddings);
}

template <typename T>
GraphSalience<T> graph_salience(const Tensor<T>& embeddings, const Tensor<T>& w_p, const std::vector<bool>& mask,
                                double damping) {
  GraphSalience<T> g;
  g.content_mask = mask;
  g.edges = edge_weights(embeddings, w_p, mask);
  g.scores = pagerank_closed_form(g.edges, damping, mask);
  g.attention = unsupervised_attention(g.scores, mask);
  g.context = unsupervised_context(g.attention, embeddings);
  return g;
}

}  // namespace mal
