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
#include <numeric>
#include <string>
#include <unordered_set>
#include <vector>

#include "mal/model.hpp"
#include "mal/rouge.hpp"

namespace mal {

enum class SalienceSource { supervised, unsupervised };

/// Tokens at the k largest attention values, in descending order (ties go to
/// the earlier position). Repeated surface forms keep their first occurrence,
/// so the result holds at most k distinct words.
inline Tokens top_k_salient(const std::vector<double>& attention, const Tokens& tokens, std::size_t k) {
  if (attention.size() != tokens.size()) throw DimensionError("top_k_salient: attention and tokens differ in length");
  if (k == 0) throw Error("top_k_salient: k must be positive");
  std::vector<std::size_t> order(tokens.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return attention[a] > attention[b]; });
  Tokens out;
  std::unordered_set<std::string> seen;
  for (std::size_t i : order) {
    if (out.size() == k) break;
    if (seen.insert(tokens[i]).second) out.push_back(tokens[i]);
  }
  return out;
}

/// Supervised (a_s) or unsupervised (a_u) attention over one source.
template <typename T>
std::vector<double> salience_attention(const MalModel<T>& model, const std::vector<int>& source_ids,
                                       const std::vector<bool>& content, SalienceSource which, double damping) {
  NoGradGuard no_grad;
  auto x = model.embed_source(source_ids);
  Tensor<T> a;
  if (which == SalienceSource::supervised) {
    if (!model.config().supervised_branch) throw Error("model has no supervised salience branch");
    a = model.encode(x, true).a_s;
  } else {
    if (!model.config().graph_branch) throw Error("model has no word-graph branch");
    a = graph_salience(x, model.graph_weights(), MalModel<T>::graph_mask(content, source_ids.size()), damping)
            .attention;
  }
  return std::vector<double>(a.data().begin(), a.data().end());
}

/// Mean ROUGE-1 F1 of the top-k salient source words against each reference
/// summary.
template <typename T>
double evaluate_topk(const std::vector<TrainingPair>& corpus, const MalModel<T>& model, std::size_t k,
                     SalienceSource which, double damping = kDefaultDamping) {
  if (corpus.empty()) return 0.0;
  double total = 0.0;
  for (const auto& pair : corpus) {
    auto att = salience_attention(model, pair.source_ids, pair.content_mask, which, damping);
    total += rouge_n(top_k_salient(att, pair.source_tokens, k), {pair.summary_tokens}, 1).f1;
  }
  return total / static_cast<double>(corpus.size());
}

}  // namespace mal
