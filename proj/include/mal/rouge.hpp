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
#include <map>
#include <string>
#include <vector>

#include "mal/errors.hpp"

namespace mal {

using Tokens = std::vector<std::string>;

/// Precision, recall and the β = 1 F-measure.
struct RougeScore {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;

  static RougeScore from_counts(double overlap, double candidate_units, double reference_units) {
    RougeScore s;
    s.precision = candidate_units > 0 ? overlap / candidate_units : 0.0;
    s.recall = reference_units > 0 ? overlap / reference_units : 0.0;
    const double pr = s.precision + s.recall;
    s.f1 = pr > 0 ? 2.0 * s.precision * s.recall / pr : 0.0;
    return s;
  }
};

inline const std::string kPadToken = "<pad>";

namespace detail {

inline Tokens strip_pads(const Tokens& t) {
  Tokens out;
  for (const auto& w : t)
    if (w != kPadToken) out.push_back(w);
  return out;
}

inline std::map<Tokens, std::size_t> ngram_counts(const Tokens& t, std::size_t n) {
  std::map<Tokens, std::size_t> counts;
  if (t.size() < n) return counts;
  for (std::size_t i = 0; i + n <= t.size(); ++i) ++counts[Tokens(t.begin() + i, t.begin() + i + n)];
  return counts;
}

inline std::size_t total(const std::map<Tokens, std::size_t>& m) {
  std::size_t s = 0;
  for (const auto& [k, v] : m) s += v;
  return s;
}

// Best-F1 score over references; ties keep the earlier reference.
template <typename Score>
RougeScore best_over(const std::vector<Tokens>& references, Score score) {
  if (references.empty()) throw Error("ROUGE needs at least one reference");
  RougeScore best;
  bool first = true;
  for (const auto& ref : references) {
    auto s = score(strip_pads(ref));
    if (first || s.f1 > best.f1) best = s;
    first = false;
  }
  return best;
}

}  // namespace detail

/// ROUGE-N from clipped n-gram overlap (multiset intersection). With several
/// references the one with the highest F1 is reported.
inline RougeScore rouge_n(const Tokens& candidate, const std::vector<Tokens>& references, std::size_t n) {
  if (n != 1 && n != 2) throw Error("rouge_n supports n = 1 or 2");
  const auto cand = detail::ngram_counts(detail::strip_pads(candidate), n);
  const double cand_total = static_cast<double>(detail::total(cand));
  return detail::best_over(references, [&](const Tokens& ref) {
    const auto rc = detail::ngram_counts(ref, n);
    std::size_t overlap = 0;
    for (const auto& [gram, c] : cand) {
      auto it = rc.find(gram);
      if (it != rc.end()) overlap += std::min(c, it->second);
    }
    return RougeScore::from_counts(static_cast<double>(overlap), cand_total, static_cast<double>(detail::total(rc)));
  });
}

inline std::size_t lcs_length(const Tokens& a, const Tokens& b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

/// ROUGE-L: P = LCS/|candidate|, R = LCS/|reference|.
inline RougeScore rouge_l(const Tokens& candidate, const std::vector<Tokens>& references) {
  const auto cand = detail::strip_pads(candidate);
  return detail::best_over(references, [&](const Tokens& ref) {
    return RougeScore::from_counts(static_cast<double>(lcs_length(cand, ref)), static_cast<double>(cand.size()),
                                   static_cast<double>(ref.size()));
  });
}

struct RougeReport {
  RougeScore r1, r2, rl;
};

inline RougeReport rouge_all(const Tokens& candidate, const std::vector<Tokens>& references) {
  return {rouge_n(candidate, references, 1), rouge_n(candidate, references, 2), rouge_l(candidate, references)};
}

}  // namespace mal
