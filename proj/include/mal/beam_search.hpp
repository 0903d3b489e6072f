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
#include <limits>
#include <utility>
#include <vector>

namespace mal {

struct BeamConfig {
  std::size_t beam = 10;
  std::size_t max_len = 50;  // generated tokens, EOS included
  int bos = 2;
  int eos = 3;
};

template <typename State>
struct Hypothesis {
  std::vector<int> tokens;  // starts with BOS
  double logprob = 0.0;
  State state;
  bool finished = false;

  /// Mean log-probability per generated token.
  double score() const {
    return tokens.size() > 1 ? logprob / static_cast<double>(tokens.size() - 1) : logprob;
  }
};

struct BeamResult {
  std::vector<int> tokens;  // BOS and EOS stripped
  double logprob = 0.0;
  double score = -std::numeric_limits<double>::infinity();
  bool finished = false;
};

/// Log-softmax in double precision.
template <typename Range>
std::vector<double> log_softmax(const Range& logits) {
  std::vector<double> out(logits.begin(), logits.end());
  const double mx = *std::max_element(out.begin(), out.end());
  double z = 0.0;
  for (double v : out) z += std::exp(v - mx);
  const double lz = mx + std::log(z);
  for (double& v : out) v -= lz;
  return out;
}

/// Length-synchronous beam search.
///
/// `step(state, prev_token)` returns {log-probabilities over the vocabulary,
/// next state}. Each round expands every live hypothesis over the whole
/// vocabulary and keeps the `beam` best candidates by cumulative
/// log-probability; those ending in EOS move to the finished pool. The search
/// stops once the pool holds `beam` hypotheses or after `max_len` rounds. The
/// answer is the finished hypothesis with the best mean per-token
/// log-probability, or the best live one if nothing finished.
template <typename State, typename Step>
BeamResult beam_search(Step&& step, State initial, const BeamConfig& cfg) {
  using Hyp = Hypothesis<State>;
  const std::size_t width = std::max<std::size_t>(cfg.beam, 1);
  std::vector<Hyp> live{Hyp{{cfg.bos}, 0.0, std::move(initial), false}};
  std::vector<Hyp> finished;

  struct Candidate {
    std::size_t parent;
    int token;
    double logprob;
  };

  for (std::size_t t = 0; t < cfg.max_len && !live.empty(); ++t) {
    std::vector<State> next_states;
    std::vector<Candidate> candidates;
    next_states.reserve(live.size());
    for (std::size_t h = 0; h < live.size(); ++h) {
      auto [logprobs, next] = step(live[h].state, live[h].tokens.back());
      next_states.push_back(std::move(next));
      for (std::size_t w = 0; w < logprobs.size(); ++w) {
        candidates.push_back({h, static_cast<int>(w), live[h].logprob + logprobs[w]});
      }
    }
    std::stable_sort(candidates.begin(), candidates.end(),
                     [](const Candidate& a, const Candidate& b) { return a.logprob > b.logprob; });
    if (candidates.size() > width) candidates.resize(width);

    std::vector<Hyp> survivors;
    for (const auto& c : candidates) {
      Hyp hyp;
      hyp.tokens = live[c.parent].tokens;
      hyp.tokens.push_back(c.token);
      hyp.logprob = c.logprob;
      hyp.state = next_states[c.parent];
      hyp.finished = c.token == cfg.eos;
      (hyp.finished ? finished : survivors).push_back(std::move(hyp));
    }
    live = std::move(survivors);
    if (finished.size() >= width) break;
  }

  const auto& pool = finished.empty() ? live : finished;
  BeamResult result;
  const Hyp* best = nullptr;
  for (const auto& h : pool) {
    if (!best || h.score() > best->score()) best = &h;
  }
  if (!best) return result;
  result.logprob = best->logprob;
  result.score = best->score();
  result.finished = best->finished;
  result.tokens.assign(best->tokens.begin() + 1, best->tokens.end());
  if (result.finished) result.tokens.pop_back();
  return result;
}

}  // namespace mal
