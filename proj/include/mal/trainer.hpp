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
#include <cstdint>
#include <functional>
#include <numeric>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "mal/model.hpp"

namespace mal {

/// Mean binary cross-entropy with predictions clamped to [1e-7, 1 − 1e-7].
template <typename T>
Tensor<T> salience_loss(const Tensor<T>& r_hat, const std::vector<int>& labels) {
  if (r_hat.size() != labels.size()) {
    throw DimensionError("salience_loss: " + std::to_string(r_hat.size()) + " predictions for " +
                         std::to_string(labels.size()) + " labels");
  }
  auto p = clamp(r_hat, T(1e-7), T(1) - T(1e-7));
  std::vector<T> pos(labels.size()), neg(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1) throw Error("salience labels must be 0 or 1");
    pos[i] = static_cast<T>(labels[i]);
    neg[i] = T(1) - pos[i];
  }
  auto ll = add(mul(Tensor<T>::vector(pos), log(p)), mul(Tensor<T>::vector(neg), log(affine_scalar(p, T(-1), T(1)))));
  return scale(sum(ll), T(-1) / static_cast<T>(labels.size()));
}

/// −Σ_t log dist_t[target_t].
template <typename T>
Tensor<T> nll_loss(const std::vector<Tensor<T>>& dists, const std::vector<int>& targets) {
  if (dists.size() != targets.size()) throw DimensionError("nll_loss: one distribution per target expected");
  if (dists.empty()) throw EmptyInputError("nll_loss: no targets");
  Tensor<T> total;
  for (std::size_t t = 0; t < dists.size(); ++t) {
    const int y = targets[t];
    if (y < 0 || static_cast<std::size_t>(y) >= dists[t].size()) {
      throw VocabularyRangeError("nll_loss: target id " + std::to_string(y) + " out of range");
    }
    auto term = log(clamp(pick(dists[t], static_cast<std::size_t>(y)), T(1e-30), T(1)));
    total = total.defined() ? add(total, term) : term;
  }
  return scale(total, T(-1));
}

template <typename T>
struct LossBreakdown {
  Tensor<T> total;
  double salience = 0.0;  // ℒ_s, 0 when disabled
  double nll = 0.0;       // ℒ_NLL
  std::size_t target_tokens = 0;
};

/// Teacher-forced decoder pass: feeds BOS, y_1, ..., y_{n−1} and returns the
/// n output distributions.
template <typename T>
std::vector<Tensor<T>> teacher_forced_dists(const MalModel<T>& model, const SourceForward<T>& f,
                                            const std::vector<int>& targets) {
  std::vector<Tensor<T>> dists;
  dists.reserve(targets.size());
  auto state = f.initial;
  int prev = Vocabulary::kBos;
  for (int y : targets) {
    auto out = model.step(prev, state, f.memory);
    dists.push_back(out.dist);
    state = out.state;
    prev = y;
  }
  return dists;
}

/// ℒ = ℒ_s + ℒ_NLL over one pair, with disabled terms dropped.
template <typename T>
LossBreakdown<T> total_loss(const MalModel<T>& model, const TrainingPair& pair, const Switches& sw) {
  auto f = model.forward_source(pair.source_ids, pair.content_mask, sw);
  auto nll = nll_loss(teacher_forced_dists(model, f, pair.target_ids), pair.target_ids);
  LossBreakdown<T> out;
  out.nll = static_cast<double>(nll.item());
  out.target_tokens = pair.target_ids.size();
  if (sw.salience_loss) {
    auto ls = salience_loss(f.encoder.r_hat, pair.salience_labels);
    out.salience = static_cast<double>(ls.item());
    out.total = add(ls, nll);
  } else {
    out.total = nll;
  }
  return out;
}

struct AdadeltaOptions {
  double rho = 0.95;
  double eps = 1e-6;
};

/// Per-parameter running averages E[g²] and E[Δx²], zero-initialized.
template <typename T>
class Adadelta {
 public:
  explicit Adadelta(const ParamStore<T>& params, AdadeltaOptions opt = {}) : opt_(opt) {
    for (const auto& e : params.entries()) {
      sq_grad_.emplace_back(e.tensor.size(), T(0));
      sq_delta_.emplace_back(e.tensor.size(), T(0));
    }
  }

  /// Applies one update from the gradients currently stored on `params`:
  ///   E[g²] ← ρE[g²] + (1−ρ)g²
  ///   Δ = −sqrt(E[Δx²] + ε) / sqrt(E[g²] + ε) · g
  ///   E[Δx²] ← ρE[Δx²] + (1−ρ)Δ²
  ///   θ ← θ + Δ
  /// Throws NonFiniteError naming the parameter before changing anything if
  /// any gradient is not finite.
  void step(ParamStore<T>& params) {
    auto& entries = params.entries();
    if (entries.size() != sq_grad_.size()) throw Error("optimizer state does not match parameter store");
    for (const auto& e : entries) {
      for (T g : e.tensor.grad()) {
        if (!std::isfinite(g)) throw NonFiniteError("non-finite gradient in parameter " + e.name);
      }
    }
    const T rho = static_cast<T>(opt_.rho);
    const T eps = static_cast<T>(opt_.eps);
    for (std::size_t p = 0; p < entries.size(); ++p) {
      auto& t = entries[p].tensor;
      // A parameter outside this step's graph has gradient zero.
      auto g = t.mutable_grad();
      auto theta = t.mutable_data();
      auto& eg = sq_grad_[p];
      auto& ed = sq_delta_[p];
      for (std::size_t i = 0; i < theta.size(); ++i) {
        eg[i] = rho * eg[i] + (T(1) - rho) * g[i] * g[i];
        const T delta = -std::sqrt(ed[i] + eps) / std::sqrt(eg[i] + eps) * g[i];
        ed[i] = rho * ed[i] + (T(1) - rho) * delta * delta;
        theta[i] += delta;
      }
    }
  }

  const std::vector<std::vector<T>>& sq_grad() const { return sq_grad_; }
  const std::vector<std::vector<T>>& sq_delta() const { return sq_delta_; }

 private:
  AdadeltaOptions opt_;
  std::vector<std::vector<T>> sq_grad_;
  std::vector<std::vector<T>> sq_delta_;
};

/// Rescales all gradients so their global L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
template <typename T>
double clip_global_norm(ParamStore<T>& params, double max_norm) {
  double sq = 0.0;
  for (const auto& e : params.entries())
    for (T g : e.tensor.grad()) sq += static_cast<double>(g) * static_cast<double>(g);
  const double norm = std::sqrt(sq);
  if (norm > max_norm) {
    const T factor = static_cast<T>(max_norm / norm);
    for (auto& e : params.entries()) {
      if (!e.tensor.has_grad()) continue;
      for (T& g : e.tensor.mutable_grad()) g *= factor;
    }
  }
  return norm;
}

struct TrainConfig {
  std::size_t epochs = 10;
  std::uint64_t seed = 1;
  bool shuffle = true;
  Switches switches;
  double clip_norm = 5.0;
  std::size_t checkpoint_interval = 0;  // epochs; 0 disables
  AdadeltaOptions adadelta;
};

struct EpochLoss {
  std::size_t epoch = 0;  // 1-based
  double mean_salience = 0.0;
  double mean_nll = 0.0;
  double mean_total = 0.0;
  std::size_t updates = 0;
  std::size_t target_tokens = 0;
};

/// Tab-separated epoch, mean ℒ_s, mean ℒ_NLL, mean ℒ.
inline void write_loss_line(std::ostream& out, const EpochLoss& e) {
  const auto old = out.precision(9);
  out << e.epoch << '\t' << e.mean_salience << '\t' << e.mean_nll << '\t' << e.mean_total << '\n';
  out.precision(old);
}

struct TrainHooks {
  // Called after every epoch; returning false stops training.
  std::function<bool(const EpochLoss&)> on_epoch;
  std::function<void(std::size_t epoch)> on_checkpoint;
  // Called after every parameter update with the running update count.
  std::function<void(std::size_t update)> on_update;
};

/// Per-example Adadelta training. Each update zeroes the gradients, runs
/// total_loss, backpropagates, clips, and steps. Returns one entry per epoch.
template <typename T>
std::vector<EpochLoss> train(MalModel<T>& model, const std::vector<TrainingPair>& corpus, const TrainConfig& cfg,
                             const TrainHooks& hooks = {}) {
  if (corpus.empty()) throw EmptyInputError("train: empty corpus");
  if (!(cfg.clip_norm > 0.0)) throw Error("train: clip norm must be positive");
  model.check_switches(cfg.switches);
  Adadelta<T> opt(model.params(), cfg.adadelta);
  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<EpochLoss> log;
  std::size_t updates = 0;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    if (cfg.shuffle) {
      // Fisher-Yates with an explicit draw so the order is library-independent.
      for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng() % i]);
    }
    EpochLoss e;
    e.epoch = epoch;
    for (std::size_t idx : order) {
      model.params().zero_grad();
      auto loss = total_loss(model, corpus[idx], cfg.switches);
      loss.total.backward();
      clip_global_norm(model.params(), cfg.clip_norm);
      opt.step(model.params());
      e.mean_salience += loss.salience;
      e.mean_nll += loss.nll;
      e.mean_total += static_cast<double>(loss.total.item());
      e.target_tokens += loss.target_tokens;
      ++e.updates;
      ++updates;
      if (hooks.on_update) hooks.on_update(updates);
    }
    const auto n = static_cast<double>(e.updates);
    e.mean_salience /= n;
    e.mean_nll /= n;
    e.mean_total /= n;
    log.push_back(e);
    if (cfg.checkpoint_interval && epoch % cfg.checkpoint_interval == 0 && hooks.on_checkpoint) {
      hooks.on_checkpoint(epoch);
    }
    if (hooks.on_epoch && !hooks.on_epoch(e)) break;
  }
  model.params().zero_grad();
  return log;
}

/// Corpus NLL divided by the number of target tokens, without gradients.
template <typename T>
double per_token_nll(const MalModel<T>& model, const std::vector<TrainingPair>& corpus, const Switches& sw) {
  NoGradGuard no_grad;
  double nll = 0.0;
  std::size_t tokens = 0;
  for (const auto& pair : corpus) {
    Switches s = sw;
    s.salience_loss = false;
    auto l = total_loss(model, pair, s);
    nll += l.nll;
    tokens += l.target_tokens;
  }
  return tokens ? nll / static_cast<double>(tokens) : 0.0;
}

}  // namespace mal
