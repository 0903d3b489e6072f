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

#include "mal/beam_search.hpp"
#include "mal/corpus.hpp"
#include "mal/decoder.hpp"
#include "mal/encoder.hpp"
#include "mal/graph_salience.hpp"
#include "mal/param_store.hpp"

namespace mal {

struct ModelConfig {
  std::size_t vocab_size = 0;
  std::size_t k_e = 64;
  std::size_t k_h = 64;
  // Register the parameters of the supervised salience branch (self-attention,
  // salience head, W_cs) and of the word-graph branch (W_p, W_cu). A model
  // with both off is the plain attentional encoder-decoder.
  bool supervised_branch = true;
  bool graph_branch = true;
  bool tie_embeddings = false;
  std::uint64_t seed = 1;
};

/// Runtime switches selecting the enabled loss terms and decoder contexts.
/// {use_cs, use_cu} = {off, off}, {on, off}, {off, on}, {on, on} give the
/// seq2seq, +SuAtt, +UnAtt and +MAL configurations.
struct Switches {
  bool salience_loss = true;
  bool use_cs = true;
  bool use_cu = true;
  bool stop_cs_gradient = false;
  double damping = kDefaultDamping;

  bool needs_salience() const { return salience_loss || use_cs; }
};

template <typename T>
struct SourceForward {
  Tensor<T> embeddings;  // X, [m×k_e]
  EncoderOutput<T> encoder;
  std::optional<GraphSalience<T>> graph;
  DecoderMemory<T> memory;
  DecoderState<T> initial;
};

template <typename T>
class MalModel {
 public:
  explicit MalModel(const ModelConfig& cfg) : cfg_(cfg) {
    if (cfg.vocab_size <= static_cast<std::size_t>(Vocabulary::kEos)) throw Error("vocabulary too small");
    if (cfg.k_e == 0 || cfg.k_h == 0) throw Error("model dimensions must be positive");
    const auto s = cfg.seed;
    const std::size_t ke = cfg.k_e, kh = cfg.k_h, ky = cfg.vocab_size;
    EncoderConfig ec{ke, kh};
    enc_embed_ = params_.add("enc.embed", {ky, ke}, s);
    fwd_ = GruParams<T>::create(params_, "enc.fwd", ke, kh, s);
    bwd_ = GruParams<T>::create(params_, "enc.bwd", ke, kh, s);
    if (cfg.supervised_branch) {
      self_ = SelfAttentionParams<T>::create(params_, "enc.self", kh, s);
      head_ = SalienceHeadParams<T>::create(params_, "sal", ec, s);
    }
    if (cfg.graph_branch) w_p_ = params_.add("graph.W_p", {ke, ke}, s);
    dec_.embed = cfg.tie_embeddings ? enc_embed_ : params_.add("dec.embed", {ky, ke}, s);
    dec_.gru1 = GruParams<T>::create(params_, "dec.gru1", ke, kh, s);
    dec_.gru2 = GruParams<T>::create(params_, "dec.gru2", ke + 2 * kh, kh, s);
    dec_.w_bridge = params_.add("dec.bridge.W", {kh, 2 * kh}, s);
    dec_.b_bridge = params_.add("dec.bridge.b", {kh}, s);
    dec_.w_att_dec = params_.add("dec.att.W_dec", {kh, kh}, s);
    dec_.w_att_enc = params_.add("dec.att.W_enc", {kh, 2 * kh}, s);
    dec_.b_att = params_.add("dec.att.b", {kh}, s);
    dec_.v_att = params_.add("dec.att.v", {1, kh}, s);
    dec_.w_fuse_h = params_.add("dec.fuse.W_h", {kh, kh}, s);
    if (cfg.supervised_branch) dec_.w_fuse_cs = params_.add("dec.fuse.W_cs", {kh, 2 * kh}, s);
    if (cfg.graph_branch) dec_.w_fuse_cu = params_.add("dec.fuse.W_cu", {kh, ke}, s);
    dec_.b_fuse = params_.add("dec.fuse.b", {kh}, s);
    dec_.w_out = params_.add("dec.out.W", {ky, kh}, s);
    dec_.b_out = params_.add("dec.out.b", {ky}, s);
  }

  MalModel(const MalModel&) = delete;
  MalModel& operator=(const MalModel&) = delete;
  MalModel(MalModel&&) noexcept = default;
  MalModel& operator=(MalModel&&) noexcept = default;

  const ModelConfig& config() const { return cfg_; }
  ParamStore<T>& params() { return params_; }
  const ParamStore<T>& params() const { return params_; }
  const DecoderParams<T>& decoder() const { return dec_; }
  const Tensor<T>& graph_weights() const { return w_p_; }

  void check_switches(const Switches& sw) const {
    if (sw.needs_salience() && !cfg_.supervised_branch) {
      throw Error("model has no supervised salience branch; disable the salience loss and c_s");
    }
    if (sw.use_cu && !cfg_.graph_branch) throw Error("model has no word-graph branch; disable c_u");
  }

  /// Encoder pass. The self-attention and salience head run only when asked.
  EncoderOutput<T> encode(const Tensor<T>& embeddings, bool with_salience,
                          std::optional<std::vector<bool>> mask = std::nullopt) const {
    EncoderOutput<T> out;
    out.length = embeddings.rows();
    out.states = encode_bidirectional(embeddings, fwd_, bwd_);
    if (with_salience) {
      auto sa = self_attention(out.states, self_);
      out.self_context = sa.context;
      out.revised = sa.revised;
      out.r_hat = predict_salience(embeddings, out.states, sa.context, sa.revised, head_);
      out.a_s = supervised_attention(out.r_hat, std::move(mask));
      out.c_s = supervised_context(out.a_s, out.states);
    }
    return out;
  }

  Tensor<T> embed_source(const std::vector<int>& source_ids) const {
    if (source_ids.empty()) throw EmptyInputError("empty source sequence");
    return gather_rows(enc_embed_, std::span<const int>(source_ids));
  }

  /// Source side of the network: encoder, optional salience branches and the
  /// decoder's initial state and memory.
  SourceForward<T> forward_source(const std::vector<int>& source_ids, const std::vector<bool>& content,
                                  const Switches& sw) const {
    check_switches(sw);
    SourceForward<T> f;
    f.embeddings = embed_source(source_ids);
    f.encoder = encode(f.embeddings, sw.needs_salience());
    Tensor<T> c_s, c_u;
    if (sw.use_cs) {
      c_s = sw.stop_cs_gradient ? supervised_context(detach(f.encoder.a_s), f.encoder.states) : f.encoder.c_s;
    }
    if (sw.use_cu) {
      f.graph = graph_salience(f.embeddings, w_p_, graph_mask(content, source_ids.size()), sw.damping);
      c_u = f.graph->context;
    }
    f.memory = make_memory(f.encoder.states, c_s, c_u, dec_);
    f.initial = init_decoder_state(f.encoder.states, dec_);
    return f;
  }

  StepOutput<T> step(int prev, const DecoderState<T>& state, const DecoderMemory<T>& mem) const {
    return decode_step(prev, state, mem, dec_);
  }

  /// Beam-search generation; beam 1 is greedy decoding.
  BeamResult generate(const std::vector<int>& source_ids, const std::vector<bool>& content, const Switches& sw,
                      std::size_t beam, std::size_t max_len) const {
    NoGradGuard no_grad;
    auto f = forward_source(source_ids, content, sw);
    const auto& mem = f.memory;
    auto stepper = [&](const DecoderState<T>& st, int prev) {
      auto out = step(prev, st, mem);
      return std::make_pair(log_softmax(out.logits.data()), out.state);
    };
    BeamConfig bc{beam, max_len, Vocabulary::kBos, Vocabulary::kEos};
    return beam_search(stepper, f.initial, bc);
  }

  /// Content mask for the word graph. A source without any content word
  /// uses every position as a vertex.
  static std::vector<bool> graph_mask(const std::vector<bool>& content, std::size_t length) {
    if (content.size() != length) throw DimensionError("content mask length differs from source length");
    for (bool c : content)
      if (c) return content;
    return std::vector<bool>(length, true);
  }

 private:
  ModelConfig cfg_;
  ParamStore<T> params_;
  Tensor<T> enc_embed_;
  GruParams<T> fwd_, bwd_;
  SelfAttentionParams<T> self_;
  SalienceHeadParams<T> head_;
  Tensor<T> w_p_;
  DecoderParams<T> dec_;
};

}  // namespace mal
