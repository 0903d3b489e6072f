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
#include <string>

#include "mal/encoder.hpp"
#include "mal/ops.hpp"
#include "mal/param_store.hpp"

namespace mal {

template <typename T>
struct DecoderParams {
  Tensor<T> embed;                         // [k_y×k_e]
  GruParams<T> gru1;                       // input k_e
  GruParams<T> gru2;                       // input k_e + 2k_h
  Tensor<T> w_bridge, b_bridge;            // 2k_h -> k_h
  Tensor<T> w_att_dec, w_att_enc, b_att, v_att;
  Tensor<T> w_fuse_h, w_fuse_cs, w_fuse_cu, b_fuse;  // w_fuse_cs / w_fuse_cu may be undefined
  Tensor<T> w_out, b_out;                  // k_h -> k_y

  std::size_t vocab_size() const { return b_out.size(); }
};

template <typename T>
struct DecoderState {
  Tensor<T> h1;
  Tensor<T> h2;
};

/// Per-source quantities reused at every decoding step.
template <typename T>
struct DecoderMemory {
  Tensor<T> states;  // H, [T×2k_h]
  Tensor<T> keys;    // H·W_encᵀ, [T×k_h]
  Tensor<T> c_s;     // optional supervised context [2k_h]
  Tensor<T> c_u;     // optional unsupervised context [k_e]
};

template <typename T>
DecoderMemory<T> make_memory(const Tensor<T>& states, const Tensor<T>& c_s, const Tensor<T>& c_u,
                             const DecoderParams<T>& p) {
  DecoderMemory<T> mem;
  mem.states = states;
  mem.keys = matmul(states, transpose(p.w_att_enc));
  if (c_s.defined()) {
    if (!p.w_fuse_cs.defined()) throw Error("decoder built without a supervised-context input");
    mem.c_s = c_s;
  }
  if (c_u.defined()) {
    if (!p.w_fuse_cu.defined()) throw Error("decoder built without an unsupervised-context input");
    mem.c_u = c_u;
  }
  return mem;
}

/// Both layers start from tanh(W_bridge · mean_t(h_t) + b_bridge).
template <typename T>
DecoderState<T> init_decoder_state(const Tensor<T>& states, const DecoderParams<T>& p) {
  if (states.rank() != 2) throw DimensionError("init_decoder_state: states must be a matrix");
  auto h = tanh(add(matvec(p.w_bridge, mean_rows(states)), p.b_bridge));
  return {h, h};
}

template <typename T>
struct AttentionResult {
  Tensor<T> weights;  // a_d, [T]
  Tensor<T> context;  // c_d, [2k_h]
};

/// e_j = vᵀ tanh(W_dec h1 + W_enc h_j + b), a_d = softmax(e), c_d = Hᵀ a_d.
template <typename T>
AttentionResult<T> decoder_attention(const Tensor<T>& h1, const DecoderMemory<T>& mem, const DecoderParams<T>& p) {
  auto query = add(matvec(p.w_att_dec, h1), p.b_att);
  AttentionResult<T> out;
  out.weights = softmax(additive_scores(mem.keys, query, p.v_att));
  out.context = attention_context(out.weights, mem.states);
  return out;
}

template <typename T>
struct StepOutput {
  Tensor<T> logits;     // [k_y]
  Tensor<T> dist;       // softmax(logits)
  DecoderState<T> state;
  Tensor<T> attention;  // a_d
};

/// One decoder step. Layer 1 reads the previous token, attention reads the new
/// layer-1 state, layer 2 reads [embedding ‖ c_d]. The fusion
///   h_a = tanh(W_h h2 + W_cs c_s + W_cu c_u + b)
/// drops the terms of absent contexts.
template <typename T>
StepOutput<T> decode_step(int y_prev, const DecoderState<T>& state, const DecoderMemory<T>& mem,
                          const DecoderParams<T>& p) {
  if (y_prev < 0 || static_cast<std::size_t>(y_prev) >= p.embed.rows()) {
    throw VocabularyRangeError("decode_step: token id " + std::to_string(y_prev) + " outside vocabulary of " +
                               std::to_string(p.embed.rows()));
  }
  auto y = row(p.embed, static_cast<std::size_t>(y_prev));
  StepOutput<T> out;
  out.state.h1 = gru_cell(y, state.h1, p.gru1);
  auto att = decoder_attention(out.state.h1, mem, p);
  out.attention = att.weights;
  out.state.h2 = gru_cell(concat(y, att.context), state.h2, p.gru2);
  auto fused = matvec(p.w_fuse_h, out.state.h2);
  if (mem.c_s.defined()) fused = add(fused, matvec(p.w_fuse_cs, mem.c_s));
  if (mem.c_u.defined()) fused = add(fused, matvec(p.w_fuse_cu, mem.c_u));
  auto h_a = tanh(add(fused, p.b_fuse));
  out.logits = add(matvec(p.w_out, h_a), p.b_out);
  out.dist = softmax(out.logits);
  return out;
}

}  // namespace mal
