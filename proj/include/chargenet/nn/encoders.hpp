#pragma once

#include <optional>
#include <string>
#include <vector>

#include "chargenet/tensor/tape.hpp"

namespace chargenet::nn {

/// Gate weights of one GRU direction.
///   z = sigmoid(W_z x + U_z h + b_z)
///   r = sigmoid(W_r x + U_r h + b_r)
///   c = tanh(W_h x + U_h (r * h) + b_h)
///   h' = (1 - z) * h + z * c
struct GruParams {
  std::size_t input_dim = 0;
  std::size_t hidden_dim = 0;
  Parameter* W_z = nullptr;
  Parameter* U_z = nullptr;
  Parameter* b_z = nullptr;
  Parameter* W_r = nullptr;
  Parameter* U_r = nullptr;
  Parameter* b_r = nullptr;
  Parameter* W_h = nullptr;
  Parameter* U_h = nullptr;
  Parameter* b_h = nullptr;

  static GruParams create(ParameterStore& store, const std::string& prefix, std::size_t input_dim,
                          std::size_t hidden_dim) {
    if (input_dim == 0 || hidden_dim == 0) throw ValidationError("GRU dimensions must be positive");
    GruParams p;
    p.input_dim = input_dim;
    p.hidden_dim = hidden_dim;
    p.W_z = &store.add(prefix + ".W_z", {hidden_dim, input_dim});
    p.U_z = &store.add(prefix + ".U_z", {hidden_dim, hidden_dim});
    p.b_z = &store.add(prefix + ".b_z", {hidden_dim}, InitKind::Zero);
    p.W_r = &store.add(prefix + ".W_r", {hidden_dim, input_dim});
    p.U_r = &store.add(prefix + ".U_r", {hidden_dim, hidden_dim});
    p.b_r = &store.add(prefix + ".b_r", {hidden_dim}, InitKind::Zero);
    p.W_h = &store.add(prefix + ".W_h", {hidden_dim, input_dim});
    p.U_h = &store.add(prefix + ".U_h", {hidden_dim, hidden_dim});
    p.b_h = &store.add(prefix + ".b_h", {hidden_dim}, InitKind::Zero);
    return p;
  }

  std::vector<Parameter*> parameters() const { return {W_z, U_z, b_z, W_r, U_r, b_r, W_h, U_h, b_h}; }
};

struct BiGruParams {
  GruParams forward;
  GruParams backward;

  static BiGruParams create(ParameterStore& store, const std::string& prefix, std::size_t input_dim,
                            std::size_t hidden_dim) {
    return {GruParams::create(store, prefix + ".fwd", input_dim, hidden_dim),
            GruParams::create(store, prefix + ".bwd", input_dim, hidden_dim)};
  }

  std::size_t input_dim() const { return forward.input_dim; }
  std::size_t output_dim() const { return forward.hidden_dim + backward.hidden_dim; }

  std::vector<Parameter*> parameters() const {
    auto out = forward.parameters();
    auto b = backward.parameters();
    out.insert(out.end(), b.begin(), b.end());
    return out;
  }
};

/// Projection W (square, state_dim x state_dim) and an optional global
/// context vector. Without `u` the caller supplies a context per call.
struct AttentivePoolParams {
  Parameter* W = nullptr;
  Parameter* u = nullptr;

  static AttentivePoolParams create(ParameterStore& store, const std::string& prefix, std::size_t state_dim,
                                    bool global_context) {
    AttentivePoolParams p;
    p.W = &store.add(prefix + ".W", {state_dim, state_dim});
    if (global_context) p.u = &store.add(prefix + ".u", {state_dim});
    return p;
  }

  std::vector<Parameter*> parameters() const {
    if (u) return {W, u};
    return {W};
  }
};

struct DocEncoderParams {
  BiGruParams word_gru;
  AttentivePoolParams word_pool;
  BiGruParams sentence_gru;
  AttentivePoolParams sentence_pool;

  static DocEncoderParams create(ParameterStore& store, const std::string& prefix, std::size_t input_dim,
                                 std::size_t hidden_dim, bool global_contexts) {
    DocEncoderParams p;
    p.word_gru = BiGruParams::create(store, prefix + ".word_gru", input_dim, hidden_dim);
    p.word_pool = AttentivePoolParams::create(store, prefix + ".word_att", 2 * hidden_dim, global_contexts);
    p.sentence_gru = BiGruParams::create(store, prefix + ".sent_gru", 2 * hidden_dim, hidden_dim);
    p.sentence_pool = AttentivePoolParams::create(store, prefix + ".sent_att", 2 * hidden_dim, global_contexts);
    return p;
  }

  std::size_t output_dim() const { return sentence_gru.output_dim(); }

  std::vector<Parameter*> parameters() const {
    std::vector<Parameter*> out;
    for (auto* group : {&word_gru, &sentence_gru}) {
      auto ps = group->parameters();
      out.insert(out.end(), ps.begin(), ps.end());
    }
    for (auto* pool : {&word_pool, &sentence_pool}) {
      auto ps = pool->parameters();
      out.insert(out.end(), ps.begin(), ps.end());
    }
    return out;
  }
};

inline Var affine(Tape& tape, Parameter& W, Var x, Parameter& b) {
  return tape.add(tape.matmul(tape.param(W), x), tape.param(b));
}

inline Var gru_step(Tape& tape, Var x, Var h_prev, const GruParams& p) {
  const Tensor& xv = tape.value(x);
  const Tensor& hv = tape.value(h_prev);
  if (xv.rank() != 1 || xv.size() != p.input_dim || hv.rank() != 1 || hv.size() != p.hidden_dim) {
    throw ShapeError("gru_step expects x " + shape_string({p.input_dim}) + " and h " +
                     shape_string({p.hidden_dim}) + ", got " + shape_string(xv.shape()) + " and " +
                     shape_string(hv.shape()));
  }
  return tape.gru_cell(x, h_prev,
                       {tape.param(*p.W_z), tape.param(*p.U_z), tape.param(*p.b_z), tape.param(*p.W_r),
                        tape.param(*p.U_r), tape.param(*p.b_r), tape.param(*p.W_h), tape.param(*p.U_h),
                        tape.param(*p.b_h)});
}

/// Runs both directions from zero initial states; output[t] = [fwd_t, bwd_t].
inline std::vector<Var> bigru_encode(Tape& tape, const std::vector<Var>& sequence, const BiGruParams& p) {
  if (sequence.empty()) throw DomainError("bigru_encode over an empty sequence");
  if (p.forward.hidden_dim != p.backward.hidden_dim) throw ShapeError("Bi-GRU directions differ in hidden size");
  const std::size_t T = sequence.size();
  std::vector<Var> fwd(T), bwd(T);
  Var h = tape.constant(Tensor({p.forward.hidden_dim}));
  for (std::size_t t = 0; t < T; ++t) fwd[t] = h = gru_step(tape, sequence[t], h, p.forward);
  h = tape.constant(Tensor({p.backward.hidden_dim}));
  for (std::size_t t = T; t-- > 0;) bwd[t] = h = gru_step(tape, sequence[t], h, p.backward);
  std::vector<Var> out(T);
  for (std::size_t t = 0; t < T; ++t) out[t] = tape.concat({fwd[t], bwd[t]});
  return out;
}

struct PoolResult {
  Var g;
  Var alpha;
};

/// The context-independent half of attentive pooling: the stacked states H
/// and their keys tanh(H W^T). Keys can be reused across contexts.
struct PoolKeys {
  Var states;
  Var keys;
  std::size_t length = 0;
};

inline PoolKeys prepare_pool(Tape& tape, const std::vector<Var>& states, Parameter& W) {
  if (states.empty()) throw DomainError("attentive_pool over an empty state list");
  Var H = tape.stack_rows(states);
  return {H, tape.tanh(tape.matmul_transposed(H, tape.param(W))), states.size()};
}

/// alpha = softmax(keys u), g = H^T alpha.
inline PoolResult pool_with_context(Tape& tape, const PoolKeys& keys, Var u) {
  Var alpha = tape.softmax(tape.matmul(keys.keys, u));
  return {tape.matvec_transposed(keys.states, alpha), alpha};
}

/// alpha_t = softmax_t(tanh(W h_t) . u), g = sum_t alpha_t h_t.
inline PoolResult attentive_pool(Tape& tape, const std::vector<Var>& states, Parameter& W, Var u) {
  return pool_with_context(tape, prepare_pool(tape, states, W), u);
}

inline PoolResult attentive_pool(Tape& tape, const std::vector<Var>& states, const AttentivePoolParams& p,
                                 std::optional<Var> dynamic_context = std::nullopt) {
  if (dynamic_context) return attentive_pool(tape, states, *p.W, *dynamic_context);
  if (!p.u) throw StateError("attentive_pool without a global context requires a dynamic one");
  return attentive_pool(tape, states, *p.W, tape.param(*p.u));
}

struct DocEncoding {
  Var d;
  std::vector<Var> word_attention;
  Var sentence_attention;
};

/// Word-level Bi-GRU + pooling per sentence, then sentence-level Bi-GRU +
/// pooling over the sentence vectors.
inline DocEncoding encode_document(Tape& tape, const std::vector<std::vector<Var>>& sentences,
                                   const DocEncoderParams& p, Var word_context, Var sentence_context) {
  if (sentences.empty()) throw DomainError("encode_document over an empty document");
  DocEncoding out;
  std::vector<Var> sentence_vectors;
  sentence_vectors.reserve(sentences.size());
  for (const auto& words : sentences) {
    if (words.empty()) throw DomainError("encode_document: empty sentence");
    auto states = bigru_encode(tape, words, p.word_gru);
    auto pooled = attentive_pool(tape, states, *p.word_pool.W, word_context);
    sentence_vectors.push_back(pooled.g);
    out.word_attention.push_back(pooled.alpha);
  }
  auto states = bigru_encode(tape, sentence_vectors, p.sentence_gru);
  auto pooled = attentive_pool(tape, states, *p.sentence_pool.W, sentence_context);
  out.d = pooled.g;
  out.sentence_attention = pooled.alpha;
  return out;
}

/// Variant using the encoder's own global context vectors.
inline DocEncoding encode_document(Tape& tape, const std::vector<std::vector<Var>>& sentences,
                                   const DocEncoderParams& p) {
  if (!p.word_pool.u || !p.sentence_pool.u) throw StateError("document encoder has no global context vectors");
  return encode_document(tape, sentences, p, tape.param(*p.word_pool.u), tape.param(*p.sentence_pool.u));
}

}  // namespace chargenet::nn
