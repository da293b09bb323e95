#pragma once

#include <algorithm>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "chargenet/corpus/dataset.hpp"
#include "chargenet/corpus/tokenizer.hpp"
#include "chargenet/corpus/types.hpp"
#include "chargenet/extract/bank.hpp"
#include "chargenet/model/config.hpp"
#include "chargenet/model/vocab.hpp"
#include "chargenet/nn/encoders.hpp"
#include "chargenet/tensor/tape.hpp"

namespace chargenet::model {

using corpus::ArticleId;

/// Distribution over L charges: 1/m on each of the m positive labels.
struct ChargeTarget {
  Tensor y;
  std::vector<int> positives;
  std::size_t m = 0;
};

inline ChargeTarget charge_target(const std::vector<int>& positives, std::size_t n_charges) {
  std::vector<int> labels(positives);
  std::sort(labels.begin(), labels.end());
  labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
  if (labels.empty()) throw DomainError("charge_target: empty positive set");
  if (labels.size() > n_charges) throw DomainError("charge_target: more positives than charges");
  Tensor y({n_charges});
  for (int l : labels) {
    if (l < 0 || static_cast<std::size_t>(l) >= n_charges) {
      throw DomainError("charge_target: label " + std::to_string(l) + " outside [0, " + std::to_string(n_charges) + ")");
    }
    y[static_cast<std::size_t>(l)] = 1.0 / static_cast<double>(labels.size());
  }
  return {std::move(y), labels, labels.size()};
}

/// t_j = 1/k' on the slots holding gold articles, where k' counts them.
struct AttentionTarget {
  Tensor t;
  std::size_t k_prime = 0;
};

/// Absent when no slot holds a gold article.
inline std::optional<AttentionTarget> attention_target(const std::vector<ArticleId>& slots,
                                                       const std::vector<ArticleId>& gold) {
  if (slots.empty()) throw DomainError("attention_target over no slots");
  std::size_t k_prime = 0;
  for (const auto& a : slots) k_prime += std::find(gold.begin(), gold.end(), a) != gold.end();
  if (k_prime == 0) return std::nullopt;
  Tensor t({slots.size()});
  for (std::size_t j = 0; j < slots.size(); ++j) {
    if (std::find(gold.begin(), gold.end(), slots[j]) != gold.end()) t[j] = 1.0 / static_cast<double>(k_prime);
  }
  return AttentionTarget{std::move(t), k_prime};
}

/// CE(y, o) + beta * CE(t, alpha); the second term is left out entirely
/// when beta is 0 or there is no attention target.
inline Var joint_loss(Tape& tape, Var o, const Tensor& y, std::optional<Var> alpha,
                      const std::optional<AttentionTarget>& t, double beta) {
  Var loss = tape.cross_entropy(y, o);
  if (beta == 0.0 || !t || !alpha) return loss;
  return tape.add(loss, tape.scale(tape.cross_entropy(t->t, *alpha), beta));
}

inline double joint_loss(std::span<const double> o, std::span<const double> y, std::span<const double> alpha,
                         const std::optional<AttentionTarget>& t, double beta) {
  double loss = cross_entropy(y, o);
  if (beta == 0.0 || !t) return loss;
  return loss + beta * cross_entropy(t->t.data(), alpha);
}

/// {l : o_l > tau}, or {argmax o} (lowest index on ties) when that is empty.
inline std::vector<int> predict_charges(std::span<const double> o, double tau) {
  if (o.empty()) throw DomainError("predict over an empty distribution");
  std::vector<int> out;
  for (std::size_t l = 0; l < o.size(); ++l) {
    if (o[l] > tau) out.push_back(static_cast<int>(l));
  }
  if (out.empty()) out.push_back(static_cast<int>(std::max_element(o.begin(), o.end()) - o.begin()));
  return out;
}

/// u = W d_f + b.
inline Var dynamic_context(Tape& tape, Var d_f, Parameter& W, Parameter& b) {
  const Tensor& d = tape.value(d_f);
  if (W.value.rank() != 2 || d.rank() != 1 || W.value.cols() != d.size() || b.value.rank() != 1 ||
      b.value.size() != W.value.rows()) {
    throw ShapeError("dynamic_context: W " + shape_string(W.value.shape()) + ", d_f " + shape_string(d.shape()) +
                     ", b " + shape_string(b.value.shape()));
  }
  return nn::affine(tape, W, d_f, b);
}

/// Every trainable tensor of the joint model.
struct ModelParams {
  ParameterStore store;
  Parameter* word_emb = nullptr;
  Parameter* pos_emb = nullptr;
  nn::DocEncoderParams fact;
  std::optional<nn::DocEncoderParams> article;
  Parameter* W_w = nullptr;
  Parameter* b_w = nullptr;
  Parameter* W_s = nullptr;
  Parameter* b_s = nullptr;
  Parameter* W_d = nullptr;
  Parameter* b_d = nullptr;
  nn::BiGruParams aggregator_gru;
  nn::AttentivePoolParams aggregator_pool;
  Parameter* fc1_W = nullptr;
  Parameter* fc1_b = nullptr;
  Parameter* fc2_W = nullptr;
  Parameter* fc2_b = nullptr;
  Parameter* out_W = nullptr;
  Parameter* out_b = nullptr;

  static std::unique_ptr<ModelParams> create(const ModelConfig& c, std::size_t n_words, std::size_t n_pos,
                                             std::size_t n_charges) {
    c.validate();
    if (n_words == 0 || n_pos == 0 || n_charges == 0) throw ValidationError("vocabulary and charge sizes must be positive");
    auto p = std::make_unique<ModelParams>();
    auto& s = p->store;
    const std::size_t input = c.word_emb_dim + c.pos_emb_dim;
    const std::size_t state = 2 * c.gru_hidden;
    p->word_emb = &s.add("emb.word", {n_words, c.word_emb_dim});
    p->pos_emb = &s.add("emb.pos", {n_pos, c.pos_emb_dim});
    p->fact = nn::DocEncoderParams::create(s, "fact", input, c.gru_hidden, true);
    std::size_t fc_in = state;
    if (uses_articles(c.variant)) {
      if (c.tie_word_encoders) {
        nn::DocEncoderParams a;
        a.word_gru = p->fact.word_gru;
        a.word_pool = nn::AttentivePoolParams::create(s, "article.word_att", state, false);
        a.sentence_gru = nn::BiGruParams::create(s, "article.sent_gru", state, c.gru_hidden);
        a.sentence_pool = nn::AttentivePoolParams::create(s, "article.sent_att", state, false);
        p->article = a;
      } else {
        p->article = nn::DocEncoderParams::create(s, "article", input, c.gru_hidden, false);
      }
      p->W_w = &s.add("ctx.W_w", {state, state});
      p->b_w = &s.add("ctx.b_w", {state}, InitKind::Zero);
      p->W_s = &s.add("ctx.W_s", {state, state});
      p->b_s = &s.add("ctx.b_s", {state}, InitKind::Zero);
      p->W_d = &s.add("ctx.W_d", {state, state});
      p->b_d = &s.add("ctx.b_d", {state}, InitKind::Zero);
      p->aggregator_gru = nn::BiGruParams::create(s, "agg.gru", state, c.gru_hidden);
      p->aggregator_pool = nn::AttentivePoolParams::create(s, "agg.att", state, false);
      if (c.variant != Variant::ArtOnly) fc_in = 2 * state;
    }
    p->fc1_W = &s.add("fc1.W", {c.fc1_dim, fc_in});
    p->fc1_b = &s.add("fc1.b", {c.fc1_dim}, InitKind::Zero);
    p->fc2_W = &s.add("fc2.W", {c.fc2_dim, c.fc1_dim});
    p->fc2_b = &s.add("fc2.b", {c.fc2_dim}, InitKind::Zero);
    p->out_W = &s.add("out.W", {n_charges, c.fc2_dim});
    p->out_b = &s.add("out.b", {n_charges}, InitKind::Zero);
    return p;
  }
};

/// Token ids of one document: sentences of (word id, POS id).
using EncodedDoc = std::vector<std::vector<std::pair<std::size_t, std::size_t>>>;

/// A case mapped to ids, with its article slots already chosen.
struct EncodedCase {
  std::string id;
  EncodedDoc fact;
  std::vector<int> charges;
  std::vector<ArticleId> gold_articles;
  std::vector<ArticleId> slots;
  std::vector<double> slot_scores;
};

/// Graph handles of one forward pass. Article fields stay invalid/empty for
/// FactOnly.
struct ForwardTrace {
  Var d_f;
  std::vector<ArticleId> topk;
  std::vector<double> topk_scores;
  std::vector<Var> a;
  Var alpha;
  Var d_a;
  Var d_prime;
  Var o;
};

/// Word-level article encodings shared by every case on one tape. They do
/// not depend on the fact, so each article is encoded once per tape.
class ArticleCache {
 public:
  const std::vector<nn::PoolKeys>* find(const ArticleId& id) const {
    auto it = entries_.find(id);
    return it == entries_.end() ? nullptr : &it->second;
  }
  const std::vector<nn::PoolKeys>& insert(const ArticleId& id, std::vector<nn::PoolKeys> keys) {
    return entries_.emplace(id, std::move(keys)).first->second;
  }

 private:
  std::map<ArticleId, std::vector<nn::PoolKeys>> entries_;
};

struct CasePrediction {
  std::vector<int> charges;
  std::vector<double> probabilities;
  std::vector<ArticleId> articles;   // slot order
  std::vector<double> attention;     // aligned with `articles`
  std::vector<double> extractor_scores;

  /// Articles ordered by attention weight, ties to the earlier slot.
  std::vector<ArticleId> ranked_articles() const {
    std::vector<std::size_t> order(articles.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return attention[a] > attention[b]; });
    std::vector<ArticleId> out;
    for (auto i : order) out.push_back(articles[i]);
    return out;
  }
};

class ChargeModel {
 public:
  ChargeModel(ModelConfig config, Vocabulary words, Vocabulary pos, std::vector<std::string> charges,
              corpus::ArticleDb articles, std::shared_ptr<const extract::ExtractorBank> bank)
      : config_(std::move(config)),
        words_(std::move(words)),
        pos_(std::move(pos)),
        charges_(std::move(charges)),
        article_texts_(std::move(articles)),
        bank_(std::move(bank)),
        tau_(config_.tau) {
    config_.validate();
    if (charges_.empty()) throw ValidationError("model needs at least one charge");
    if (uses_extractor(config_.variant)) {
      if (!bank_) throw StateError("variant " + to_string(config_.variant) + " needs a trained extractor bank");
      if (config_.k > bank_->scorers().size()) {
        throw ValidationError("k = " + std::to_string(config_.k) + " exceeds the " +
                              std::to_string(bank_->scorers().size()) + " articles known to the extractor");
      }
      for (const auto& a : bank_->articles()) {
        if (!article_texts_.count(a)) throw ValidationError("article " + a.str() + " has no text in the article database");
      }
    }
    const corpus::SimpleTokenizer tokenizer;
    for (const auto& [id, text] : article_texts_) article_docs_[id] = encode(tokenizer.tokenize(text));
    params_ = ModelParams::create(config_, words_.size(), pos_.size(), charges_.size());
    Rng rng(config_.seed);
    params_->store.initialize(rng, config_.init_scale);
  }

  /// Builds word and POS vocabularies from the training facts and the
  /// article texts.
  static ChargeModel build(const ModelConfig& config, const std::vector<corpus::CaseRecord>& train,
                           std::vector<std::string> charges, corpus::ArticleDb articles,
                           std::shared_ptr<const extract::ExtractorBank> bank) {
    std::vector<std::string> word_stream, pos_stream;
    for (const auto& c : train) {
      for (const auto& s : c.fact) {
        for (const auto& t : s) {
          word_stream.push_back(t.word);
          pos_stream.push_back(t.pos);
        }
      }
    }
    const corpus::SimpleTokenizer tokenizer;
    for (const auto& [id, text] : articles) {
      for (const auto& s : tokenizer.tokenize(text)) {
        for (const auto& t : s) {
          word_stream.push_back(t.word);
          pos_stream.push_back(t.pos);
        }
      }
    }
    return ChargeModel(config, Vocabulary::build(word_stream), Vocabulary::build(pos_stream), std::move(charges),
                       std::move(articles), std::move(bank));
  }

  EncodedDoc encode(const std::vector<corpus::Sentence>& sentences) const {
    EncodedDoc out;
    for (const auto& s : sentences) {
      std::vector<std::pair<std::size_t, std::size_t>> ids;
      for (const auto& t : s) ids.emplace_back(words_.id(t.word), pos_.id(t.pos));
      if (!ids.empty()) out.push_back(std::move(ids));
    }
    return out;
  }

  /// Maps tokens to ids and fills the article slots: the extractor's top k,
  /// or the gold articles for FactGoldArt.
  EncodedCase prepare(const corpus::CaseRecord& c) const {
    EncodedCase e;
    e.id = c.id;
    e.fact = encode(c.fact);
    e.charges = c.charges;
    e.gold_articles = c.articles;
    if (config_.variant == Variant::FactGoldArt) {
      for (const auto& a : c.articles) {
        if (article_docs_.count(a)) e.slots.push_back(a);
      }
      if (e.slots.size() > config_.k) e.slots.resize(config_.k);
      e.slot_scores.assign(e.slots.size(), 0.0);
      if (e.slots.empty()) throw DomainError("case " + c.id + " has no gold article with known text");
    } else if (uses_extractor(config_.variant)) {
      for (const auto& x : bank_->extract_top_k(extract::case_tokens(c), config_.k)) {
        e.slots.push_back(x.article);
        e.slot_scores.push_back(x.score);
      }
    }
    return e;
  }

  std::vector<Var> embed_sentence(Tape& tape, const std::vector<std::pair<std::size_t, std::size_t>>& ids) const {
    std::vector<Var> out;
    out.reserve(ids.size());
    for (const auto& [w, p] : ids) out.push_back(tape.concat({tape.lookup(*params_->word_emb, w), tape.lookup(*params_->pos_emb, p)}));
    return out;
  }

  std::vector<std::vector<Var>> embed(Tape& tape, const EncodedDoc& doc) const {
    std::vector<std::vector<Var>> out;
    for (const auto& s : doc) out.push_back(embed_sentence(tape, s));
    return out;
  }

  /// Word-level Bi-GRU states and pooling keys of every sentence of an
  /// article, memoized in `cache`.
  const std::vector<nn::PoolKeys>& article_keys(Tape& tape, ArticleCache& cache, const ArticleId& id) const {
    if (const auto* hit = cache.find(id)) return *hit;
    auto it = article_docs_.find(id);
    if (it == article_docs_.end()) throw DomainError("article " + id.str() + " is not in the article database");
    if (it->second.empty()) throw DomainError("article " + id.str() + " has an empty text");
    std::vector<nn::PoolKeys> keys;
    for (const auto& s : it->second) {
      auto states = nn::bigru_encode(tape, embed_sentence(tape, s), params_->article->word_gru);
      keys.push_back(nn::prepare_pool(tape, states, *params_->article->word_pool.W));
    }
    return cache.insert(id, std::move(keys));
  }

  /// a_j for each slot, with word and sentence contexts generated from d_f.
  std::vector<Var> encode_articles(Tape& tape, ArticleCache& cache, const std::vector<ArticleId>& slots, Var d_f) const {
    if (!params_->article) throw StateError("variant " + to_string(config_.variant) + " has no article encoder");
    const Var u_aw = dynamic_context(tape, d_f, *params_->W_w, *params_->b_w);
    const Var u_as = dynamic_context(tape, d_f, *params_->W_s, *params_->b_s);
    std::vector<Var> out;
    for (const auto& id : slots) {
      std::vector<Var> sentence_vectors;
      for (const auto& k : article_keys(tape, cache, id)) sentence_vectors.push_back(nn::pool_with_context(tape, k, u_aw).g);
      auto states = nn::bigru_encode(tape, sentence_vectors, params_->article->sentence_gru);
      out.push_back(nn::attentive_pool(tape, states, *params_->article->sentence_pool.W, u_as).g);
    }
    return out;
  }

  /// Bi-GRU over the article embeddings, pooled with u_ad = W_d d_f + b_d.
  nn::PoolResult aggregate_articles(Tape& tape, const std::vector<Var>& a, Var d_f) const {
    if (a.empty()) throw DomainError("aggregate_articles over no articles");
    if (!params_->article) throw StateError("variant " + to_string(config_.variant) + " has no article aggregator");
    const Var u_ad = dynamic_context(tape, d_f, *params_->W_d, *params_->b_d);
    auto states = nn::bigru_encode(tape, a, params_->aggregator_gru);
    return nn::attentive_pool(tape, states, *params_->aggregator_pool.W, u_ad);
  }

  ForwardTrace forward(Tape& tape, ArticleCache& cache, const EncodedCase& c) const {
    if (c.fact.empty()) throw DomainError("case " + c.id + " has an empty fact description");
    ForwardTrace tr;
    tr.d_f = nn::encode_document(tape, embed(tape, c.fact), params_->fact).d;
    Var features = tr.d_f;
    if (uses_articles(config_.variant)) {
      if (c.slots.empty()) throw StateError("case " + c.id + " was prepared without article slots");
      tr.topk = c.slots;
      tr.topk_scores = c.slot_scores;
      tr.a = encode_articles(tape, cache, c.slots, tr.d_f);
      const auto pooled = aggregate_articles(tape, tr.a, tr.d_f);
      tr.d_a = pooled.g;
      tr.alpha = pooled.alpha;
      features = config_.variant == Variant::ArtOnly ? tr.d_a : tape.concat({tr.d_f, tr.d_a});
    }
    const Var h1 = tape.tanh(nn::affine(tape, *params_->fc1_W, features, *params_->fc1_b));
    tr.d_prime = tape.tanh(nn::affine(tape, *params_->fc2_W, h1, *params_->fc2_b));
    tr.o = tape.softmax(nn::affine(tape, *params_->out_W, tr.d_prime, *params_->out_b));
    return tr;
  }

  /// Per-case training loss of an already-run forward pass.
  Var case_loss(Tape& tape, const ForwardTrace& tr, const EncodedCase& c, double beta) const {
    const auto y = charge_target(c.charges, charges_.size());
    std::optional<AttentionTarget> t;
    if (tr.alpha.valid() && beta != 0.0) t = attention_target(tr.topk, c.gold_articles);
    return joint_loss(tape, tr.o, y.y, tr.alpha.valid() ? std::optional<Var>(tr.alpha) : std::nullopt, t, beta);
  }

  CasePrediction predict(const EncodedCase& c) const {
    Tape tape;
    ArticleCache cache;
    const auto tr = forward(tape, cache, c);
    CasePrediction p;
    p.probabilities = tape.value(tr.o).values();
    p.charges = predict_charges(p.probabilities, tau_);
    if (tr.alpha.valid()) {
      p.articles = tr.topk;
      p.attention = tape.value(tr.alpha).values();
      p.extractor_scores = tr.topk_scores;
    }
    return p;
  }

  CasePrediction predict(const corpus::CaseRecord& c) const { return predict(prepare(c)); }

  const ModelConfig& config() const { return config_; }
  ModelConfig& mutable_config() { return config_; }
  const Vocabulary& words() const { return words_; }
  const Vocabulary& pos_tags() const { return pos_; }
  const std::vector<std::string>& charges() const { return charges_; }
  const corpus::ArticleDb& article_texts() const { return article_texts_; }
  const std::shared_ptr<const extract::ExtractorBank>& bank() const { return bank_; }
  ModelParams& params() { return *params_; }
  const ModelParams& params() const { return *params_; }
  double tau() const { return tau_; }
  void set_tau(double tau) {
    if (!(tau > 0.0 && tau < 1.0)) throw ValidationError("tau must lie in (0, 1)");
    tau_ = tau;
  }

 private:
  ModelConfig config_;
  Vocabulary words_;
  Vocabulary pos_;
  std::vector<std::string> charges_;
  corpus::ArticleDb article_texts_;
  std::map<ArticleId, EncodedDoc> article_docs_;
  std::shared_ptr<const extract::ExtractorBank> bank_;
  std::unique_ptr<ModelParams> params_;
  double tau_;
};

}  // namespace chargenet::model
