#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "chargenet/core/errors.hpp"
#include "chargenet/core/log.hpp"
#include "chargenet/core/random.hpp"
#include "chargenet/corpus/types.hpp"
#include "chargenet/extract/chi_square.hpp"
#include "chargenet/extract/tfidf.hpp"

namespace chargenet::extract {

using corpus::ArticleId;

inline constexpr int kBankFormatVersion = 1;

struct ExtractorConfig {
  std::size_t feature_budget = 2000;
  std::size_t epochs = 100;
  double learning_rate = 0.1;  // step t uses learning_rate / sqrt(t)
  double l2 = 1e-4;
  std::size_t k = 20;
  std::uint64_t seed = 1;

  void validate() const {
    if (feature_budget == 0) throw ValidationError("feature budget must be positive");
    if (epochs == 0) throw ValidationError("extractor epochs must be positive");
    if (!(learning_rate > 0.0)) throw ValidationError("extractor learning rate must be positive");
    if (!(l2 >= 0.0)) throw ValidationError("extractor L2 weight must be non-negative");
    if (k == 0) throw ValidationError("k must be positive");
  }
};

/// w^T x + b over a fixed set of selected columns (ascending).
struct LinearScorer {
  ArticleId article;
  std::vector<std::uint32_t> features;
  std::vector<double> weights;
  double bias = 0.0;
  bool trained = false;

  double score(const SparseVector& x) const {
    if (!trained) return -std::numeric_limits<double>::infinity();
    double s = 0.0;
    std::size_t i = 0;
    for (const auto& [col, value] : x.entries) {
      while (i < features.size() && features[i] < col) ++i;
      if (i == features.size()) break;
      if (features[i] == col) s += weights[i] * value;
    }
    return s + bias;
  }
};

inline TokenList case_tokens(const corpus::CaseRecord& c) {
  TokenList out;
  out.reserve(c.token_count());
  for (const auto& s : c.fact) {
    for (const auto& t : s) out.push_back(t.word);
  }
  return out;
}

namespace detail {

inline std::uint64_t article_seed(std::uint64_t seed, const ArticleId& a) {
  std::uint64_t x = seed ^ (static_cast<std::uint64_t>(a.number) << 8 | static_cast<std::uint64_t>(a.sub));
  x ^= x >> 33;
  x *= 0xff51afd7ed558ccdULL;
  x ^= x >> 33;
  return x;
}

}  // namespace detail

/// One-vs-rest scorer for `article`: chi-square feature selection, then
/// stochastic sub-gradient descent on
///   l2/2 |w|^2 + hinge(y (w^T x + b))
/// with the weight kept as scale * v so the decay step stays O(1).
inline LinearScorer train_scorer(const ArticleId& article, const std::vector<SparseVector>& features,
                                 const std::vector<bool>& labels, std::size_t n_columns, const ExtractorConfig& config) {
  config.validate();
  LinearScorer scorer;
  scorer.article = article;
  const auto positives = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), true));
  if (features.size() != labels.size()) throw ShapeError("train_scorer: features and labels differ in length");
  if (positives == 0) {
    log::warn("article " + article.str() + " has no positive training case; its scorer is skipped");
    return scorer;
  }
  scorer.trained = true;
  if (positives == labels.size()) {
    log::warn("article " + article.str() + " is relevant to every training case; its scorer is constant");
    scorer.bias = 1.0;
    return scorer;
  }

  scorer.features = chi_square_select(features, labels, config.feature_budget, n_columns);
  std::sort(scorer.features.begin(), scorer.features.end());
  std::vector<std::int64_t> slot(n_columns, -1);
  for (std::size_t i = 0; i < scorer.features.size(); ++i) slot[scorer.features[i]] = static_cast<std::int64_t>(i);

  std::vector<std::vector<std::pair<std::uint32_t, double>>> xs(features.size());
  for (std::size_t d = 0; d < features.size(); ++d) {
    for (const auto& [col, value] : features[d].entries) {
      if (slot[col] >= 0) xs[d].emplace_back(static_cast<std::uint32_t>(slot[col]), value);
    }
  }

  std::vector<double> v(scorer.features.size(), 0.0);
  double scale = 1.0;
  double bias = 0.0;
  std::vector<std::size_t> order(features.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(detail::article_seed(config.seed, article));
  std::size_t t = 0;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    shuffle_in_place(order, rng);
    for (std::size_t d : order) {
      ++t;
      const double eta = config.learning_rate / std::sqrt(static_cast<double>(t));
      const double y = labels[d] ? 1.0 : -1.0;
      double dot = 0.0;
      for (const auto& [i, value] : xs[d]) dot += v[i] * value;
      const double margin = y * (scale * dot + bias);
      scale *= 1.0 - eta * config.l2;
      if (margin < 1.0) {
        const double step = eta * y / scale;
        for (const auto& [i, value] : xs[d]) v[i] += step * value;
        bias += eta * y;
      }
      if (scale < 1e-9) {
        for (double& w : v) w *= scale;
        scale = 1.0;
      }
    }
  }
  scorer.weights.resize(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) scorer.weights[i] = scale * v[i];
  scorer.bias = bias;
  return scorer;
}

struct Extraction {
  ArticleId article;
  double score = 0.0;
};

class ExtractorBank {
 public:
  ExtractorBank() = default;

  ExtractorBank(TfidfModel tfidf, std::vector<LinearScorer> scorers, std::size_t k)
      : tfidf_(std::move(tfidf)), scorers_(std::move(scorers)), k_(k) {
    std::sort(scorers_.begin(), scorers_.end(),
              [](const LinearScorer& a, const LinearScorer& b) { return a.article < b.article; });
    for (std::size_t i = 1; i < scorers_.size(); ++i) {
      if (scorers_[i].article == scorers_[i - 1].article) {
        throw ValidationError("duplicate scorer for article " + scorers_[i].article.str());
      }
    }
    for (const auto& s : scorers_) {
      if (s.features.size() != s.weights.size()) throw ShapeError("scorer " + s.article.str() + " weight length mismatch");
      for (auto f : s.features) {
        if (f >= tfidf_.size()) throw ShapeError("scorer " + s.article.str() + " selects an unknown column");
      }
    }
    set_k(k);
  }

  /// Fits the tf-idf model on `docs` and one scorer per entry of `articles`.
  static ExtractorBank train(const std::vector<TokenList>& docs, const std::vector<std::vector<ArticleId>>& gold,
                             const std::vector<ArticleId>& articles, const ExtractorConfig& config) {
    config.validate();
    if (docs.size() != gold.size()) throw ShapeError("extractor training: documents and gold sets differ in length");
    TfidfModel tfidf = TfidfModel::fit(docs);
    std::vector<SparseVector> features;
    features.reserve(docs.size());
    for (const auto& d : docs) features.push_back(tfidf.transform(d));
    std::vector<LinearScorer> scorers;
    for (const auto& a : articles) {
      std::vector<bool> labels(docs.size());
      for (std::size_t i = 0; i < docs.size(); ++i) {
        labels[i] = std::find(gold[i].begin(), gold[i].end(), a) != gold[i].end();
      }
      scorers.push_back(train_scorer(a, features, labels, tfidf.size(), config));
    }
    return ExtractorBank(std::move(tfidf), std::move(scorers), std::min(config.k, articles.size()));
  }

  static ExtractorBank train(const std::vector<corpus::CaseRecord>& cases, const std::vector<ArticleId>& articles,
                             const ExtractorConfig& config) {
    std::vector<TokenList> docs;
    std::vector<std::vector<ArticleId>> gold;
    for (const auto& c : cases) {
      docs.push_back(case_tokens(c));
      gold.push_back(c.articles);
    }
    return train(docs, gold, articles, config);
  }

  /// Adds a scorer for a new article using this bank's frozen tf-idf model.
  /// Existing scorers are not touched.
  void extend(const ArticleId& article, const std::vector<TokenList>& docs, const std::vector<bool>& labels,
              const ExtractorConfig& config) {
    if (find(article)) throw ValidationError("bank already has a scorer for article " + article.str());
    std::vector<SparseVector> features;
    features.reserve(docs.size());
    for (const auto& d : docs) features.push_back(tfidf_.transform(d));
    LinearScorer s = train_scorer(article, features, labels, tfidf_.size(), config);
    const auto pos = std::lower_bound(scorers_.begin(), scorers_.end(), article,
                                      [](const LinearScorer& a, const ArticleId& b) { return a.article < b; });
    scorers_.insert(pos, std::move(s));
  }

  const LinearScorer* find(const ArticleId& article) const {
    for (const auto& s : scorers_) {
      if (s.article == article) return &s;
    }
    return nullptr;
  }

  /// Raw decision values, aligned with scorers().
  std::vector<double> scores(const TokenList& tokens) const {
    const SparseVector x = tfidf_.transform(tokens);
    std::vector<double> out;
    out.reserve(scorers_.size());
    for (const auto& s : scorers_) out.push_back(s.score(x));
    return out;
  }

  /// Articles by descending score, ties to the smaller id; `k` defaults to
  /// the bank's own.
  std::vector<Extraction> extract_top_k(const TokenList& tokens, std::optional<std::size_t> k = std::nullopt) const {
    if (scorers_.empty()) throw StateError("extractor bank has no scorers");
    const std::size_t n = std::min(k.value_or(k_), scorers_.size());
    const auto s = scores(tokens);
    std::vector<std::size_t> order(scorers_.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n), order.end(),
                      [&](std::size_t a, std::size_t b) { return s[a] > s[b] || (s[a] == s[b] && a < b); });
    std::vector<Extraction> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back({scorers_[order[i]].article, s[order[i]]});
    return out;
  }

  std::vector<Extraction> extract_top_k(const corpus::CaseRecord& c, std::optional<std::size_t> k = std::nullopt) const {
    return extract_top_k(case_tokens(c), k);
  }

  std::size_t k() const { return k_; }
  void set_k(std::size_t k) {
    if (k == 0 || k > scorers_.size()) {
      throw ValidationError("k = " + std::to_string(k) + " must lie in [1, " + std::to_string(scorers_.size()) + "]");
    }
    k_ = k;
  }

  const TfidfModel& tfidf() const { return tfidf_; }
  const std::vector<LinearScorer>& scorers() const { return scorers_; }

  std::vector<ArticleId> articles() const {
    std::vector<ArticleId> out;
    for (const auto& s : scorers_) out.push_back(s.article);
    return out;
  }

 private:
  TfidfModel tfidf_;
  std::vector<LinearScorer> scorers_;
  std::size_t k_ = 0;
};

/// Fraction of gold article instances found within the first k extractions,
/// pooled over all cases, for each k in `k_values`.
inline std::vector<double> recall_at_k(const std::vector<std::vector<ArticleId>>& extractions,
                                       const std::vector<std::vector<ArticleId>>& gold_sets,
                                       const std::vector<std::size_t>& k_values) {
  if (extractions.size() != gold_sets.size()) {
    throw ShapeError("recall_at_k: " + std::to_string(extractions.size()) + " extraction lists but " +
                     std::to_string(gold_sets.size()) + " gold sets");
  }
  std::size_t total = 0;
  for (const auto& g : gold_sets) total += g.size();
  if (total == 0) throw DomainError("recall_at_k with no gold articles");
  std::vector<double> out;
  for (std::size_t k : k_values) {
    std::size_t hits = 0;
    for (std::size_t i = 0; i < gold_sets.size(); ++i) {
      const auto end = extractions[i].begin() + static_cast<std::ptrdiff_t>(std::min(k, extractions[i].size()));
      for (const auto& a : gold_sets[i]) hits += std::find(extractions[i].begin(), end, a) != end;
    }
    out.push_back(static_cast<double>(hits) / static_cast<double>(total));
  }
  return out;
}

inline std::vector<ArticleId> extraction_ids(const std::vector<Extraction>& ranked) {
  std::vector<ArticleId> out;
  out.reserve(ranked.size());
  for (const auto& e : ranked) out.push_back(e.article);
  return out;
}

// Bank file layout (JSON):
//   {"format_version": 1, "k": int, "doc_count": int,
//    "vocabulary": [token, ...], "idf": [double, ...],
//    "scorers": [{"article": "234", "trained": bool, "bias": double,
//                 "features": [column, ...], "weights": [double, ...]}, ...]}
// Doubles are written with 17 significant digits, which round-trips exactly.
inline nlohmann::json to_json(const ExtractorBank& bank) {
  nlohmann::json scorers = nlohmann::json::array();
  for (const auto& s : bank.scorers()) {
    scorers.push_back({{"article", s.article.str()},
                       {"trained", s.trained},
                       {"bias", s.bias},
                       {"features", s.features},
                       {"weights", s.weights}});
  }
  return {{"format_version", kBankFormatVersion},
          {"k", bank.k()},
          {"doc_count", bank.tfidf().doc_count()},
          {"vocabulary", bank.tfidf().tokens()},
          {"idf", bank.tfidf().idf()},
          {"scorers", std::move(scorers)}};
}

inline ExtractorBank bank_from_json(const nlohmann::json& j) {
  try {
    const int version = j.at("format_version").get<int>();
    if (version != kBankFormatVersion) throw ParseError("unsupported extractor bank version " + std::to_string(version));
    auto tfidf = TfidfModel::from_parts(j.at("vocabulary").get<std::vector<std::string>>(),
                                        j.at("idf").get<std::vector<double>>(), j.at("doc_count").get<std::size_t>());
    std::vector<LinearScorer> scorers;
    for (const auto& s : j.at("scorers")) {
      LinearScorer sc;
      sc.article = ArticleId::parse(s.at("article").get<std::string>());
      sc.trained = s.at("trained").get<bool>();
      sc.bias = s.at("bias").get<double>();
      sc.features = s.at("features").get<std::vector<std::uint32_t>>();
      sc.weights = s.at("weights").get<std::vector<double>>();
      scorers.push_back(std::move(sc));
    }
    return ExtractorBank(std::move(tfidf), std::move(scorers), j.at("k").get<std::size_t>());
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("extractor bank: ") + e.what());
  }
}

inline void save_bank(const std::string& path, const ExtractorBank& bank) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write extractor bank " + path);
  out << to_json(bank).dump() << '\n';
}

inline ExtractorBank load_bank(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open extractor bank " + path);
  try {
    return bank_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError("extractor bank " + path + ": " + e.what());
  }
}

}  // namespace chargenet::extract
