#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "chargenet/core/errors.hpp"
#include "chargenet/core/random.hpp"
#include "chargenet/corpus/dataset.hpp"
#include "chargenet/corpus/numerals.hpp"
#include "chargenet/corpus/rules.hpp"
#include "chargenet/corpus/tokenizer.hpp"
#include "chargenet/corpus/types.hpp"

namespace chargenet::corpus {

/// Parameters of the synthetic verification corpus.
///
/// Articles [0, n_charges) are charge-specific: article c is written from
/// the core keywords of charge c. The remaining articles are general
/// provisions shared between charges, each with its own small vocabulary.
/// Fact tokens are drawn from the case's charge cores, the topic vocabulary
/// of the charge's group (shared by `group_size` neighbouring charges), the
/// vocabularies of the case's general articles, and a shared noise pool.
struct SyntheticSpec {
  std::size_t n_charges = 20;
  std::size_t n_articles = 40;
  std::size_t min_articles_per_charge = 1;
  std::size_t max_articles_per_charge = 3;
  /// Explicit charge -> article-index map; sampled from the seed when empty.
  std::vector<std::vector<std::size_t>> charge_articles;

  std::size_t core_keywords = 12;
  std::size_t group_size = 2;
  std::size_t topic_words = 12;
  std::size_t article_keywords = 6;
  std::size_t legal_words = 30;
  std::size_t noise_words = 400;

  std::size_t min_sentences = 3;
  std::size_t max_sentences = 6;
  std::size_t min_sentence_length = 6;
  std::size_t max_sentence_length = 12;
  std::size_t article_sentences = 2;
  std::size_t min_article_sentence_length = 6;
  std::size_t max_article_sentence_length = 8;

  double keyword_rate = 0.2;
  double topic_rate = 0.2;
  double circumstance_rate = 0.05;
  double multi_charge_probability = 0.0356;
  /// Charge c is drawn with weight (c + 1)^-charge_skew.
  double charge_skew = 0.5;
  /// Chance that a fact sentence mentions one of the case's charge names.
  double charge_mention_rate = 0.02;

  std::size_t train_size = 2000;
  std::size_t valid_size = 200;
  std::size_t test_size = 200;
  std::uint64_t seed = 2017;

  void validate() const {
    auto fail = [](const std::string& m) { throw ValidationError("synthetic spec: " + m); };
    if (n_charges < 2) fail("n_charges must be at least 2");
    if (n_articles < n_charges) fail("n_articles must be at least n_charges");
    if (n_articles > 1400) fail("n_articles must be at most 1400");
    if (min_articles_per_charge < 1 || max_articles_per_charge < min_articles_per_charge) {
      fail("articles per charge must satisfy 1 <= min <= max");
    }
    if (!charge_articles.empty()) {
      if (charge_articles.size() != n_charges) fail("charge_articles must list every charge");
      for (const auto& arts : charge_articles) {
        if (arts.empty()) fail("every charge must map to at least one article");
        for (auto a : arts) {
          if (a >= n_articles) fail("charge_articles refers to an unknown article");
        }
      }
    }
    if (core_keywords == 0) fail("core_keywords must be positive");
    if (group_size == 0) fail("group_size must be positive");
    if (legal_words == 0) fail("legal_words must be positive");
    if (min_sentences == 0 || max_sentences < min_sentences) fail("sentence count range is empty");
    if (min_sentence_length == 0 || max_sentence_length < min_sentence_length) fail("sentence length range is empty");
    if (article_sentences == 0 || min_article_sentence_length == 0 ||
        max_article_sentence_length < min_article_sentence_length) {
      fail("article length range is empty");
    }
    for (double r : {keyword_rate, topic_rate, circumstance_rate, multi_charge_probability, charge_mention_rate}) {
      if (!(r >= 0.0 && r <= 1.0)) fail("rates must lie in [0, 1]");
    }
    if (keyword_rate + topic_rate + circumstance_rate > 1.0 + 1e-12) fail("token rates sum above 1");
    if (keyword_rate + topic_rate + circumstance_rate < 1.0 - 1e-12 && noise_words == 0) {
      fail("noise mass is positive but the noise vocabulary is empty");
    }
    if (topic_rate > 0.0 && topic_words == 0) fail("topic_rate is positive but topic_words is 0");
    if (!(charge_skew >= 0.0)) fail("charge_skew must be non-negative");
    if (train_size == 0) fail("train_size must be positive");
  }
};

inline const std::vector<std::string>& builtin_charge_names() {
  static const std::vector<std::string> names = {
      "盗窃罪",       "诈骗罪",       "故意伤害罪",   "合同诈骗罪",   "危险驾驶罪",   "交通肇事罪",
      "抢劫罪",       "抢夺罪",       "寻衅滋事罪",   "聚众斗殴罪",   "贩卖毒品罪",   "非法持有毒品罪",
      "开设赌场罪",   "赌博罪",       "敲诈勒索罪",   "信用卡诈骗罪", "职务侵占罪",   "非法拘禁罪",
      "妨害公务罪",   "故意杀人罪",   "容留他人吸毒罪", "故意毁坏财物罪", "受贿罪",     "贪污罪",
      "行贿罪",       "非法吸收公众存款罪", "拒不支付劳动报酬罪", "强奸罪", "重婚罪", "伪证罪"};
  return names;
}

/// Charge names for a corpus of `n` charges: real names first (several
/// contain one another, such as 诈骗罪 inside 合同诈骗罪), then numbered ones.
inline std::vector<std::string> synthetic_charge_names(std::size_t n) {
  const auto& builtin = builtin_charge_names();
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back(i < builtin.size() ? builtin[i] : "第" + int_to_chinese_numeral(static_cast<int>(i + 1)) + "类犯罪");
  }
  return out;
}

struct SyntheticCase {
  JudgementDoc doc;
  Segments parts;
  std::vector<int> charges;
  std::vector<ArticleId> articles;
};

/// The fixed part of a synthetic corpus: vocabularies, charge names,
/// the charge -> article map and the article texts.
class SyntheticWorld {
 public:
  explicit SyntheticWorld(SyntheticSpec spec) : spec_(std::move(spec)) {
    spec_.validate();
    Rng rng(spec_.seed);
    charge_names_ = synthetic_charge_names(spec_.n_charges);
    rules_ = default_rules(charge_names_);

    for (std::size_t a = 0; a < spec_.n_articles; ++a) {
      article_ids_.push_back({static_cast<int>(13 + 7 * a), a % 9 == 4 ? 1 : 0});
    }

    static const char* kTags[] = {"n", "v", "a", "d", "vn", "ns", "nr"};
    auto make_vocab = [&](const std::string& prefix, std::size_t count) {
      std::vector<Token> vocab;
      for (std::size_t i = 0; i < count; ++i) vocab.push_back({prefix + std::to_string(i), kTags[uniform_index(rng, 7)]});
      return vocab;
    };
    for (std::size_t c = 0; c < spec_.n_charges; ++c) cores_.push_back(make_vocab("c" + std::to_string(c) + "k", spec_.core_keywords));
    const std::size_t groups = (spec_.n_charges + spec_.group_size - 1) / spec_.group_size;
    for (std::size_t g = 0; g < groups; ++g) topics_.push_back(make_vocab("g" + std::to_string(g) + "t", spec_.topic_words));
    for (std::size_t a = spec_.n_charges; a < spec_.n_articles; ++a) {
      circumstances_.push_back(make_vocab("a" + std::to_string(a) + "k", spec_.article_keywords));
    }
    legal_ = make_vocab("law", spec_.legal_words);
    noise_ = make_vocab("w", spec_.noise_words);

    if (!spec_.charge_articles.empty()) {
      charge_articles_ = spec_.charge_articles;
    } else {
      const std::size_t general = spec_.n_articles - spec_.n_charges;
      for (std::size_t c = 0; c < spec_.n_charges; ++c) {
        std::vector<std::size_t> arts = {c};
        std::size_t extra = uniform_between(rng, spec_.min_articles_per_charge, spec_.max_articles_per_charge) - 1;
        extra = std::min(extra, general);
        std::vector<std::size_t> pool(general);
        for (std::size_t i = 0; i < general; ++i) pool[i] = spec_.n_charges + i;
        for (std::size_t i = 0; i < extra; ++i) {
          const std::size_t j = i + uniform_index(rng, pool.size() - i);
          std::swap(pool[i], pool[j]);
          arts.push_back(pool[i]);
        }
        charge_articles_.push_back(std::move(arts));
      }
    }
    for (auto& arts : charge_articles_) {
      std::sort(arts.begin(), arts.end());
      arts.erase(std::unique(arts.begin(), arts.end()), arts.end());
    }

    for (std::size_t a = 0; a < spec_.n_articles; ++a) {
      const auto& own = a < spec_.n_charges ? cores_[a] : circumstances_[a - spec_.n_charges];
      std::string text;
      for (std::size_t s = 0; s < spec_.article_sentences; ++s) {
        const std::size_t len =
            uniform_between(rng, spec_.min_article_sentence_length, spec_.max_article_sentence_length);
        for (std::size_t t = 0; t < len; ++t) {
          const bool keyword = !own.empty() && uniform01(rng) < 0.5;
          const auto& vocab = keyword ? own : legal_;
          if (t) text += ' ';
          text += vocab[uniform_index(rng, vocab.size())].word;
        }
        text += "。";
      }
      articles_[article_ids_[a]] = text;
    }

    for (std::size_t c = 0; c < spec_.n_charges; ++c) {
      charge_weights_.push_back(std::pow(static_cast<double>(c + 1), -spec_.charge_skew));
    }
  }

  const SyntheticSpec& spec() const { return spec_; }
  const std::vector<std::string>& charge_names() const { return charge_names_; }
  const RuleSet& rules() const { return rules_; }
  const ArticleDb& articles() const { return articles_; }
  const std::vector<ArticleId>& article_ids() const { return article_ids_; }
  const std::vector<std::vector<std::size_t>>& charge_articles() const { return charge_articles_; }
  const std::vector<Token>& core(std::size_t charge) const { return cores_.at(charge); }
  const std::vector<double>& charge_weights() const { return charge_weights_; }
  std::size_t group_of(std::size_t charge) const { return charge / spec_.group_size; }

  /// Draws one labelled case and renders it as a judgement document.
  SyntheticCase sample_case(Rng& rng, const std::string& id) const {
    std::vector<std::size_t> charges = {sample_categorical(rng, charge_weights_)};
    if (uniform01(rng) < spec_.multi_charge_probability) {
      auto weights = charge_weights_;
      weights[charges[0]] = 0.0;
      charges.push_back(sample_categorical(rng, weights));
    }
    std::set<std::size_t> article_set;
    for (auto c : charges) article_set.insert(charge_articles_[c].begin(), charge_articles_[c].end());
    std::vector<std::size_t> general;
    for (auto a : article_set) {
      if (a >= spec_.n_charges) general.push_back(a);
    }

    std::string fact = "，";
    const std::size_t n_sentences = uniform_between(rng, spec_.min_sentences, spec_.max_sentences);
    for (std::size_t s = 0; s < n_sentences; ++s) {
      const std::size_t len = uniform_between(rng, spec_.min_sentence_length, spec_.max_sentence_length);
      std::vector<Token> tokens;
      for (std::size_t t = 0; t < len; ++t) tokens.push_back(sample_token(rng, charges, general));
      if (uniform01(rng) < spec_.charge_mention_rate) {
        const auto c = charges[uniform_index(rng, charges.size())];
        const auto at = uniform_index(rng, tokens.size() + 1);
        tokens.insert(tokens.begin() + static_cast<std::ptrdiff_t>(at), Token{charge_names_[c], "n"});
      }
      for (const auto& tok : tokens) fact += " " + tok.word + "/" + tok.pos;
      fact += " 。/w";
    }
    fact += "\n";

    SyntheticCase out;
    out.doc.id = id;
    for (auto c : charges) out.charges.push_back(static_cast<int>(c));
    std::sort(out.charges.begin(), out.charges.end());
    for (auto a : article_set) out.articles.push_back(article_ids_[a]);
    std::sort(out.articles.begin(), out.articles.end());

    // Cite specific articles first, as judgements usually do.
    std::vector<std::size_t> cited(article_set.begin(), article_set.end());
    std::stable_partition(cited.begin(), cited.end(), [&](std::size_t a) { return a < spec_.n_charges; });
    std::string view = "，被告人某某的行为已构成";
    for (std::size_t i = 0; i < charges.size(); ++i) view += (i ? "、" : "") + charge_names_[charges[i]];
    view += "。依照《中华人民共和国刑法》";
    for (std::size_t i = 0; i < cited.size(); ++i) {
      const ArticleId& aid = article_ids_[cited[i]];
      view += (i ? "、第" : "第") + int_to_chinese_numeral(aid.number) + "条";
      if (aid.sub) view += "之" + int_to_chinese_numeral(aid.sub);
    }
    view += "之规定，\n";

    std::string decision = "：";
    for (std::size_t i = 0; i < charges.size(); ++i) {
      const int years = static_cast<int>(uniform_between(rng, 1, 10));
      decision += (i ? "；犯" : "被告人某某犯") + charge_names_[charges[i]] + "，判处有期徒刑" +
                  int_to_chinese_numeral(years) + "年";
    }
    decision += "。\n";

    out.parts = {fact, view, decision};
    const std::string& fact_indicator = rules_.fact_indicators[uniform_index(rng, rules_.fact_indicators.size())];
    out.doc.text = "某某市人民法院\n刑事判决书\n被告人某某，男，汉族。\n" + fact_indicator + out.parts.fact +
                   rules_.view_indicators.front() + out.parts.view + rules_.decision_indicators.front() +
                   out.parts.decision;
    return out;
  }

 private:
  Token sample_token(Rng& rng, const std::vector<std::size_t>& charges, const std::vector<std::size_t>& general) const {
    const auto c = charges[uniform_index(rng, charges.size())];
    double r = uniform01(rng);
    if (r < spec_.keyword_rate) return cores_[c][uniform_index(rng, cores_[c].size())];
    r -= spec_.keyword_rate;
    if (r < spec_.topic_rate) {
      const auto& topic = topics_[group_of(c)];
      return topic[uniform_index(rng, topic.size())];
    }
    r -= spec_.topic_rate;
    if (r < spec_.circumstance_rate && !general.empty()) {
      const auto& vocab = circumstances_[general[uniform_index(rng, general.size())] - spec_.n_charges];
      if (!vocab.empty()) return vocab[uniform_index(rng, vocab.size())];
    }
    if (noise_.empty()) return cores_[c][uniform_index(rng, cores_[c].size())];
    return noise_[uniform_index(rng, noise_.size())];
  }

  SyntheticSpec spec_;
  std::vector<std::string> charge_names_;
  RuleSet rules_;
  std::vector<ArticleId> article_ids_;
  std::vector<std::vector<Token>> cores_;
  std::vector<std::vector<Token>> topics_;
  std::vector<std::vector<Token>> circumstances_;
  std::vector<Token> legal_;
  std::vector<Token> noise_;
  std::vector<std::vector<std::size_t>> charge_articles_;
  std::vector<double> charge_weights_;
  ArticleDb articles_;
};

struct SyntheticCorpus {
  std::vector<std::string> charge_names;
  RuleSet rules;
  ArticleDb articles;
  std::vector<CaseRecord> train;
  std::vector<CaseRecord> valid;
  std::vector<CaseRecord> test;
};

/// Samples every split and runs each rendered judgement through the
/// extraction pipeline, so the returned records are exactly what the rule
/// based path recovers from the documents.
inline SyntheticCorpus generate_synthetic(const SyntheticSpec& spec) {
  const SyntheticWorld world(spec);
  SyntheticCorpus corpus;
  corpus.charge_names = world.charge_names();
  corpus.rules = world.rules();
  corpus.articles = world.articles();
  const PretaggedTokenizer tokenizer;
  Rng rng(spec.seed ^ 0x9E3779B97F4A7C15ULL);
  auto fill = [&](std::vector<CaseRecord>& split, const std::string& name, std::size_t count) {
    split.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
      const auto sc = world.sample_case(rng, name + "-" + std::to_string(i + 1));
      CaseRecord rec = assemble_case(sc.doc, corpus.rules, tokenizer);
      if (rec.charges != sc.charges || rec.articles != sc.articles) {
        throw StateError("extraction disagrees with the generator on " + sc.doc.id);
      }
      split.push_back(std::move(rec));
    }
  };
  fill(corpus.train, "train", spec.train_size);
  fill(corpus.valid, "valid", spec.valid_size);
  fill(corpus.test, "test", spec.test_size);
  return corpus;
}

}  // namespace chargenet::corpus
