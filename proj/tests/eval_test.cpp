#include <gtest/gtest.h>

#include <random>
#include <set>

#include "chargenet/core/random.hpp"
#include "chargenet/eval/metrics.hpp"
#include "chargenet/eval/report.hpp"

namespace ev = chargenet::eval;
using chargenet::corpus::ArticleId;

namespace {

ev::PredictionBatch random_batch(chargenet::Rng& rng, std::size_t n, int n_charges) {
  ev::PredictionBatch b;
  for (std::size_t i = 0; i < n; ++i) {
    ev::CaseResult c;
    std::set<int> gold, pred;
    gold.insert(static_cast<int>(chargenet::uniform_index(rng, n_charges)));
    if (chargenet::uniform01(rng) < 0.2) gold.insert(static_cast<int>(chargenet::uniform_index(rng, n_charges)));
    const auto n_pred = chargenet::uniform_index(rng, 3);
    for (std::size_t k = 0; k < n_pred; ++k) pred.insert(static_cast<int>(chargenet::uniform_index(rng, n_charges)));
    c.gold.assign(gold.begin(), gold.end());
    c.predicted.assign(pred.begin(), pred.end());
    b.cases.push_back(c);
  }
  return b;
}

ev::CaseResult cr(std::vector<int> predicted, std::vector<int> gold) { return {predicted, gold, {}, {}}; }

bool contains(const std::vector<int>& v, int x) { return std::find(v.begin(), v.end(), x) != v.end(); }

// Counts decisions charge by charge over a fixed id range.
struct Oracle {
  std::vector<double> tp, fp, fn;
  explicit Oracle(const ev::PredictionBatch& b, int n_charges) : tp(n_charges), fp(n_charges), fn(n_charges) {
    for (int l = 0; l < n_charges; ++l) {
      for (const auto& c : b.cases) {
        const bool p = contains(c.predicted, l), g = contains(c.gold, l);
        tp[l] += p && g;
        fp[l] += p && !g;
        fn[l] += !p && g;
      }
    }
  }
};

}  // namespace

TEST(Micro, PerfectPredictions) {
  ev::PredictionBatch b{{cr({1}, {1}), cr({0, 2}, {0, 2})}};
  const auto m = ev::micro_prf(b);
  EXPECT_EQ(m.precision, 1.0);
  EXPECT_EQ(m.recall, 1.0);
  EXPECT_EQ(m.f1, 1.0);
}

TEST(Micro, EmptyPredictionsGiveZeros) {
  ev::PredictionBatch b{{cr({}, {1}), cr({}, {2})}};
  const auto m = ev::micro_prf(b);
  EXPECT_EQ(m.precision, 0.0);
  EXPECT_EQ(m.recall, 0.0);
  EXPECT_EQ(m.f1, 0.0);
}

TEST(Micro, MatchesBruteForceCounts) {
  chargenet::Rng rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    const auto b = random_batch(rng, 1 + chargenet::uniform_index(rng, 12), 5);
    const Oracle o(b, 5);
    double tp = 0, fp = 0, fn = 0;
    for (int l = 0; l < 5; ++l) tp += o.tp[l], fp += o.fp[l], fn += o.fn[l];
    const double p = tp + fp > 0 ? tp / (tp + fp) : 0.0;
    const double r = tp / (tp + fn);
    const auto m = ev::micro_prf(b);
    EXPECT_DOUBLE_EQ(m.precision, p);
    EXPECT_DOUBLE_EQ(m.recall, r);
    EXPECT_DOUBLE_EQ(m.f1, p + r > 0 ? 2 * p * r / (p + r) : 0.0);
    EXPECT_GE(m.f1, std::min(m.precision, m.recall) - 1e-15);
    EXPECT_LE(m.f1, std::max(m.precision, m.recall) + 1e-15);
  }
}

TEST(Macro, SingleChargePerfect) {
  ev::PredictionBatch b{{cr({3}, {3}), cr({3}, {3})}};
  const auto m = ev::macro_prf(b);
  EXPECT_EQ(m.precision, 1.0);
  EXPECT_EQ(m.recall, 1.0);
  EXPECT_EQ(m.f1, 1.0);
}

TEST(Macro, OneChargeNeverPredicted) {
  ev::PredictionBatch b{{cr({0}, {0}), cr({}, {1})}};
  const auto m = ev::macro_prf(b);
  EXPECT_EQ(m.recall, 0.5);
  EXPECT_EQ(m.precision, 0.5);
}

TEST(Macro, MatchesPerChargeOracle) {
  chargenet::Rng rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    const auto b = random_batch(rng, 1 + chargenet::uniform_index(rng, 12), 6);
    const Oracle o(b, 6);
    double ps = 0, rs = 0, fs = 0, n = 0;
    for (int l = 0; l < 6; ++l) {
      if (o.tp[l] + o.fn[l] == 0) continue;
      const double p = o.tp[l] + o.fp[l] > 0 ? o.tp[l] / (o.tp[l] + o.fp[l]) : 0.0;
      const double r = o.tp[l] / (o.tp[l] + o.fn[l]);
      ps += p;
      rs += r;
      fs += p + r > 0 ? 2 * p * r / (p + r) : 0.0;
      n += 1;
    }
    const auto m = ev::macro_prf(b);
    EXPECT_NEAR(m.precision, ps / n, 1e-15);
    EXPECT_NEAR(m.recall, rs / n, 1e-15);
    const double P = ps / n, R = rs / n;
    EXPECT_NEAR(m.f1, P + R > 0 ? 2 * P * R / (P + R) : 0.0, 1e-15);
    EXPECT_NEAR(ev::macro_prf(b, ev::MacroF1::MeanOfPerCharge).f1, fs / n, 1e-15);
  }
}

TEST(Metrics, PermutationInvariant) {
  chargenet::Rng rng(3);
  auto b = random_batch(rng, 30, 5);
  const auto micro = ev::micro_prf(b);
  const auto macro = ev::macro_prf(b);
  chargenet::shuffle_in_place(b.cases, rng);
  EXPECT_NEAR(ev::micro_prf(b).f1, micro.f1, 1e-15);
  EXPECT_NEAR(ev::macro_prf(b).f1, macro.f1, 1e-15);
}

TEST(Metrics, DuplicatedCaseLeavesOtherChargesUnchanged) {
  chargenet::Rng rng(4);
  auto b = random_batch(rng, 30, 6);
  const ev::CaseResult dup{{0}, {0}, {}, {}};
  const auto before = ev::per_charge_counts(b);
  b.cases.push_back(dup);
  const auto after = ev::per_charge_counts(b);
  for (const auto& [id, c] : before) {
    if (id == 0) continue;
    EXPECT_EQ(after.at(id).tp, c.tp);
    EXPECT_EQ(after.at(id).fp, c.fp);
    EXPECT_EQ(after.at(id).fn, c.fn);
  }
}

TEST(Metrics, EmptyBatchAndEmptyGoldAreRejected) {
  EXPECT_THROW(ev::micro_prf({}), chargenet::DomainError);
  EXPECT_THROW(ev::micro_prf(ev::PredictionBatch{{cr({1}, {})}}), chargenet::ValidationError);
}

TEST(Articles, PrecAt1) {
  const std::vector<std::vector<ArticleId>> gold = {{{1, 0}}, {{2, 0}, {3, 0}}, {{4, 0}}};
  EXPECT_EQ(ev::prec_at_1({{{1, 0}}, {{3, 0}}, {{4, 0}}}, gold), 1.0);
  EXPECT_EQ(ev::prec_at_1({{{9, 0}}, {{9, 0}}, {{9, 0}}}, gold), 0.0);
  // Hand count: first and third correct.
  EXPECT_DOUBLE_EQ(ev::prec_at_1({{{1, 0}, {2, 0}}, {{1, 0}, {2, 0}}, {{4, 0}}}, gold), 2.0 / 3.0);
}

TEST(Articles, AveragePrecisionExamples) {
  EXPECT_EQ(ev::average_precision({{1, 0}, {2, 0}}, {{1, 0}}), 1.0);
  EXPECT_EQ(ev::average_precision({{2, 0}, {1, 0}}, {{1, 0}}), 0.5);
  EXPECT_DOUBLE_EQ(ev::average_precision({{1, 0}, {5, 0}, {3, 0}}, {{1, 0}, {3, 0}}), 5.0 / 6.0);
  // A gold item outside the truncated ranking counts as zero.
  EXPECT_DOUBLE_EQ(ev::average_precision({{1, 0}}, {{1, 0}, {3, 0}}), 0.5);
}

TEST(Articles, MapIsOneIffGoldPrecedesNonGold) {
  chargenet::Rng rng(5);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<std::vector<ArticleId>> rankings, gold;
    bool all_ahead = true;
    for (int c = 0; c < 4; ++c) {
      std::vector<ArticleId> r;
      for (int a = 1; a <= 6; ++a) r.push_back({a, 0});
      chargenet::shuffle_in_place(r, rng);
      std::vector<ArticleId> g;
      for (int a = 1; a <= 6; ++a) {
        if (chargenet::uniform01(rng) < 0.3) g.push_back({a, 0});
      }
      if (g.empty()) g.push_back({1, 0});
      bool seen_non_gold = false;
      for (const auto& a : r) {
        const bool is_gold = std::find(g.begin(), g.end(), a) != g.end();
        if (is_gold && seen_non_gold) all_ahead = false;
        if (!is_gold) seen_non_gold = true;
      }
      rankings.push_back(r);
      gold.push_back(g);
    }
    EXPECT_EQ(ev::mean_average_precision(rankings, gold) == 1.0, all_ahead);
  }
}

TEST(Report, IdenticalVariantsHaveZeroDeltas) {
  chargenet::Rng rng(6);
  const auto b = random_batch(rng, 20, 4);
  const auto c = ev::compare_variants({{"FactOnly", b}, {"FactArt", b}});
  EXPECT_EQ(c.micro_f1_delta[0][1], 0.0);
  EXPECT_EQ(c.macro_f1_delta[1][0], 0.0);
  const std::string text = ev::render_text(c);
  EXPECT_NE(text.find("FactOnly"), std::string::npos);
  EXPECT_NE(text.find("90.21"), std::string::npos);
}

TEST(Report, MismatchedTestSetsAreRejected) {
  chargenet::Rng rng(7);
  const auto a = random_batch(rng, 20, 4);
  auto b = a;
  b.cases.pop_back();
  EXPECT_THROW(ev::compare_variants({{"x", a}, {"y", b}}), chargenet::ValidationError);
  b = a;
  b.cases[3].gold = {99};
  EXPECT_THROW(ev::compare_variants({{"x", a}, {"y", b}}), chargenet::ValidationError);
}

TEST(Report, FactOnlyComparesWithArticleVariants) {
  chargenet::Rng rng(9);
  const auto plain = random_batch(rng, 10, 3);
  auto ranked = plain;
  for (auto& c : ranked.cases) {
    c.ranked_articles = {{1, 0}, {2, 0}};
    c.gold_articles = {{2, 0}};
  }
  const auto c = ev::compare_variants({{"FactOnly", plain}, {"FactArt", ranked, 0.0}});
  EXPECT_FALSE(c.rows[0].articles.has_value());
  EXPECT_TRUE(c.rows[1].articles.has_value());
  auto other = ranked;
  other.cases[0].gold_articles = {{1, 0}};
  EXPECT_THROW(ev::compare_variants({{"FactArt", ranked}, {"FactSupvArt", other}}), chargenet::ValidationError);
}

TEST(Report, JsonlRoundTrip) {
  chargenet::Rng rng(8);
  auto b = random_batch(rng, 20, 4);
  for (auto& c : b.cases) {
    c.ranked_articles = {{1, 0}, {2, 1}, {3, 0}};
    c.gold_articles = {{2, 1}};
  }
  const auto single = ev::compare_variants({{"FactSupvArt", b}});
  const auto parsed = ev::parse_jsonl(ev::render_jsonl(single));
  ASSERT_EQ(parsed.size(), 1u);
  EXPECT_EQ(parsed[0], single.rows[0]);
  EXPECT_TRUE(parsed[0].articles.has_value());
}
