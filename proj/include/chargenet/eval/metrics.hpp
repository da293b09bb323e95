#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "chargenet/core/errors.hpp"
#include "chargenet/corpus/types.hpp"

namespace chargenet::eval {

using corpus::ArticleId;

struct CaseResult {
  std::vector<int> predicted;
  std::vector<int> gold;
  std::vector<ArticleId> ranked_articles;
  std::vector<ArticleId> gold_articles;
};

struct PredictionBatch {
  std::vector<CaseResult> cases;

  void validate() const {
    if (cases.empty()) throw DomainError("prediction batch is empty");
    for (std::size_t i = 0; i < cases.size(); ++i) {
      if (cases[i].gold.empty()) throw ValidationError("case " + std::to_string(i) + " has an empty gold charge set");
    }
  }

  bool has_articles() const {
    return std::any_of(cases.begin(), cases.end(), [](const CaseResult& c) { return !c.gold_articles.empty(); });
  }
};

struct Prf {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

inline double safe_div(double num, double den) { return den > 0.0 ? num / den : 0.0; }
inline double harmonic(double p, double r) { return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0; }

struct Counts {
  double tp = 0.0;
  double fp = 0.0;
  double fn = 0.0;
};

/// Per charge id: true positives, false positives and false negatives.
inline std::map<int, Counts> per_charge_counts(const PredictionBatch& batch) {
  std::map<int, Counts> counts;
  for (const auto& c : batch.cases) {
    const std::set<int> pred(c.predicted.begin(), c.predicted.end());
    const std::set<int> gold(c.gold.begin(), c.gold.end());
    for (int p : pred) (gold.count(p) ? counts[p].tp : counts[p].fp) += 1.0;
    for (int g : gold) {
      if (!pred.count(g)) counts[g].fn += 1.0;
    }
  }
  return counts;
}

/// Global TP/FP/FN over all (case, charge) decisions.
inline Prf micro_prf(const PredictionBatch& batch) {
  batch.validate();
  Counts total;
  for (const auto& [id, c] : per_charge_counts(batch)) {
    total.tp += c.tp;
    total.fp += c.fp;
    total.fn += c.fn;
  }
  const double p = safe_div(total.tp, total.tp + total.fp);
  const double r = safe_div(total.tp, total.tp + total.fn);
  return {p, r, harmonic(p, r)};
}

enum class MacroF1 {
  HarmonicOfMacro,  // F1 of macro-P and macro-R
  MeanOfPerCharge,  // arithmetic mean of per-charge F1
};

/// Per-charge precision and recall averaged over the charges that occur in
/// the gold sets.
inline Prf macro_prf(const PredictionBatch& batch, MacroF1 mode = MacroF1::HarmonicOfMacro) {
  batch.validate();
  std::set<int> gold_charges;
  for (const auto& c : batch.cases) gold_charges.insert(c.gold.begin(), c.gold.end());
  const auto counts = per_charge_counts(batch);
  double p_sum = 0.0, r_sum = 0.0, f_sum = 0.0;
  for (int id : gold_charges) {
    const Counts& c = counts.at(id);
    const double p = safe_div(c.tp, c.tp + c.fp);
    const double r = safe_div(c.tp, c.tp + c.fn);
    p_sum += p;
    r_sum += r;
    f_sum += harmonic(p, r);
  }
  const double n = static_cast<double>(gold_charges.size());
  const double p = p_sum / n, r = r_sum / n;
  return {p, r, mode == MacroF1::HarmonicOfMacro ? harmonic(p, r) : f_sum / n};
}

inline void check_aligned(const std::vector<std::vector<ArticleId>>& rankings,
                          const std::vector<std::vector<ArticleId>>& gold_sets) {
  if (rankings.size() != gold_sets.size()) {
    throw ShapeError(std::to_string(rankings.size()) + " rankings but " + std::to_string(gold_sets.size()) +
                     " gold sets");
  }
  if (rankings.empty()) throw DomainError("no rankings to evaluate");
}

/// Fraction of cases whose first-ranked article is gold.
inline double prec_at_1(const std::vector<std::vector<ArticleId>>& rankings,
                        const std::vector<std::vector<ArticleId>>& gold_sets) {
  check_aligned(rankings, gold_sets);
  double hits = 0.0;
  for (std::size_t i = 0; i < rankings.size(); ++i) {
    if (!rankings[i].empty() &&
        std::find(gold_sets[i].begin(), gold_sets[i].end(), rankings[i].front()) != gold_sets[i].end()) {
      hits += 1.0;
    }
  }
  return hits / static_cast<double>(rankings.size());
}

/// Mean over gold items of precision at the item's rank. Gold items missing
/// from the (possibly truncated) ranking contribute zero.
inline double average_precision(const std::vector<ArticleId>& ranking, const std::vector<ArticleId>& gold) {
  if (gold.empty()) return 0.0;
  double found = 0.0, sum = 0.0;
  for (std::size_t r = 0; r < ranking.size(); ++r) {
    if (std::find(gold.begin(), gold.end(), ranking[r]) != gold.end()) {
      found += 1.0;
      sum += found / static_cast<double>(r + 1);
    }
  }
  return sum / static_cast<double>(gold.size());
}

inline double mean_average_precision(const std::vector<std::vector<ArticleId>>& rankings,
                                     const std::vector<std::vector<ArticleId>>& gold_sets) {
  check_aligned(rankings, gold_sets);
  double sum = 0.0;
  for (std::size_t i = 0; i < rankings.size(); ++i) sum += average_precision(rankings[i], gold_sets[i]);
  return sum / static_cast<double>(rankings.size());
}

struct ArticleMetrics {
  double prec_at_1 = 0.0;
  double map = 0.0;
  std::size_t truncated_at = 0;  // longest ranking seen
};

inline std::optional<ArticleMetrics> article_metrics(const PredictionBatch& batch) {
  if (!batch.has_articles()) return std::nullopt;
  std::vector<std::vector<ArticleId>> rankings, gold;
  std::size_t longest = 0;
  for (const auto& c : batch.cases) {
    rankings.push_back(c.ranked_articles);
    gold.push_back(c.gold_articles);
    longest = std::max(longest, c.ranked_articles.size());
  }
  return ArticleMetrics{prec_at_1(rankings, gold), mean_average_precision(rankings, gold), longest};
}

}  // namespace chargenet::eval
