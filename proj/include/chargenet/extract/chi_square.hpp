#pragma once

#include <algorithm>
#include <numeric>
#include <vector>

#include "chargenet/core/errors.hpp"
#include "chargenet/extract/tfidf.hpp"

namespace chargenet::extract {

/// Pearson chi-square of a 2x2 presence/label table, sum of (O - E)^2 / E
/// over the four cells. Cells with zero expected count contribute nothing.
inline double chi_square_2x2(double present_pos, double present_neg, double absent_pos, double absent_neg) {
  const double n = present_pos + present_neg + absent_pos + absent_neg;
  if (n <= 0.0) return 0.0;
  const double present = present_pos + present_neg;
  const double absent = absent_pos + absent_neg;
  const double pos = present_pos + absent_pos;
  const double neg = present_neg + absent_neg;
  const double observed[4] = {present_pos, present_neg, absent_pos, absent_neg};
  const double expected[4] = {present * pos / n, present * neg / n, absent * pos / n, absent * neg / n};
  double chi = 0.0;
  for (int i = 0; i < 4; ++i) {
    if (expected[i] > 0.0) chi += (observed[i] - expected[i]) * (observed[i] - expected[i]) / expected[i];
  }
  return chi;
}

/// Chi-square of every column in [0, n_columns); a column is present in a
/// document when it has an entry there.
inline std::vector<double> chi_square_scores(const std::vector<SparseVector>& features, const std::vector<bool>& labels,
                                             std::size_t n_columns) {
  if (features.size() != labels.size()) {
    throw ShapeError("chi_square_select: " + std::to_string(features.size()) + " documents but " +
                     std::to_string(labels.size()) + " labels");
  }
  const auto positives = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), true));
  if (positives == 0 || positives == labels.size()) throw DomainError("chi_square_select needs both label classes");
  std::vector<double> present_pos(n_columns, 0.0), present_neg(n_columns, 0.0);
  for (std::size_t d = 0; d < features.size(); ++d) {
    auto& target = labels[d] ? present_pos : present_neg;
    for (const auto& [col, value] : features[d].entries) {
      if (col >= n_columns) throw ShapeError("feature column " + std::to_string(col) + " out of range");
      target[col] += 1.0;
    }
  }
  const double pos = static_cast<double>(positives);
  const double neg = static_cast<double>(labels.size() - positives);
  std::vector<double> scores(n_columns);
  for (std::size_t c = 0; c < n_columns; ++c) {
    scores[c] = chi_square_2x2(present_pos[c], present_neg[c], pos - present_pos[c], neg - present_neg[c]);
  }
  return scores;
}

/// The `top_m` highest-scoring columns, best first, ties to the lower index.
inline std::vector<std::uint32_t> chi_square_select(const std::vector<SparseVector>& features,
                                                    const std::vector<bool>& labels, std::size_t top_m,
                                                    std::size_t n_columns) {
  const auto scores = chi_square_scores(features, labels, n_columns);
  std::vector<std::uint32_t> order(n_columns);
  std::iota(order.begin(), order.end(), 0u);
  const std::size_t m = std::min(top_m, n_columns);
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(m), order.end(),
                    [&](std::uint32_t a, std::uint32_t b) { return scores[a] > scores[b] || (scores[a] == scores[b] && a < b); });
  order.resize(m);
  return order;
}

}  // namespace chargenet::extract
