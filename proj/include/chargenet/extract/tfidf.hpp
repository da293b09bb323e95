#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "chargenet/core/errors.hpp"

namespace chargenet::extract {

/// (column, value) pairs with strictly increasing columns.
struct SparseVector {
  std::vector<std::pair<std::uint32_t, double>> entries;

  bool empty() const { return entries.empty(); }
  double norm() const {
    double s = 0.0;
    for (const auto& [c, v] : entries) s += v * v;
    return std::sqrt(s);
  }
};

using TokenList = std::vector<std::string>;

class TfidfModel {
 public:
  TfidfModel() = default;

  /// Columns are assigned in order of first appearance;
  /// idf(w) = ln(N / df(w)).
  static TfidfModel fit(const std::vector<TokenList>& corpus) {
    if (corpus.empty()) throw DomainError("fit_tfidf over an empty corpus");
    TfidfModel m;
    std::vector<std::size_t> df;
    std::vector<std::size_t> last_seen;
    for (std::size_t d = 0; d < corpus.size(); ++d) {
      for (const auto& w : corpus[d]) {
        auto [it, fresh] = m.index_.emplace(w, static_cast<std::uint32_t>(m.tokens_.size()));
        if (fresh) {
          m.tokens_.push_back(w);
          df.push_back(0);
          last_seen.push_back(SIZE_MAX);
        }
        if (last_seen[it->second] != d) {
          last_seen[it->second] = d;
          ++df[it->second];
        }
      }
    }
    m.doc_count_ = corpus.size();
    m.idf_.resize(df.size());
    const double n = static_cast<double>(corpus.size());
    for (std::size_t i = 0; i < df.size(); ++i) m.idf_[i] = std::log(n / static_cast<double>(df[i]));
    return m;
  }

  /// Rebuilds a model from serialized parts.
  static TfidfModel from_parts(std::vector<std::string> tokens, std::vector<double> idf, std::size_t doc_count) {
    if (tokens.size() != idf.size()) throw ShapeError("tf-idf vocabulary and idf table differ in length");
    TfidfModel m;
    m.tokens_ = std::move(tokens);
    m.idf_ = std::move(idf);
    m.doc_count_ = doc_count;
    for (std::size_t i = 0; i < m.tokens_.size(); ++i) {
      if (!m.index_.emplace(m.tokens_[i], static_cast<std::uint32_t>(i)).second) {
        throw ParseError("duplicate vocabulary entry \"" + m.tokens_[i] + "\"");
      }
    }
    return m;
  }

  /// Raw-count tf times idf, L2-normalized. Unknown tokens are dropped; a
  /// column is present whenever its token occurs, even when idf is zero.
  SparseVector transform(const TokenList& doc) const {
    std::unordered_map<std::uint32_t, double> counts;
    for (const auto& w : doc) {
      if (auto it = index_.find(w); it != index_.end()) counts[it->second] += 1.0;
    }
    SparseVector out;
    out.entries.reserve(counts.size());
    for (const auto& [col, tf] : counts) out.entries.emplace_back(col, tf * idf_[col]);
    std::sort(out.entries.begin(), out.entries.end());
    const double n = out.norm();
    if (n > 0.0) {
      for (auto& e : out.entries) e.second /= n;
    }
    return out;
  }

  std::size_t size() const { return tokens_.size(); }
  std::size_t doc_count() const { return doc_count_; }
  const std::vector<std::string>& tokens() const { return tokens_; }
  const std::vector<double>& idf() const { return idf_; }

  double idf(const std::string& token) const {
    auto it = index_.find(token);
    if (it == index_.end()) throw DomainError("token \"" + token + "\" is not in the vocabulary");
    return idf_[it->second];
  }

  std::optional<std::uint32_t> column(const std::string& token) const {
    auto it = index_.find(token);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

 private:
  std::vector<std::string> tokens_;
  std::vector<double> idf_;
  std::unordered_map<std::string, std::uint32_t> index_;
  std::size_t doc_count_ = 0;
};

}  // namespace chargenet::extract
