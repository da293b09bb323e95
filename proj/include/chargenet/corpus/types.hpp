#pragma once

#include <compare>
#include <string>
#include <vector>

#include "chargenet/core/errors.hpp"

namespace chargenet::corpus {

/// A Criminal Law provision: article number plus an optional 之N suffix.
struct ArticleId {
  int number = 0;
  int sub = 0;

  auto operator<=>(const ArticleId&) const = default;

  std::string str() const { return sub ? std::to_string(number) + "-" + std::to_string(sub) : std::to_string(number); }

  /// Inverse of str(): "234" or "133-1".
  static ArticleId parse(const std::string& text) {
    ArticleId id;
    std::size_t pos = 0;
    try {
      id.number = std::stoi(text, &pos);
      if (pos < text.size()) {
        if (text[pos] != '-') throw ParseError("");
        std::size_t sub_pos = 0;
        id.sub = std::stoi(text.substr(pos + 1), &sub_pos);
        if (pos + 1 + sub_pos != text.size()) throw ParseError("");
      }
    } catch (const std::exception&) {
      throw ParseError("malformed article id \"" + text + "\"");
    }
    if (id.number <= 0 || id.sub < 0) throw ParseError("malformed article id \"" + text + "\"");
    return id;
  }
};

struct Token {
  std::string word;
  std::string pos;

  bool operator==(const Token&) const = default;
};

using Sentence = std::vector<Token>;

struct JudgementDoc {
  std::string id;
  std::string text;
};

struct CaseRecord {
  std::string id;
  std::vector<Sentence> fact;
  std::vector<int> charges;          // sorted, unique
  std::vector<ArticleId> articles;   // sorted, unique

  bool operator==(const CaseRecord&) const = default;

  std::size_t token_count() const {
    std::size_t n = 0;
    for (const auto& s : fact) n += s.size();
    return n;
  }

  void validate() const {
    const std::string where = id.empty() ? std::string("case") : "case " + id;
    if (fact.empty()) throw ValidationError(where + " has no fact sentences");
    for (const auto& s : fact) {
      if (s.empty()) throw ValidationError(where + " has an empty sentence");
    }
    if (charges.empty()) throw ValidationError(where + " has no charges");
    if (articles.empty()) throw ValidationError(where + " has no articles");
  }
};

}  // namespace chargenet::corpus
