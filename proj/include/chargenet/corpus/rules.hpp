#pragma once

#include <algorithm>
#include <fstream>
#include <regex>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "chargenet/core/errors.hpp"
#include "chargenet/core/utf8.hpp"
#include "chargenet/corpus/numerals.hpp"
#include "chargenet/corpus/types.hpp"

namespace chargenet::corpus {

inline constexpr const char* kArticlePattern = "第[、零〇一二两三四五六七八九十百千0-9]+条(之[一二两三四五六七八九十])?";
inline constexpr const char* kMaskToken = "[MASK]";

struct RuleSet {
  std::vector<std::string> fact_indicators;
  std::vector<std::string> view_indicators;
  std::vector<std::string> decision_indicators;
  std::vector<std::string> charge_list;
  std::string article_pattern = kArticlePattern;

  void validate() const {
    if (fact_indicators.empty()) throw ValidationError("rule set has no fact indicators");
    if (view_indicators.empty()) throw ValidationError("rule set has no court-view indicators");
    if (decision_indicators.empty()) throw ValidationError("rule set has no decision indicators");
    for (const auto* list : {&fact_indicators, &view_indicators, &decision_indicators}) {
      for (const auto& clause : *list) {
        if (clause.empty()) throw ValidationError("rule set contains an empty indicator clause");
      }
    }
    std::set<std::string> seen;
    for (const auto& name : charge_list) {
      if (name.empty()) throw ValidationError("rule set contains an empty charge name");
      if (!seen.insert(name).second) throw ValidationError("duplicate charge name \"" + name + "\"");
    }
    try {
      std::wregex(utf8::to_wide(article_pattern));
    } catch (const std::regex_error& e) {
      throw ValidationError(std::string("invalid article pattern: ") + e.what());
    }
  }
};

/// The clauses visible in a typical criminal judgement: the prosecution's
/// accusation or the court's findings open the facts, "本院认为" opens the
/// court view and "判决如下" opens the decision.
inline RuleSet default_rules(std::vector<std::string> charge_list = {}) {
  RuleSet r;
  r.fact_indicators = {"经审理查明", "公诉机关指控"};
  r.view_indicators = {"本院认为"};
  r.decision_indicators = {"判决如下"};
  r.charge_list = std::move(charge_list);
  return r;
}

inline nlohmann::json to_json(const RuleSet& r) {
  return {{"format_version", 1},
          {"fact_indicators", r.fact_indicators},
          {"view_indicators", r.view_indicators},
          {"decision_indicators", r.decision_indicators},
          {"charges", r.charge_list},
          {"article_pattern", r.article_pattern}};
}

inline RuleSet rules_from_json(const nlohmann::json& j) {
  RuleSet r;
  try {
    if (j.value("format_version", 1) != 1) throw ParseError("unsupported rule set version");
    r.fact_indicators = j.at("fact_indicators").get<std::vector<std::string>>();
    r.view_indicators = j.at("view_indicators").get<std::vector<std::string>>();
    r.decision_indicators = j.at("decision_indicators").get<std::vector<std::string>>();
    r.charge_list = j.value("charges", std::vector<std::string>{});
    r.article_pattern = j.value("article_pattern", std::string(kArticlePattern));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("rule set: ") + e.what());
  }
  r.validate();
  return r;
}

inline RuleSet load_rules(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open rule set " + path);
  try {
    return rules_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError("rule set " + path + ": " + e.what());
  }
}

inline void save_rules(const std::string& path, const RuleSet& rules) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write rule set " + path);
  out << to_json(rules).dump(2) << '\n';
}

struct Segments {
  std::string fact;
  std::string view;
  std::string decision;
};

namespace detail {

struct IndicatorHit {
  std::size_t begin = std::string::npos;
  std::size_t end = std::string::npos;
};

inline IndicatorHit first_hit(const std::string& text, const std::vector<std::string>& clauses) {
  IndicatorHit best;
  for (const auto& clause : clauses) {
    const auto pos = text.find(clause);
    if (pos != std::string::npos && (pos < best.begin || (pos == best.begin && pos + clause.size() > best.end))) {
      best = {pos, pos + clause.size()};
    }
  }
  return best;
}

}  // namespace detail

/// Splits a judgement at the first occurrence of each indicator class. The
/// indicator clauses themselves belong to no segment.
inline Segments segment(const JudgementDoc& doc, const RuleSet& rules) {
  const auto fact = detail::first_hit(doc.text, rules.fact_indicators);
  const auto view = detail::first_hit(doc.text, rules.view_indicators);
  const auto decision = detail::first_hit(doc.text, rules.decision_indicators);
  const std::string where = doc.id.empty() ? std::string() : " in " + doc.id;
  if (fact.begin == std::string::npos) throw SegmentationError("fact indicator not found" + where);
  if (view.begin == std::string::npos) throw SegmentationError("court-view indicator not found" + where);
  if (decision.begin == std::string::npos) throw SegmentationError("decision indicator not found" + where);
  if (!(fact.end <= view.begin)) throw SegmentationError("court-view indicator precedes the fact part" + where);
  if (!(view.end <= decision.begin)) throw SegmentationError("decision indicator precedes the court-view part" + where);
  return {doc.text.substr(fact.end, view.begin - fact.end), doc.text.substr(view.end, decision.begin - view.end),
          doc.text.substr(decision.end)};
}

/// Every match of the article pattern, as unique ids in order of first
/// appearance. A run such as "第六十七条、第六十八条" yields two matches;
/// a run such as "第二十五条、二十六条" inside one match is split on 、.
inline std::vector<ArticleId> extract_articles(const std::string& court_view, const RuleSet& rules) {
  const std::wregex pattern(utf8::to_wide(rules.article_pattern));
  const std::wstring text = utf8::to_wide(court_view);
  std::vector<ArticleId> out;
  auto push = [&out](ArticleId id) {
    if (std::find(out.begin(), out.end(), id) == out.end()) out.push_back(id);
  };
  for (auto it = std::wsregex_iterator(text.begin(), text.end(), pattern); it != std::wsregex_iterator(); ++it) {
    const std::wstring match = it->str();
    const auto open = match.find(L'第');
    const auto close = match.find(L'条');
    if (open == std::wstring::npos || close == std::wstring::npos || close <= open + 1) continue;
    int sub = 0;
    const auto zhi = match.find(L'之', close);
    if (zhi != std::wstring::npos && zhi + 1 < match.size()) {
      sub = chinese_numeral_to_int(utf8::from_wide(match.substr(zhi + 1)));
    }
    const std::wstring numbers = match.substr(open + 1, close - open - 1);
    std::vector<std::wstring> parts;
    std::size_t start = 0;
    while (start <= numbers.size()) {
      const auto sep = numbers.find(L'、', start);
      const auto end = sep == std::wstring::npos ? numbers.size() : sep;
      if (end > start) parts.push_back(numbers.substr(start, end - start));
      if (sep == std::wstring::npos) break;
      start = sep + 1;
    }
    for (std::size_t i = 0; i < parts.size(); ++i) {
      const int number = chinese_numeral_to_int(utf8::from_wide(parts[i]));
      if (number <= 0) continue;
      push({number, i + 1 == parts.size() ? sub : 0});
    }
  }
  return out;
}

namespace detail {

/// Longest charge name starting at byte offset `pos`, or npos.
inline std::size_t longest_charge_at(const std::string& text, std::size_t pos, const std::vector<std::string>& names,
                                     std::size_t& length) {
  std::size_t best = std::string::npos;
  length = 0;
  for (std::size_t i = 0; i < names.size(); ++i) {
    const auto& name = names[i];
    if (name.size() > length && text.compare(pos, name.size(), name) == 0) {
      best = i;
      length = name.size();
    }
  }
  return best;
}

}  // namespace detail

/// Left-to-right longest-match scan; returns the sorted ids of every charge
/// name found.
inline std::vector<int> extract_charges(const std::string& decision, const std::vector<std::string>& charge_list) {
  if (charge_list.empty()) throw ValidationError("charge list is empty");
  std::set<int> found;
  for (std::size_t pos = 0; pos < decision.size();) {
    std::size_t len = 0;
    const auto id = detail::longest_charge_at(decision, pos, charge_list, len);
    if (id == std::string::npos) {
      ++pos;
      continue;
    }
    found.insert(static_cast<int>(id));
    pos += len;
  }
  if (found.empty()) throw ExtractionError("decision names no charge from the charge list");
  return {found.begin(), found.end()};
}

inline std::string mask_charges(const std::string& fact, const std::vector<std::string>& charge_list) {
  std::string out;
  out.reserve(fact.size());
  for (std::size_t pos = 0; pos < fact.size();) {
    std::size_t len = 0;
    if (detail::longest_charge_at(fact, pos, charge_list, len) == std::string::npos) {
      out.push_back(fact[pos++]);
      continue;
    }
    out += kMaskToken;
    pos += len;
  }
  return out;
}

}  // namespace chargenet::corpus
