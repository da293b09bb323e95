#pragma once

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "chargenet/core/errors.hpp"
#include "chargenet/core/log.hpp"
#include "chargenet/corpus/rules.hpp"
#include "chargenet/corpus/tokenizer.hpp"
#include "chargenet/corpus/types.hpp"

namespace chargenet::corpus {

inline nlohmann::json to_json(const CaseRecord& c) {
  nlohmann::json fact = nlohmann::json::array();
  for (const auto& sentence : c.fact) {
    nlohmann::json s = nlohmann::json::array();
    for (const auto& t : sentence) s.push_back({t.word, t.pos});
    fact.push_back(std::move(s));
  }
  nlohmann::json articles = nlohmann::json::array();
  for (const auto& a : c.articles) articles.push_back(a.str());
  return {{"id", c.id}, {"fact", std::move(fact)}, {"charges", c.charges}, {"articles", std::move(articles)}};
}

inline CaseRecord case_from_json(const nlohmann::json& j) {
  CaseRecord c;
  try {
    c.id = j.value("id", std::string());
    for (const auto& s : j.at("fact")) {
      Sentence sentence;
      for (const auto& t : s) sentence.push_back({t.at(0).get<std::string>(), t.at(1).get<std::string>()});
      c.fact.push_back(std::move(sentence));
    }
    c.charges = j.at("charges").get<std::vector<int>>();
    for (const auto& a : j.at("articles")) c.articles.push_back(ArticleId::parse(a.get<std::string>()));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(e.what());
  }
  std::sort(c.charges.begin(), c.charges.end());
  c.charges.erase(std::unique(c.charges.begin(), c.charges.end()), c.charges.end());
  std::sort(c.articles.begin(), c.articles.end());
  c.articles.erase(std::unique(c.articles.begin(), c.articles.end()), c.articles.end());
  for (int id : c.charges) {
    if (id < 0) throw ParseError("negative charge id");
  }
  try {
    c.validate();
  } catch (const ValidationError& e) {
    throw ParseError(e.what());
  }
  return c;
}

inline void save_dataset(const std::string& path, const std::vector<CaseRecord>& cases) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write dataset " + path);
  for (const auto& c : cases) out << to_json(c).dump() << '\n';
  if (!out) throw IoError("write failed for dataset " + path);
}

/// One JSON record per line; blank lines are skipped. Errors carry the
/// 1-based line number.
inline std::vector<CaseRecord> load_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open dataset " + path);
  std::vector<CaseRecord> cases;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      cases.push_back(case_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path + ": " + e.what(), line_no);
    } catch (const ParseError& e) {
      throw ParseError(path + ": " + e.what(), line_no);
    }
  }
  if (cases.empty()) log::warn("dataset " + path + " is empty");
  return cases;
}

inline void save_lines(const std::string& path, const std::vector<std::string>& lines) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  for (const auto& l : lines) out << l << '\n';
}

inline std::vector<std::string> load_lines(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) out.push_back(line);
  }
  return out;
}

/// Article id to article text.
using ArticleDb = std::map<ArticleId, std::string>;

inline void save_article_db(const std::string& path, const ArticleDb& db) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write article db " + path);
  for (const auto& [id, text] : db) out << nlohmann::json{{"id", id.str()}, {"text", text}}.dump() << '\n';
}

inline ArticleDb load_article_db(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open article db " + path);
  ArticleDb db;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      const auto id = ArticleId::parse(j.at("id").get<std::string>());
      if (!db.emplace(id, j.at("text").get<std::string>()).second) {
        throw ParseError("duplicate article " + id.str());
      }
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path + ": " + e.what(), line_no);
    } catch (const ParseError& e) {
      throw ParseError(path + ": " + e.what(), line_no);
    }
  }
  return db;
}

/// Segments a judgement, extracts its articles and charges, masks charge
/// names in the facts and tokenizes them.
inline CaseRecord assemble_case(const JudgementDoc& doc, const RuleSet& rules, const Tokenizer& tokenizer) {
  const Segments parts = segment(doc, rules);
  CaseRecord c;
  c.id = doc.id;
  c.articles = extract_articles(parts.view, rules);
  std::sort(c.articles.begin(), c.articles.end());
  c.charges = extract_charges(parts.decision, rules.charge_list);
  c.fact = tokenizer.tokenize(mask_charges(parts.fact, rules.charge_list));
  if (c.articles.empty()) throw ExtractionError("court view of " + doc.id + " cites no article");
  if (c.fact.empty()) throw ExtractionError("fact part of " + doc.id + " is empty");
  return c;
}

inline constexpr const char* kNegativeCharge = "<other>";
inline constexpr std::size_t kDefaultMinChargeCount = 80;

struct ChargeFilterResult {
  std::vector<std::string> charge_list;
  std::size_t negative_cases = 0;
};

/// Keeps the charges seen more than `min_count` times in `train` and renumbers
/// them densely in their original order. Rare charges are removed from every
/// case in every split; a case left without charges is labelled with an
/// appended negative class.
inline ChargeFilterResult filter_rare_charges(std::vector<std::vector<CaseRecord>*> splits,
                                              const std::vector<std::string>& charge_list,
                                              std::size_t min_count = kDefaultMinChargeCount) {
  if (splits.empty()) throw ValidationError("filter_rare_charges needs the training split");
  std::vector<std::size_t> counts(charge_list.size(), 0);
  for (const auto& c : *splits.front()) {
    for (int id : c.charges) {
      if (id < 0 || static_cast<std::size_t>(id) >= charge_list.size()) {
        throw ValidationError("case " + c.id + " has charge id " + std::to_string(id) + " outside the charge list");
      }
      ++counts[id];
    }
  }
  ChargeFilterResult result;
  std::vector<int> remap(charge_list.size(), -1);
  for (std::size_t i = 0; i < charge_list.size(); ++i) {
    if (counts[i] > min_count) {
      remap[i] = static_cast<int>(result.charge_list.size());
      result.charge_list.push_back(charge_list[i]);
    }
  }
  const int negative = static_cast<int>(result.charge_list.size());
  for (auto* split : splits) {
    for (auto& c : *split) {
      std::vector<int> kept;
      for (int id : c.charges) {
        if (id >= 0 && static_cast<std::size_t>(id) < remap.size() && remap[id] >= 0) kept.push_back(remap[id]);
      }
      if (kept.empty()) {
        kept.push_back(negative);
        ++result.negative_cases;
      }
      c.charges = std::move(kept);
    }
  }
  if (result.negative_cases > 0) result.charge_list.push_back(kNegativeCharge);
  return result;
}

}  // namespace chargenet::corpus
