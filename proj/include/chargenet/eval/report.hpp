#pragma once

#include <algorithm>
#include <cstdio>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "chargenet/eval/metrics.hpp"

namespace chargenet::eval {

struct VariantResult {
  std::string variant;
  PredictionBatch batch;
  double beta = 0.0;
};

struct VariantReport {
  std::string variant;
  std::size_t cases = 0;
  Prf micro;
  Prf macro;
  std::optional<ArticleMetrics> articles;
  double beta = 0.0;  // informational, 0 when not applicable

  bool operator==(const VariantReport& o) const {
    auto same = [](const Prf& a, const Prf& b) {
      return a.precision == b.precision && a.recall == b.recall && a.f1 == b.f1;
    };
    const bool art = articles.has_value() == o.articles.has_value() &&
                     (!articles || (articles->prec_at_1 == o.articles->prec_at_1 && articles->map == o.articles->map &&
                                    articles->truncated_at == o.articles->truncated_at));
    return variant == o.variant && cases == o.cases && same(micro, o.micro) && same(macro, o.macro) && art &&
           beta == o.beta;
  }
};

inline VariantReport summarize(const std::string& variant, const PredictionBatch& batch,
                               MacroF1 mode = MacroF1::HarmonicOfMacro, double beta = 0.0) {
  return {variant, batch.cases.size(), micro_prf(batch), macro_prf(batch, mode), article_metrics(batch), beta};
}

inline nlohmann::json to_json(const VariantReport& r) {
  nlohmann::json j = {{"variant", r.variant},
                      {"cases", r.cases},
                      {"beta", r.beta},
                      {"micro", {{"p", r.micro.precision}, {"r", r.micro.recall}, {"f1", r.micro.f1}}},
                      {"macro", {{"p", r.macro.precision}, {"r", r.macro.recall}, {"f1", r.macro.f1}}}};
  if (r.articles) {
    j["articles"] = {{"prec_at_1", r.articles->prec_at_1}, {"map", r.articles->map}, {"top_k", r.articles->truncated_at}};
  }
  return j;
}

inline VariantReport report_from_json(const nlohmann::json& j) {
  try {
    VariantReport r;
    r.variant = j.at("variant").get<std::string>();
    r.cases = j.at("cases").get<std::size_t>();
    r.beta = j.value("beta", 0.0);
    for (auto [key, prf] : {std::pair{"micro", &r.micro}, std::pair{"macro", &r.macro}}) {
      const auto& m = j.at(key);
      *prf = {m.at("p").get<double>(), m.at("r").get<double>(), m.at("f1").get<double>()};
    }
    if (j.contains("articles")) {
      const auto& a = j.at("articles");
      r.articles = ArticleMetrics{a.at("prec_at_1").get<double>(), a.at("map").get<double>(),
                                  a.at("top_k").get<std::size_t>()};
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("report record: ") + e.what());
  }
}

/// Parses the machine-readable form written by `render_jsonl`; comment and
/// blank lines are skipped.
inline std::vector<VariantReport> parse_jsonl(const std::string& text) {
  std::vector<VariantReport> out;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    try {
      const auto j = nlohmann::json::parse(line);
      if (j.value("kind", std::string("variant")) != "variant") continue;
      out.push_back(report_from_json(j));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(e.what(), line_no);
    } catch (const ParseError& e) {
      throw ParseError(e.what(), line_no);
    }
  }
  return out;
}

struct Comparison {
  std::vector<VariantReport> rows;
  /// micro_f1_delta[i][j] = rows[i].micro.f1 - rows[j].micro.f1, likewise macro.
  std::vector<std::vector<double>> micro_f1_delta;
  std::vector<std::vector<double>> macro_f1_delta;
};

/// Reports every variant and the pairwise F1 differences. All variants must
/// have been evaluated on the same cases with the same gold labels; gold
/// articles are compared where both variants rank articles.
inline Comparison compare_variants(const std::vector<VariantResult>& results,
                                   MacroF1 mode = MacroF1::HarmonicOfMacro) {
  if (results.empty()) throw ValidationError("compare_variants needs at least one variant");
  const auto& ref = results.front().batch.cases;
  for (const auto& r : results) {
    if (r.batch.cases.size() != ref.size()) {
      throw ValidationError("variant " + r.variant + " was evaluated on " + std::to_string(r.batch.cases.size()) +
                            " cases, expected " + std::to_string(ref.size()));
    }
    for (std::size_t i = 0; i < ref.size(); ++i) {
      const auto& a = r.batch.cases[i];
      const bool both_rank = !a.gold_articles.empty() && !ref[i].gold_articles.empty();
      if (a.gold != ref[i].gold || (both_rank && a.gold_articles != ref[i].gold_articles)) {
        throw ValidationError("variant " + r.variant + " disagrees on the gold labels of case " + std::to_string(i));
      }
    }
  }
  Comparison c;
  for (const auto& r : results) c.rows.push_back(summarize(r.variant, r.batch, mode, r.beta));
  const std::size_t n = c.rows.size();
  c.micro_f1_delta.assign(n, std::vector<double>(n, 0.0));
  c.macro_f1_delta.assign(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      c.micro_f1_delta[i][j] = c.rows[i].micro.f1 - c.rows[j].micro.f1;
      c.macro_f1_delta[i][j] = c.rows[i].macro.f1 - c.rows[j].macro.f1;
    }
  }
  return c;
}

namespace detail {

inline std::string pct(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%6.2f", 100.0 * x);
  return buf;
}

inline std::string pad(const std::string& s, std::size_t width) {
  return s.size() >= width ? s : s + std::string(width - s.size(), ' ');
}

}  // namespace detail

/// Aligned plain-text table (percentages), followed by the published
/// reference figures for orientation.
inline std::string render_text(const Comparison& c) {
  std::size_t width = 12;
  for (const auto& r : c.rows) width = std::max(width, r.variant.size() + 2);
  std::ostringstream out;
  out << detail::pad("variant", width) << " micro-P  micro-R micro-F1  macro-P  macro-R macro-F1   Prec@1      MAP\n";
  for (const auto& r : c.rows) {
    out << detail::pad(r.variant, width) << ' ' << detail::pct(r.micro.precision) << "   " << detail::pct(r.micro.recall)
        << "   " << detail::pct(r.micro.f1) << "   " << detail::pct(r.macro.precision) << "   "
        << detail::pct(r.macro.recall) << "   " << detail::pct(r.macro.f1);
    if (r.articles) {
      out << "   " << detail::pct(r.articles->prec_at_1) << "   " << detail::pct(r.articles->map);
    } else {
      out << "        -        -";
    }
    out << '\n';
  }
  if (c.rows.size() > 1) {
    out << "\nmicro-F1 delta (row - column), points\n" << detail::pad("", width);
    for (const auto& r : c.rows) out << ' ' << detail::pad(r.variant, width);
    out << '\n';
    for (std::size_t i = 0; i < c.rows.size(); ++i) {
      out << detail::pad(c.rows[i].variant, width);
      for (std::size_t j = 0; j < c.rows.size(); ++j) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%+.2f", 100.0 * c.micro_f1_delta[i][j]);
        out << ' ' << detail::pad(buf, width);
      }
      out << '\n';
    }
  }
  for (const auto& r : c.rows) {
    if (r.articles) {
      out << "\narticle rankings truncated at top " << r.articles->truncated_at << '\n';
      break;
    }
  }
  out << "\nreference (published, full-scale corpus): FactSupvArt micro-F1 90.21, macro-F1 80.48\n";
  return out.str();
}

/// One JSON record per variant.
inline std::string render_jsonl(const Comparison& c) {
  std::string out;
  for (const auto& r : c.rows) out += to_json(r).dump() + '\n';
  return out;
}

}  // namespace chargenet::eval
