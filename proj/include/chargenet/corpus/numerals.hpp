#pragma once

#include <string>
#include <string_view>

#include "chargenet/core/errors.hpp"
#include "chargenet/core/utf8.hpp"

namespace chargenet::corpus {

namespace detail {

inline int numeral_digit(char32_t c) {
  switch (c) {
    case U'零': case U'〇': return 0;
    case U'一': return 1;
    case U'二': case U'两': return 2;
    case U'三': return 3;
    case U'四': return 4;
    case U'五': return 5;
    case U'六': return 6;
    case U'七': return 7;
    case U'八': return 8;
    case U'九': return 9;
    default: break;
  }
  if (c >= U'0' && c <= U'9') return static_cast<int>(c - U'0');
  return -1;
}

inline int numeral_unit(char32_t c) {
  switch (c) {
    case U'十': return 10;
    case U'百': return 100;
    case U'千': return 1000;
    default: return 0;
  }
}

}  // namespace detail

/// Parses numerals written either in Arabic digits ("234"), positional
/// Chinese digits ("二三四", "二〇一七") or with unit characters
/// ("二百三十四", "三百零二", "十二"). A bare leading 十 means ten.
inline int chinese_numeral_to_int(std::string_view text) {
  const std::u32string s = utf8::decode(text);
  const std::string quoted = "\"" + std::string(text) + "\"";
  if (s.empty()) throw ParseError("empty numeral");

  bool has_unit = false;
  for (char32_t c : s) {
    if (detail::numeral_unit(c)) {
      has_unit = true;
    } else if (detail::numeral_digit(c) < 0) {
      throw ParseError("malformed numeral " + quoted + ": unexpected character");
    }
  }

  if (!has_unit) {
    if (s.size() > 9) throw ParseError("numeral " + quoted + " is too long");
    int value = 0;
    for (char32_t c : s) value = value * 10 + detail::numeral_digit(c);
    return value;
  }

  int total = 0;
  int pending = -1;
  int last_unit = 10000;
  bool zero_gap = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const char32_t c = s[i];
    if (const int unit = detail::numeral_unit(c)) {
      if (unit >= last_unit) throw ParseError("malformed numeral " + quoted + ": units out of order");
      if (pending < 0) {
        if (unit != 10 || i != 0) throw ParseError("malformed numeral " + quoted + ": unit without a digit");
        pending = 1;
      }
      if (zero_gap && unit * 10 >= last_unit) throw ParseError("malformed numeral " + quoted + ": zero skips no position");
      total += pending * unit;
      pending = -1;
      last_unit = unit;
      zero_gap = false;
      continue;
    }
    const int d = detail::numeral_digit(c);
    if (pending >= 0) throw ParseError("malformed numeral " + quoted + ": consecutive digits");
    if (d == 0) {
      if (zero_gap || i + 1 == s.size()) throw ParseError("malformed numeral " + quoted + ": misplaced zero");
      zero_gap = true;
      continue;
    }
    pending = d;
  }
  if (pending > 0) {
    // A trailing digit belongs to the position right below the last unit
    // unless a zero marked a gap, in which case it is the ones digit.
    if (!zero_gap && last_unit > 10) throw ParseError("malformed numeral " + quoted + ": abbreviated trailing digit");
    if (zero_gap && last_unit < 100) throw ParseError("malformed numeral " + quoted + ": zero skips no position");
    total += pending;
  }
  return total;
}

/// Writes 1..9999 in the formal style used by statute citations:
/// 10 -> 十, 110 -> 一百一十, 302 -> 三百零二.
inline std::string int_to_chinese_numeral(int n) {
  if (n < 1 || n > 9999) throw DomainError("numeral out of range: " + std::to_string(n));
  static constexpr const char* kDigits[] = {"零", "一", "二", "三", "四", "五", "六", "七", "八", "九"};
  static constexpr const char* kUnits[] = {"千", "百", "十", ""};
  static constexpr int kValues[] = {1000, 100, 10, 1};
  std::string out;
  bool started = false;
  bool gap = false;
  for (int i = 0; i < 4; ++i) {
    const int d = n / kValues[i] % 10;
    if (d == 0) {
      gap = started;
      continue;
    }
    if (gap) out += kDigits[0];
    gap = false;
    if (!(kValues[i] == 10 && d == 1 && !started)) out += kDigits[d];
    out += kUnits[i];
    started = true;
  }
  return out;
}

}  // namespace chargenet::corpus
