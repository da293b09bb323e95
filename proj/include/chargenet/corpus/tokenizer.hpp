#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "chargenet/core/utf8.hpp"
#include "chargenet/corpus/rules.hpp"
#include "chargenet/corpus/types.hpp"

namespace chargenet::corpus {

inline bool is_sentence_end(char32_t c) {
  switch (c) {
    case U'。': case U'！': case U'？': case U'；': case U'!': case U'?': case U';': case U'\n':
      return true;
    default:
      return false;
  }
}

inline bool is_punctuation(char32_t c) {
  if (is_sentence_end(c)) return true;
  if (c < 0x80) return (c >= 0x21 && c <= 0x2F) || (c >= 0x3A && c <= 0x40) || (c >= 0x5B && c <= 0x60) ||
                       (c >= 0x7B && c <= 0x7E);
  if (c >= 0x3000 && c <= 0x303F) return true;  // CJK symbols and punctuation
  if (c >= 0xFF01 && c <= 0xFF0F) return true;  // fullwidth ASCII punctuation
  if (c >= 0xFF1A && c <= 0xFF20) return true;
  switch (c) {
    case U'“': case U'”': case U'‘': case U'’': case U'…': case U'—': case U'·':
      return true;
    default:
      return false;
  }
}

inline bool is_space(char32_t c) { return c == U' ' || c == U'\t' || c == U'\r' || c == U'　' || c == U'\n'; }

class Tokenizer {
 public:
  virtual ~Tokenizer() = default;
  /// Sentences of (word, POS) tokens; empty sentences are dropped.
  virtual std::vector<Sentence> tokenize(std::string_view text) const = 0;
};

/// Splits on whitespace and punctuation, ends sentences at 。！？； and
/// newlines, and tags every token with one fixed POS tag. The mask token is
/// kept whole.
class SimpleTokenizer final : public Tokenizer {
 public:
  explicit SimpleTokenizer(std::string tag = "x") : tag_(std::move(tag)) {}

  std::vector<Sentence> tokenize(std::string_view text) const override {
    const std::u32string s = utf8::decode(text);
    const std::u32string mask = utf8::decode(kMaskToken);
    std::vector<Sentence> out;
    Sentence sentence;
    std::u32string word;
    auto flush_word = [&] {
      if (!word.empty()) sentence.push_back({utf8::encode(word), tag_});
      word.clear();
    };
    auto flush_sentence = [&] {
      flush_word();
      if (!sentence.empty()) out.push_back(std::move(sentence));
      sentence.clear();
    };
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (s.compare(i, mask.size(), mask) == 0) {
        flush_word();
        sentence.push_back({kMaskToken, tag_});
        i += mask.size() - 1;
        continue;
      }
      const char32_t c = s[i];
      if (is_sentence_end(c)) {
        flush_sentence();
      } else if (is_space(c) || is_punctuation(c)) {
        flush_word();
      } else {
        word.push_back(c);
      }
    }
    flush_sentence();
    return out;
  }

 private:
  std::string tag_;
};

/// Reads externally segmented and tagged text: whitespace-separated
/// "word/POS" items, as produced by common Chinese NLP pipelines. A
/// sentence-final punctuation word closes the sentence; other punctuation
/// words are dropped. Items without a slash get the fallback tag.
class PretaggedTokenizer final : public Tokenizer {
 public:
  explicit PretaggedTokenizer(std::string fallback_tag = "x") : fallback_(std::move(fallback_tag)) {}

  std::vector<Sentence> tokenize(std::string_view text) const override {
    std::vector<Sentence> out;
    Sentence sentence;
    std::size_t pos = 0;
    while (pos < text.size()) {
      while (pos < text.size() && (text[pos] == ' ' || text[pos] == '\t' || text[pos] == '\r' || text[pos] == '\n')) {
        if (text[pos] == '\n' && !sentence.empty()) {
          out.push_back(std::move(sentence));
          sentence.clear();
        }
        ++pos;
      }
      if (pos >= text.size()) break;
      std::size_t end = pos;
      while (end < text.size() && text[end] != ' ' && text[end] != '\t' && text[end] != '\r' && text[end] != '\n') ++end;
      const std::string_view item = text.substr(pos, end - pos);
      pos = end;
      const auto slash = item.rfind('/');
      Token token;
      if (slash == std::string_view::npos || slash == 0 || slash + 1 == item.size()) {
        token = {std::string(item), fallback_};
      } else {
        token = {std::string(item.substr(0, slash)), std::string(item.substr(slash + 1))};
      }
      const std::u32string w = utf8::decode(token.word);
      if (w.size() == 1 && is_sentence_end(w[0])) {
        if (!sentence.empty()) out.push_back(std::move(sentence));
        sentence.clear();
      } else if (w.size() == 1 && is_punctuation(w[0])) {
        continue;
      } else {
        sentence.push_back(std::move(token));
      }
    }
    if (!sentence.empty()) out.push_back(std::move(sentence));
    return out;
  }

 private:
  std::string fallback_;
};

}  // namespace chargenet::corpus
