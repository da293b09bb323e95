#pragma once

#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "chargenet/core/errors.hpp"

namespace chargenet::model {

inline constexpr const char* kUnknown = "<unk>";

/// Dense token ids with the unknown token at id 0.
class Vocabulary {
 public:
  Vocabulary() : items_{kUnknown} { index_.emplace(kUnknown, 0); }

  explicit Vocabulary(const std::vector<std::string>& items) {
    if (items.empty() || items.front() != kUnknown) throw ParseError("vocabulary must start with " + std::string(kUnknown));
    for (const auto& item : items) {
      if (!index_.emplace(item, items_.size()).second) throw ParseError("duplicate vocabulary entry \"" + item + "\"");
      items_.push_back(item);
    }
  }

  /// Adds tokens seen at least `min_count` times, in order of first
  /// appearance.
  static Vocabulary build(const std::vector<std::string>& stream, std::size_t min_count = 1) {
    std::unordered_map<std::string, std::size_t> counts;
    std::vector<std::string> order;
    for (const auto& t : stream) {
      if (counts[t]++ == 0) order.push_back(t);
    }
    Vocabulary v;
    for (const auto& t : order) {
      if (counts[t] >= min_count && t != kUnknown) v.add(t);
    }
    return v;
  }

  std::size_t add(const std::string& token) {
    auto [it, fresh] = index_.emplace(token, items_.size());
    if (fresh) items_.push_back(token);
    return it->second;
  }

  std::size_t id(const std::string& token) const {
    auto it = index_.find(token);
    return it == index_.end() ? 0 : it->second;
  }

  bool contains(const std::string& token) const { return index_.count(token) > 0; }
  std::size_t size() const { return items_.size(); }
  const std::vector<std::string>& items() const { return items_; }
  bool operator==(const Vocabulary& o) const { return items_ == o.items_; }

 private:
  std::vector<std::string> items_;
  std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace chargenet::model
