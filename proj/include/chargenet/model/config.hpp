#pragma once

#include <cstdint>
#include <string>

#include "chargenet/core/errors.hpp"

namespace chargenet::model {

enum class Variant { FactOnly, ArtOnly, FactArt, FactSupvArt, FactGoldArt };

inline std::string to_string(Variant v) {
  switch (v) {
    case Variant::FactOnly: return "FactOnly";
    case Variant::ArtOnly: return "ArtOnly";
    case Variant::FactArt: return "FactArt";
    case Variant::FactSupvArt: return "FactSupvArt";
    case Variant::FactGoldArt: return "FactGoldArt";
  }
  return "?";
}

inline Variant parse_variant(const std::string& name) {
  for (Variant v : {Variant::FactOnly, Variant::ArtOnly, Variant::FactArt, Variant::FactSupvArt, Variant::FactGoldArt}) {
    if (to_string(v) == name) return v;
  }
  throw ValidationError("unknown variant \"" + name +
                        "\" (expected FactOnly, ArtOnly, FactArt, FactSupvArt or FactGoldArt)");
}

/// Whether the variant encodes articles at all.
inline bool uses_articles(Variant v) { return v != Variant::FactOnly; }
/// Whether its article slots come from the top-k extractor.
inline bool uses_extractor(Variant v) {
  return v == Variant::ArtOnly || v == Variant::FactArt || v == Variant::FactSupvArt;
}

struct ModelConfig {
  std::size_t word_emb_dim = 100;
  std::size_t pos_emb_dim = 50;
  std::size_t gru_hidden = 75;
  std::size_t fc1_dim = 200;
  std::size_t fc2_dim = 150;
  std::size_t k = 20;
  double beta = 0.1;
  double tau = 0.4;
  double learning_rate = 0.1;
  std::size_t batch_size = 8;
  Variant variant = Variant::FactSupvArt;

  std::size_t max_epochs = 30;
  std::size_t patience = 5;
  std::uint64_t seed = 1;
  double init_scale = 0.08;
  /// Article sentences reuse the fact encoder's word-level Bi-GRU.
  bool tie_word_encoders = false;

  /// The attention loss weight actually applied: only the supervised
  /// variant trains its article attention.
  double effective_beta() const { return variant == Variant::FactSupvArt ? beta : 0.0; }

  void validate() const {
    for (auto [name, v] : {std::pair{"word_emb_dim", word_emb_dim}, std::pair{"pos_emb_dim", pos_emb_dim},
                           std::pair{"gru_hidden", gru_hidden}, std::pair{"fc1_dim", fc1_dim},
                           std::pair{"fc2_dim", fc2_dim}, std::pair{"k", k}, std::pair{"batch_size", batch_size},
                           std::pair{"max_epochs", max_epochs}}) {
      if (v == 0) throw ValidationError(std::string(name) + " must be positive");
    }
    if (!(beta >= 0.0)) throw ValidationError("beta must be non-negative");
    if (!(tau > 0.0 && tau < 1.0)) throw ValidationError("tau must lie in (0, 1)");
    if (!(learning_rate > 0.0)) throw ValidationError("learning_rate must be positive");
    if (!(init_scale > 0.0)) throw ValidationError("init_scale must be positive");
  }
};

}  // namespace chargenet::model
