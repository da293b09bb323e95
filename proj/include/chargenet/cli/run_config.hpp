#pragma once

#include <charconv>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "chargenet/corpus/synthetic.hpp"
#include "chargenet/extract/bank.hpp"
#include "chargenet/model/config.hpp"

namespace chargenet::cli {

/// Flat key = value run description. Every key has a default; files and
/// flags may only set known keys.
///
///   # comment
///   variant = FactSupvArt
///   beta = 0.1
class RunConfig {
 public:
  RunConfig() {
    const model::ModelConfig m;
    const corpus::SyntheticSpec s;
    const extract::ExtractorConfig e;
    values_ = {
        {"word_emb_dim", std::to_string(m.word_emb_dim)},
        {"pos_emb_dim", std::to_string(m.pos_emb_dim)},
        {"gru_hidden", std::to_string(m.gru_hidden)},
        {"fc1_dim", std::to_string(m.fc1_dim)},
        {"fc2_dim", std::to_string(m.fc2_dim)},
        {"k", std::to_string(m.k)},
        {"beta", format(m.beta)},
        {"tau", format(m.tau)},
        {"learning_rate", format(m.learning_rate)},
        {"batch_size", std::to_string(m.batch_size)},
        {"variant", model::to_string(m.variant)},
        {"max_epochs", std::to_string(m.max_epochs)},
        {"patience", std::to_string(m.patience)},
        {"init_scale", format(m.init_scale)},
        {"tie_word_encoders", m.tie_word_encoders ? "true" : "false"},
        {"seed", std::to_string(s.seed)},

        {"n_charges", std::to_string(s.n_charges)},
        {"n_articles", std::to_string(s.n_articles)},
        {"min_articles_per_charge", std::to_string(s.min_articles_per_charge)},
        {"max_articles_per_charge", std::to_string(s.max_articles_per_charge)},
        {"core_keywords", std::to_string(s.core_keywords)},
        {"group_size", std::to_string(s.group_size)},
        {"topic_words", std::to_string(s.topic_words)},
        {"article_keywords", std::to_string(s.article_keywords)},
        {"legal_words", std::to_string(s.legal_words)},
        {"noise_words", std::to_string(s.noise_words)},
        {"min_sentences", std::to_string(s.min_sentences)},
        {"max_sentences", std::to_string(s.max_sentences)},
        {"min_sentence_length", std::to_string(s.min_sentence_length)},
        {"max_sentence_length", std::to_string(s.max_sentence_length)},
        {"article_sentences", std::to_string(s.article_sentences)},
        {"min_article_sentence_length", std::to_string(s.min_article_sentence_length)},
        {"max_article_sentence_length", std::to_string(s.max_article_sentence_length)},
        {"keyword_rate", format(s.keyword_rate)},
        {"topic_rate", format(s.topic_rate)},
        {"circumstance_rate", format(s.circumstance_rate)},
        {"multi_charge_probability", format(s.multi_charge_probability)},
        {"charge_skew", format(s.charge_skew)},
        {"charge_mention_rate", format(s.charge_mention_rate)},
        {"train_size", std::to_string(s.train_size)},
        {"valid_size", std::to_string(s.valid_size)},
        {"test_size", std::to_string(s.test_size)},

        {"feature_budget", std::to_string(e.feature_budget)},
        {"extractor_epochs", std::to_string(e.epochs)},
        {"extractor_learning_rate", format(e.learning_rate)},
        {"extractor_l2", format(e.l2)},

        {"data_dir", "data"},
        {"train_path", ""},
        {"valid_path", ""},
        {"test_path", ""},
        {"article_db", ""},
        {"charge_list", ""},
        {"rules_path", ""},
        {"bank_path", ""},
        {"checkpoint", "model.ckpt"},
        {"report", "report.jsonl"},
        {"betas", "0,0.01,0.1,0.5,1"},
    };
  }

  static RunConfig from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file: " + path);
    RunConfig c;
    c.read(in, path);
    return c;
  }

  void read(std::istream& in, const std::string& source = "config") {
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
      ++number;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      if (trim(line).empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos) {
        throw ValidationError(source + ":" + std::to_string(number) + ": expected key = value");
      }
      set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
  }

  void set(const std::string& key, const std::string& value) {
    auto it = values_.find(key);
    if (it == values_.end()) throw ValidationError("unknown configuration key \"" + key + "\"");
    it->second = value;
  }

  /// Applies "key=value".
  void set_assignment(const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos) throw ValidationError("expected key=value, got \"" + assignment + "\"");
    set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
  }

  const std::string& get(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw ValidationError("unknown configuration key \"" + key + "\"");
    return it->second;
  }

  std::size_t get_size(const std::string& key) const {
    const auto& v = get(key);
    std::size_t out = 0;
    const auto [end, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || end != v.data() + v.size()) {
      throw ValidationError(key + " must be a non-negative integer, got \"" + v + "\"");
    }
    return out;
  }

  double get_double(const std::string& key) const {
    const auto& v = get(key);
    try {
      std::size_t used = 0;
      const double out = std::stod(v, &used);
      if (used == v.size()) return out;
    } catch (const std::exception&) {
    }
    throw ValidationError(key + " must be a number, got \"" + v + "\"");
  }

  bool get_bool(const std::string& key) const {
    const auto& v = get(key);
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw ValidationError(key + " must be true or false, got \"" + v + "\"");
  }

  std::vector<double> get_doubles(const std::string& key) const {
    std::vector<double> out;
    std::stringstream ss(get(key));
    std::string item;
    while (std::getline(ss, item, ',')) {
      try {
        out.push_back(std::stod(trim(item)));
      } catch (const std::exception&) {
        throw ValidationError(key + " must be a comma-separated list of numbers");
      }
    }
    if (out.empty()) throw ValidationError(key + " is empty");
    return out;
  }

  model::ModelConfig model_config() const {
    model::ModelConfig m;
    m.word_emb_dim = get_size("word_emb_dim");
    m.pos_emb_dim = get_size("pos_emb_dim");
    m.gru_hidden = get_size("gru_hidden");
    m.fc1_dim = get_size("fc1_dim");
    m.fc2_dim = get_size("fc2_dim");
    m.k = get_size("k");
    m.beta = get_double("beta");
    m.tau = get_double("tau");
    m.learning_rate = get_double("learning_rate");
    m.batch_size = get_size("batch_size");
    m.variant = model::parse_variant(get("variant"));
    m.max_epochs = get_size("max_epochs");
    m.patience = get_size("patience");
    m.init_scale = get_double("init_scale");
    m.tie_word_encoders = get_bool("tie_word_encoders");
    m.seed = get_size("seed");
    m.validate();
    return m;
  }

  corpus::SyntheticSpec synthetic_spec() const {
    corpus::SyntheticSpec s;
    s.n_charges = get_size("n_charges");
    s.n_articles = get_size("n_articles");
    s.min_articles_per_charge = get_size("min_articles_per_charge");
    s.max_articles_per_charge = get_size("max_articles_per_charge");
    s.core_keywords = get_size("core_keywords");
    s.group_size = get_size("group_size");
    s.topic_words = get_size("topic_words");
    s.article_keywords = get_size("article_keywords");
    s.legal_words = get_size("legal_words");
    s.noise_words = get_size("noise_words");
    s.min_sentences = get_size("min_sentences");
    s.max_sentences = get_size("max_sentences");
    s.min_sentence_length = get_size("min_sentence_length");
    s.max_sentence_length = get_size("max_sentence_length");
    s.article_sentences = get_size("article_sentences");
    s.min_article_sentence_length = get_size("min_article_sentence_length");
    s.max_article_sentence_length = get_size("max_article_sentence_length");
    s.keyword_rate = get_double("keyword_rate");
    s.topic_rate = get_double("topic_rate");
    s.circumstance_rate = get_double("circumstance_rate");
    s.multi_charge_probability = get_double("multi_charge_probability");
    s.charge_skew = get_double("charge_skew");
    s.charge_mention_rate = get_double("charge_mention_rate");
    s.train_size = get_size("train_size");
    s.valid_size = get_size("valid_size");
    s.test_size = get_size("test_size");
    s.seed = get_size("seed");
    s.validate();
    return s;
  }

  extract::ExtractorConfig extractor_config() const {
    extract::ExtractorConfig e;
    e.feature_budget = get_size("feature_budget");
    e.epochs = get_size("extractor_epochs");
    e.learning_rate = get_double("extractor_learning_rate");
    e.l2 = get_double("extractor_l2");
    e.k = get_size("k");
    e.seed = get_size("seed");
    e.validate();
    return e;
  }

  /// A path key, falling back to `file` inside data_dir when unset.
  std::string path(const std::string& key, const std::string& file) const {
    const auto& v = get(key);
    return v.empty() ? (std::filesystem::path(get("data_dir")) / file).string() : v;
  }
  std::string train_path() const { return path("train_path", "train.jsonl"); }
  std::string valid_path() const { return path("valid_path", "valid.jsonl"); }
  std::string test_path() const { return path("test_path", "test.jsonl"); }
  std::string article_db_path() const { return path("article_db", "articles.jsonl"); }
  std::string charge_list_path() const { return path("charge_list", "charges.txt"); }
  std::string rules_path() const { return path("rules_path", "rules.json"); }
  std::string bank_path() const { return path("bank_path", "bank.json"); }

  const std::map<std::string, std::string>& values() const { return values_; }

  /// Shortest text that parses back to `v`.
  static std::string format(double v) {
    char buf[32];
    const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, end);
  }

 private:
  static std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
  }

  std::map<std::string, std::string> values_;
};

}  // namespace chargenet::cli
