#pragma once

#include <chrono>
#include <filesystem>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "chargenet/cli/run_config.hpp"
#include "chargenet/corpus/dataset.hpp"
#include "chargenet/eval/report.hpp"
#include "chargenet/model/io.hpp"
#include "chargenet/model/train.hpp"
#include "chargenet/tensor/grad_check.hpp"

namespace chargenet::cli {

enum ExitCode : int { kSuccess = 0, kRuntimeFailure = 1, kValidationFailure = 2 };

inline void require_file(const std::string& path, const std::string& what) {
  if (!std::filesystem::is_regular_file(path)) throw IoError(what + " not found: " + path);
}

inline void ensure_parent(const std::string& path) {
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
}

inline std::vector<corpus::ArticleId> article_ids(const corpus::ArticleDb& db) {
  std::vector<corpus::ArticleId> out;
  for (const auto& [id, text] : db) out.push_back(id);
  return out;
}

/// Writes train/valid/test, the article database, the charge list and the
/// rule set into data_dir.
inline int cmd_gen_data(const RunConfig& cfg) {
  const auto spec = cfg.synthetic_spec();
  log::info("generating " + std::to_string(spec.train_size) + "/" + std::to_string(spec.valid_size) + "/" +
                            std::to_string(spec.test_size) + " cases, seed " + std::to_string(spec.seed));
  const auto corpus = corpus::generate_synthetic(spec);
  for (const auto& p : {cfg.train_path(), cfg.valid_path(), cfg.test_path(), cfg.article_db_path(), cfg.charge_list_path(),
                        cfg.rules_path()}) {
    ensure_parent(p);
  }
  corpus::save_dataset(cfg.train_path(), corpus.train);
  corpus::save_dataset(cfg.valid_path(), corpus.valid);
  corpus::save_dataset(cfg.test_path(), corpus.test);
  corpus::save_article_db(cfg.article_db_path(), corpus.articles);
  corpus::save_lines(cfg.charge_list_path(), corpus.charge_names);
  corpus::save_rules(cfg.rules_path(), corpus.rules);
  log::info("wrote " + cfg.get("data_dir"));
  return kSuccess;
}

inline extract::ExtractorBank train_bank(const RunConfig& cfg, const std::vector<corpus::CaseRecord>& train,
                                         const corpus::ArticleDb& articles) {
  return extract::ExtractorBank::train(train, article_ids(articles), cfg.extractor_config());
}

inline int cmd_train_extractor(const RunConfig& cfg) {
  require_file(cfg.train_path(), "training set");
  require_file(cfg.article_db_path(), "article database");
  const auto train = corpus::load_dataset(cfg.train_path());
  const auto articles = corpus::load_article_db(cfg.article_db_path());
  const auto bank = train_bank(cfg, train, articles);
  ensure_parent(cfg.bank_path());
  extract::save_bank(cfg.bank_path(), bank);
  if (std::filesystem::is_regular_file(cfg.valid_path())) {
    const auto valid = corpus::load_dataset(cfg.valid_path());
    std::vector<std::vector<corpus::ArticleId>> got, gold;
    for (const auto& c : valid) {
      got.push_back(extract::extraction_ids(bank.extract_top_k(c)));
      gold.push_back(c.articles);
    }
    std::vector<std::size_t> ks;
    for (std::size_t k : {1, 3, 5, 10, 20}) {
      if (k <= bank.k()) ks.push_back(k);
    }
    const auto recall = extract::recall_at_k(got, gold, ks);
    std::ostringstream os;
    for (std::size_t i = 0; i < ks.size(); ++i) os << " recall@" << ks[i] << "=" << recall[i];
    log::info("validation" + os.str());
  }
  log::info("wrote " + cfg.bank_path());
  return kSuccess;
}

struct LoadedData {
  std::vector<corpus::CaseRecord> train;
  std::vector<corpus::CaseRecord> valid;
  corpus::ArticleDb articles;
  std::vector<std::string> charges;
};

inline LoadedData load_training_data(const RunConfig& cfg) {
  for (const auto& [path, what] : {std::pair{cfg.train_path(), "training set"}, std::pair{cfg.valid_path(), "validation set"},
                                   std::pair{cfg.article_db_path(), "article database"},
                                   std::pair{cfg.charge_list_path(), "charge list"}}) {
    require_file(path, what);
  }
  LoadedData d{corpus::load_dataset(cfg.train_path()), corpus::load_dataset(cfg.valid_path()),
               corpus::load_article_db(cfg.article_db_path()), corpus::load_lines(cfg.charge_list_path())};
  if (d.train.empty()) throw DomainError("training set is empty: " + cfg.train_path());
  return d;
}

/// The extractor bank for a model config: loaded from bank_path when
/// present, trained in-pass otherwise; none for variants without one.
inline std::shared_ptr<const extract::ExtractorBank> bank_for(const RunConfig& cfg, const model::ModelConfig& mc,
                                                              const LoadedData& data) {
  if (!model::uses_extractor(mc.variant)) return nullptr;
  if (std::filesystem::is_regular_file(cfg.bank_path())) {
    auto bank = extract::load_bank(cfg.bank_path());
    log::info("using extractor bank " + cfg.bank_path());
    return std::make_shared<extract::ExtractorBank>(std::move(bank));
  }
  log::info("no extractor bank at " + cfg.bank_path() + ", training one");
  return std::make_shared<extract::ExtractorBank>(train_bank(cfg, data.train, data.articles));
}

inline std::unique_ptr<model::ChargeModel> train_model(const RunConfig& cfg, const model::ModelConfig& mc,
                                                       const LoadedData& data, const std::string& checkpoint,
                                                       bool resume) {
  std::unique_ptr<model::ChargeModel> m;
  model::TrainingState state;
  if (resume && std::filesystem::is_regular_file(model::sidecar_path(checkpoint))) {
    auto loaded = model::load_model(checkpoint);
    if (!loaded.state) {
      log::info(checkpoint + " holds a finished run; nothing to resume");
      return std::move(loaded.model);
    }
    m = std::move(loaded.model);
    state = std::move(*loaded.state);
    log::info("resuming after epoch " + std::to_string(state.epochs_done));
  } else {
    m = std::make_unique<model::ChargeModel>(
        model::ChargeModel::build(mc, data.train, data.charges, data.articles, bank_for(cfg, mc, data)));
  }
  const auto train = model::prepare_all(*m, data.train);
  const auto valid = model::prepare_all(*m, data.valid);
  ensure_parent(checkpoint);
  const std::string log_path = checkpoint + ".log.jsonl";
  std::ofstream epoch_log(log_path, state.epochs_done ? std::ios::app : std::ios::trunc);
  if (!epoch_log) throw IoError("cannot write training log: " + log_path);

  model::TrainOptions opt;
  opt.epoch_limit = 1;
  opt.on_epoch = [&](const model::EpochLog& e) {
    std::ostringstream os;
    os << "epoch " << e.epoch << " charge_loss " << e.charge_loss << " attention_loss " << e.attention_loss
       << " valid_micro_f1 " << e.valid_micro_f1 << (e.improved ? " *" : "");
    log::info(os.str());
    epoch_log << model::to_json(e).dump() << '\n';
  };
  while (!state.finished(m->config())) {
    state = model::train(*m, train, valid, opt, std::move(state));
    if (!state.finished(m->config())) model::save_model(checkpoint, *m, &state);
  }
  log::info("best epoch " + std::to_string(state.best_epoch) + ", validation micro-F1 " +
                         std::to_string(state.best_valid_f1) + ", tau " + RunConfig::format(m->tau()));
  model::save_model(checkpoint, *m);
  std::filesystem::remove(model::best_path(checkpoint));
  return m;
}

inline int cmd_train(const RunConfig& cfg, bool resume) {
  const auto mc = cfg.model_config();
  const auto data = load_training_data(cfg);
  train_model(cfg, mc, data, cfg.get("checkpoint"), resume);
  log::info("wrote " + cfg.get("checkpoint"));
  return kSuccess;
}

/// Checks that a dataset's charge ids mean the same charges as the model's.
inline void check_charge_vocabulary(const model::ChargeModel& m, const std::vector<corpus::CaseRecord>& cases,
                                    const std::optional<std::vector<std::string>>& dataset_charges) {
  if (dataset_charges && *dataset_charges != m.charges()) {
    throw ValidationError("charge vocabulary of the dataset (" + std::to_string(dataset_charges->size()) +
                          " charges) differs from the checkpoint's (" + std::to_string(m.charges().size()) + ")");
  }
  for (const auto& c : cases) {
    for (int l : c.charges) {
      if (static_cast<std::size_t>(l) >= m.charges().size()) {
        throw ValidationError("case " + c.id + " has charge id " + std::to_string(l) + " unknown to the checkpoint");
      }
    }
  }
}

inline eval::VariantResult evaluate_model(const model::ChargeModel& m, const std::vector<corpus::CaseRecord>& cases,
                                          const std::string& label) {
  return {label, model::evaluate(m, model::prepare_all(m, cases)), m.config().effective_beta()};
}

inline void write_report(const std::string& path, const std::vector<eval::VariantResult>& results) {
  const auto comparison = eval::compare_variants(results);
  ensure_parent(path);
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write report: " + path);
  out << eval::render_jsonl(comparison);
  if (!out) throw IoError("failed writing report: " + path);
  std::cerr << eval::render_text(comparison);
}

inline std::string beta_label(double beta) { return "FactSupvArt(beta=" + RunConfig::format(beta) + ")"; }

/// Evaluates each checkpoint on the test set, or with `sweep` trains one
/// FactSupvArt model per beta in `betas` and evaluates those.
inline int cmd_eval(const RunConfig& cfg, const std::vector<std::string>& checkpoints, bool sweep) {
  require_file(cfg.test_path(), "test set");
  const auto test = corpus::load_dataset(cfg.test_path());
  std::optional<std::vector<std::string>> charges;
  if (std::filesystem::is_regular_file(cfg.charge_list_path())) charges = corpus::load_lines(cfg.charge_list_path());
  std::vector<eval::VariantResult> results;
  if (sweep) {
    auto mc = cfg.model_config();
    mc.variant = model::Variant::FactSupvArt;
    const auto betas = cfg.get_doubles("betas");
    const auto data = load_training_data(cfg);
    for (double beta : betas) {
      mc.beta = beta;
      const std::string ckpt = cfg.get("checkpoint") + ".beta" + RunConfig::format(beta);
      log::info("training " + beta_label(beta));
      const auto m = train_model(cfg, mc, data, ckpt, false);
      check_charge_vocabulary(*m, test, charges);
      results.push_back(evaluate_model(*m, test, beta_label(beta)));
    }
  } else {
    if (checkpoints.empty()) throw ValidationError("eval needs at least one --checkpoint");
    for (const auto& path : checkpoints) {
      require_file(path, "checkpoint");
      const auto loaded = model::load_model(path);
      check_charge_vocabulary(*loaded.model, test, charges);
      results.push_back(evaluate_model(*loaded.model, test, model::to_string(loaded.model->config().variant)));
    }
  }
  write_report(cfg.get("report"), results);
  log::info("wrote " + cfg.get("report"));
  return kSuccess;
}

inline nlohmann::json prediction_json(const model::ChargeModel& m, const model::CasePrediction& p, const std::string& id) {
  nlohmann::json j;
  j["id"] = id;
  j["charges"] = nlohmann::json::array();
  for (int l : p.charges) {
    j["charges"].push_back({{"id", l}, {"name", m.charges()[static_cast<std::size_t>(l)]}, {"probability", p.probabilities[static_cast<std::size_t>(l)]}});
  }
  j["probabilities"] = p.probabilities;
  j["articles"] = nlohmann::json::array();
  const auto ranked = p.ranked_articles();
  for (const auto& a : ranked) {
    const auto slot = static_cast<std::size_t>(std::find(p.articles.begin(), p.articles.end(), a) - p.articles.begin());
    j["articles"].push_back({{"id", a.str()}, {"attention", p.attention[slot]}, {"extractor_score", p.extractor_scores[slot]}});
  }
  return j;
}

inline std::string prediction_text(const model::ChargeModel& m, const model::CasePrediction& p, const std::string& id) {
  std::ostringstream os;
  os << id << ":";
  for (int l : p.charges) os << " " << m.charges()[static_cast<std::size_t>(l)] << " (" << p.probabilities[static_cast<std::size_t>(l)] << ")";
  const auto ranked = p.ranked_articles();
  if (!ranked.empty()) {
    os << "; articles";
    for (std::size_t i = 0; i < std::min<std::size_t>(3, ranked.size()); ++i) {
      const auto slot = static_cast<std::size_t>(std::find(p.articles.begin(), p.articles.end(), ranked[i]) - p.articles.begin());
      os << " " << ranked[i].str() << " (" << p.attention[slot] << ")";
    }
  }
  return os.str();
}

/// Predicts for each non-empty input line (one fact per line). JSON records
/// go to `out`, a readable summary to standard error.
inline int cmd_predict(const RunConfig& cfg, const std::vector<std::string>& checkpoints, const std::string& text,
                       const std::string& input, bool pretagged, std::ostream& out) {
  const std::string path = checkpoints.empty() ? cfg.get("checkpoint") : checkpoints.front();
  require_file(path, "checkpoint");
  std::vector<std::string> facts;
  if (!text.empty()) facts.push_back(text);
  if (!input.empty()) {
    std::ifstream in;
    if (input != "-") {
      require_file(input, "input file");
      in.open(input);
    }
    std::istream& src = input == "-" ? std::cin : in;
    std::string line;
    while (std::getline(src, line)) {
      if (line.find_first_not_of(" \t\r") != std::string::npos) facts.push_back(line);
    }
  }
  if (facts.empty()) throw ValidationError("predict: no fact description given (use --text or --input)");
  const auto loaded = model::load_model(path);
  const auto& m = *loaded.model;
  if (m.config().variant == model::Variant::FactGoldArt) {
    throw ValidationError("FactGoldArt needs gold articles and cannot predict from a fact alone");
  }
  std::unique_ptr<corpus::Tokenizer> tokenizer;
  if (pretagged) tokenizer = std::make_unique<corpus::PretaggedTokenizer>();
  else tokenizer = std::make_unique<corpus::SimpleTokenizer>();
  for (std::size_t i = 0; i < facts.size(); ++i) {
    corpus::CaseRecord rec;
    rec.id = "input-" + std::to_string(i + 1);
    rec.fact = tokenizer->tokenize(facts[i]);
    if (rec.fact.empty()) throw ValidationError(rec.id + " has no tokens");
    const auto p = m.predict(rec);
    out << prediction_json(m, p, rec.id).dump() << '\n';
    std::cerr << prediction_text(m, p, rec.id) << '\n';
  }
  return kSuccess;
}

/// Gradient check of the full graph of the configured variant at tiny
/// sizes: embeddings 4 + 2, hidden 3, k = 2, three charges.
inline int cmd_grad_check(const RunConfig& cfg) {
  auto mc = cfg.model_config();
  corpus::SyntheticSpec spec;
  spec.n_charges = 3;
  spec.n_articles = 4;
  spec.charge_articles = {{0}, {1, 3}, {2, 3}};
  spec.core_keywords = 4;
  spec.topic_words = 4;
  spec.article_keywords = 3;
  spec.legal_words = 6;
  spec.noise_words = 20;
  spec.min_sentences = 1;
  spec.max_sentences = 2;
  spec.min_sentence_length = 2;
  spec.max_sentence_length = 4;
  spec.min_article_sentence_length = 2;
  spec.max_article_sentence_length = 3;
  spec.train_size = 12;
  spec.valid_size = 2;
  spec.test_size = 2;
  spec.seed = mc.seed;
  const auto corpus = corpus::generate_synthetic(spec);
  mc.word_emb_dim = 4;
  mc.pos_emb_dim = 2;
  mc.gru_hidden = 3;
  mc.fc1_dim = 5;
  mc.fc2_dim = 4;
  mc.k = 2;
  std::shared_ptr<const extract::ExtractorBank> bank;
  if (model::uses_extractor(mc.variant)) {
    extract::ExtractorConfig ec;
    ec.k = 2;
    bank = std::make_shared<extract::ExtractorBank>(extract::ExtractorBank::train(corpus.train, article_ids(corpus.articles), ec));
  }
  auto m = model::ChargeModel::build(mc, corpus.train, corpus.charge_names, corpus.articles, bank);
  Rng rng(mc.seed);
  std::uniform_real_distribution<double> dist(-0.5, 0.5);
  for (Parameter* p : m.params().store.all()) {
    for (double& v : p->value.data()) v = dist(rng);
  }
  const std::vector<model::EncodedCase> cases{m.prepare(corpus.train[0]), m.prepare(corpus.train[1])};
  const double beta = mc.effective_beta();
  auto loss = [&](Tape& tape) {
    model::ArticleCache cache;
    Var total;
    for (const auto& c : cases) {
      Var l = m.case_loss(tape, m.forward(tape, cache, c), c, beta);
      total = total.valid() ? tape.add(total, l) : l;
    }
    return tape.scale(total, 1.0 / static_cast<double>(cases.size()));
  };
  const auto report = grad_check(loss, m.params().store.all(), 1e-4, 1e-5);
  for (const auto& e : report.entries) {
    std::ostringstream os;
    os << (e.passed ? "ok   " : "FAIL ") << e.name << " max_rel_err " << e.max_relative_error;
    log::info(os.str());
  }
  std::ostringstream os;
  os << model::to_string(mc.variant) << ": " << report.entries.size() << " tensors, max relative error "
     << report.max_relative_error() << (report.passed() ? " (pass)" : " (FAIL)");
  log::info(os.str());
  return report.passed() ? kSuccess : kRuntimeFailure;
}

/// Parses arguments and dispatches. Never throws; returns the exit code.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout) {
  CLI::App app{"Charge prediction with relevant-article attention"};
  app.require_subcommand(1);
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> variant;
  std::optional<double> beta, tau;
  std::optional<std::size_t> k;
  std::vector<std::string> checkpoints;
  std::optional<std::string> out_path;
  std::vector<std::string> overrides;
  bool resume = false, sweep = false, pretagged = false;
  std::string text, input;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "flat key = value configuration file");
    sub->add_option("--seed", seed, "random seed");
    sub->add_option("--variant", variant, "FactOnly, ArtOnly, FactArt, FactSupvArt or FactGoldArt");
    sub->add_option("--beta", beta, "article attention loss weight");
    sub->add_option("--tau", tau, "prediction threshold");
    sub->add_option("--k", k, "number of extracted articles");
    sub->add_option("--checkpoint", checkpoints, "model checkpoint path (repeatable for eval)");
    sub->add_option("--out", out_path, "output directory (gen-data) or file");
    sub->add_option("--set", overrides, "override any configuration key, key=value");
  };
  auto* gen = app.add_subcommand("gen-data", "generate a synthetic corpus");
  auto* tex = app.add_subcommand("train-extractor", "train the top-k article extractor");
  auto* trn = app.add_subcommand("train", "train the charge model");
  auto* evl = app.add_subcommand("eval", "evaluate checkpoints on the test set");
  auto* prd = app.add_subcommand("predict", "predict charges and articles for fact descriptions");
  auto* gck = app.add_subcommand("grad-check", "finite-difference check of the full model graph");
  for (auto* sub : {gen, tex, trn, evl, prd, gck}) common(sub);
  trn->add_flag("--resume", resume, "continue an unfinished run from the checkpoint");
  evl->add_flag("--sweep-beta", sweep, "train and evaluate one FactSupvArt model per value of `betas`");
  prd->add_option("--text", text, "fact description");
  prd->add_option("--input", input, "file with one fact description per line, - for standard input");
  prd->add_flag("--pretagged", pretagged, "input is word/POS tagged");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kValidationFailure;
  }

  try {
    RunConfig cfg = config_path.empty() ? RunConfig() : RunConfig::from_file(config_path);
    for (const auto& o : overrides) cfg.set_assignment(o);
    if (seed) cfg.set("seed", std::to_string(*seed));
    if (variant) cfg.set("variant", *variant);
    if (beta) cfg.set("beta", RunConfig::format(*beta));
    if (tau) cfg.set("tau", RunConfig::format(*tau));
    if (k) cfg.set("k", std::to_string(*k));
    if (!checkpoints.empty()) cfg.set("checkpoint", checkpoints.front());
    // --out names the primary output of each subcommand.
    if (out_path) {
      if (gen->parsed()) cfg.set("data_dir", *out_path);
      if (tex->parsed()) cfg.set("bank_path", *out_path);
      if (trn->parsed() && checkpoints.empty()) cfg.set("checkpoint", *out_path);
      if (evl->parsed()) cfg.set("report", *out_path);
    }

    if (gen->parsed()) return cmd_gen_data(cfg);
    if (tex->parsed()) return cmd_train_extractor(cfg);
    if (trn->parsed()) return cmd_train(cfg, resume);
    if (evl->parsed()) return cmd_eval(cfg, checkpoints, sweep);
    if (prd->parsed()) {
      if (!out_path) return cmd_predict(cfg, checkpoints, text, input, pretagged, out);
      ensure_parent(*out_path);
      std::ofstream file(*out_path, std::ios::trunc);
      if (!file) throw IoError("cannot write predictions: " + *out_path);
      return cmd_predict(cfg, checkpoints, text, input, pretagged, file);
    }
    return cmd_grad_check(cfg);
  } catch (const ValidationError& e) {
    log::error(e.what());
    return kValidationFailure;
  } catch (const std::exception& e) {
    log::error(e.what());
    return kRuntimeFailure;
  }
}

}  // namespace chargenet::cli
