#pragma once

#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <string>

#include <json.hpp>

#include "chargenet/model/train.hpp"
#include "chargenet/tensor/checkpoint.hpp"

namespace chargenet::model {

// A saved model is up to four files sharing the checkpoint path P:
//   P            parameter tensors (tensor checkpoint format)
//   P.json       metadata: config, vocabularies, charges, article texts,
//                tau and, for an unfinished run, the training state
//   P.bank.json  the extractor bank, for variants that use it
//   P.best       best-validation parameters of an unfinished run

inline constexpr int kModelFormatVersion = 1;

inline nlohmann::json to_json(const ModelConfig& c) {
  return {{"word_emb_dim", c.word_emb_dim}, {"pos_emb_dim", c.pos_emb_dim}, {"gru_hidden", c.gru_hidden},
          {"fc1_dim", c.fc1_dim},           {"fc2_dim", c.fc2_dim},         {"k", c.k},
          {"beta", c.beta},                 {"tau", c.tau},                 {"learning_rate", c.learning_rate},
          {"batch_size", c.batch_size},     {"variant", to_string(c.variant)}, {"max_epochs", c.max_epochs},
          {"patience", c.patience},         {"seed", c.seed},               {"init_scale", c.init_scale},
          {"tie_word_encoders", c.tie_word_encoders}};
}

inline ModelConfig config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.word_emb_dim = j.at("word_emb_dim").get<std::size_t>();
  c.pos_emb_dim = j.at("pos_emb_dim").get<std::size_t>();
  c.gru_hidden = j.at("gru_hidden").get<std::size_t>();
  c.fc1_dim = j.at("fc1_dim").get<std::size_t>();
  c.fc2_dim = j.at("fc2_dim").get<std::size_t>();
  c.k = j.at("k").get<std::size_t>();
  c.beta = j.at("beta").get<double>();
  c.tau = j.at("tau").get<double>();
  c.learning_rate = j.at("learning_rate").get<double>();
  c.batch_size = j.at("batch_size").get<std::size_t>();
  c.variant = parse_variant(j.at("variant").get<std::string>());
  c.max_epochs = j.at("max_epochs").get<std::size_t>();
  c.patience = j.at("patience").get<std::size_t>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.init_scale = j.at("init_scale").get<double>();
  c.tie_word_encoders = j.value("tie_word_encoders", false);
  c.validate();
  return c;
}

inline nlohmann::json to_json(const EpochLog& e) {
  return {{"epoch", e.epoch},
          {"charge_loss", e.charge_loss},
          {"attention_loss", e.attention_loss},
          {"total_loss", e.total_loss},
          {"valid_micro_f1", e.valid_micro_f1},
          {"improved", e.improved}};
}

inline EpochLog epoch_log_from_json(const nlohmann::json& j) {
  EpochLog e;
  e.epoch = j.at("epoch").get<std::size_t>();
  e.charge_loss = j.at("charge_loss").get<double>();
  e.attention_loss = j.at("attention_loss").get<double>();
  e.total_loss = j.at("total_loss").get<double>();
  e.valid_micro_f1 = j.at("valid_micro_f1").get<double>();
  e.improved = j.at("improved").get<bool>();
  return e;
}

inline std::string sidecar_path(const std::string& checkpoint) { return checkpoint + ".json"; }
inline std::string bank_path(const std::string& checkpoint) { return checkpoint + ".bank.json"; }
inline std::string best_path(const std::string& checkpoint) { return checkpoint + ".best"; }

/// Writes the model and, when given, the state of an unfinished run.
inline void save_model(const std::string& path, const ChargeModel& model, const TrainingState* state = nullptr) {
  save_checkpoint(path, model.params().store);
  nlohmann::json meta;
  meta["format_version"] = kModelFormatVersion;
  meta["config"] = to_json(model.config());
  meta["tau"] = model.tau();
  meta["words"] = model.words().items();
  meta["pos_tags"] = model.pos_tags().items();
  meta["charges"] = model.charges();
  auto articles = nlohmann::json::array();
  for (const auto& [id, text] : model.article_texts()) articles.push_back({{"id", id.str()}, {"text", text}});
  meta["articles"] = std::move(articles);
  meta["has_bank"] = model.bank() != nullptr;
  if (state) {
    nlohmann::json s;
    s["epochs_done"] = state->epochs_done;
    s["best_epoch"] = state->best_epoch;
    s["best_valid_f1"] = state->best_valid_f1;
    s["stale_epochs"] = state->stale_epochs;
    s["log"] = nlohmann::json::array();
    for (const auto& e : state->log) s["log"].push_back(to_json(e));
    meta["training"] = std::move(s);
    if (!state->best_params.empty()) {
      ParameterStore best;
      std::size_t i = 0;
      model.params().store.for_each([&](const Parameter& p) { best.add(p.name, p.value.shape()).value = state->best_params.at(i++); });
      save_checkpoint(best_path(path), best);
    }
  }
  std::ofstream out(sidecar_path(path), std::ios::trunc);
  if (!out) throw IoError("cannot write model metadata: " + sidecar_path(path));
  out << meta.dump(2) << '\n';
  if (!out) throw IoError("failed writing model metadata: " + sidecar_path(path));
  if (model.bank()) extract::save_bank(bank_path(path), *model.bank());
}

struct LoadedModel {
  std::unique_ptr<ChargeModel> model;
  std::optional<TrainingState> state;
};

inline LoadedModel load_model(const std::string& path) {
  std::ifstream in(sidecar_path(path));
  if (!in) throw IoError("cannot open model metadata: " + sidecar_path(path));
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(sidecar_path(path) + ": " + e.what());
  }
  try {
    if (meta.at("format_version").get<int>() != kModelFormatVersion) {
      throw ParseError("unsupported model format version in " + sidecar_path(path));
    }
    corpus::ArticleDb articles;
    for (const auto& a : meta.at("articles")) articles[ArticleId::parse(a.at("id").get<std::string>())] = a.at("text").get<std::string>();
    std::shared_ptr<const extract::ExtractorBank> bank;
    if (meta.at("has_bank").get<bool>()) bank = std::make_shared<extract::ExtractorBank>(extract::load_bank(bank_path(path)));
    LoadedModel out;
    out.model = std::make_unique<ChargeModel>(config_from_json(meta.at("config")),
                                              Vocabulary(meta.at("words").get<std::vector<std::string>>()),
                                              Vocabulary(meta.at("pos_tags").get<std::vector<std::string>>()),
                                              meta.at("charges").get<std::vector<std::string>>(), std::move(articles), bank);
    load_checkpoint(path, out.model->params().store);
    out.model->set_tau(meta.at("tau").get<double>());
    if (meta.contains("training")) {
      const auto& s = meta["training"];
      TrainingState st;
      st.epochs_done = s.at("epochs_done").get<std::size_t>();
      st.best_epoch = s.at("best_epoch").get<std::size_t>();
      st.best_valid_f1 = s.at("best_valid_f1").get<double>();
      st.stale_epochs = s.at("stale_epochs").get<std::size_t>();
      for (const auto& e : s.at("log")) st.log.push_back(epoch_log_from_json(e));
      if (std::filesystem::exists(best_path(path))) {
        std::ifstream bin(best_path(path), std::ios::binary);
        for (auto& nt : read_checkpoint(bin)) st.best_params.push_back(std::move(nt.value));
      }
      out.state = std::move(st);
    }
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(sidecar_path(path) + ": " + e.what());
  }
}

}  // namespace chargenet::model
