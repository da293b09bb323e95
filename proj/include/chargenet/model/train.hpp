#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "chargenet/core/log.hpp"
#include "chargenet/core/random.hpp"
#include "chargenet/eval/metrics.hpp"
#include "chargenet/model/charge_model.hpp"
#include "chargenet/tensor/sgd.hpp"

namespace chargenet::model {

struct EpochLog {
  std::size_t epoch = 0;  // 1-based
  double charge_loss = 0.0;
  double attention_loss = 0.0;  // unweighted, averaged over all cases
  double total_loss = 0.0;
  double valid_micro_f1 = 0.0;
  bool improved = false;
};

/// Everything needed to continue an interrupted run besides the current
/// parameters.
struct TrainingState {
  std::size_t epochs_done = 0;
  std::size_t best_epoch = 0;
  double best_valid_f1 = -1.0;
  std::size_t stale_epochs = 0;
  std::vector<EpochLog> log;
  std::vector<Tensor> best_params;

  bool finished(const ModelConfig& c) const { return epochs_done >= c.max_epochs || stale_epochs >= c.patience; }
};

/// Seed of the shuffle for one epoch, so a resumed run sees the same order.
inline std::uint64_t epoch_seed(std::uint64_t seed, std::size_t epoch) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (static_cast<std::uint64_t>(epoch) + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

struct CaseLosses {
  Var total;
  double charge = 0.0;
  double attention = 0.0;
};

inline CaseLosses case_losses(Tape& tape, const ChargeModel& model, ArticleCache& cache, const EncodedCase& c) {
  const auto tr = model.forward(tape, cache, c);
  CaseLosses out;
  out.total = model.case_loss(tape, tr, c, model.config().effective_beta());
  out.charge = cross_entropy(charge_target(c.charges, model.charges().size()).y.data(), tape.value(tr.o).data());
  if (tr.alpha.valid()) {
    if (auto t = attention_target(tr.topk, c.gold_articles)) {
      out.attention = cross_entropy(t->t.data(), tape.value(tr.alpha).data());
    }
  }
  return out;
}

/// One SGD step on the mean loss of `batch`. Returns the summed per-case
/// charge and attention losses.
inline std::pair<double, double> train_batch(ChargeModel& model, const std::vector<const EncodedCase*>& batch) {
  if (batch.empty()) throw DomainError("train_batch on an empty batch");
  Tape tape;
  ArticleCache cache;
  Var sum;
  double charge = 0.0, attention = 0.0;
  for (const auto* c : batch) {
    const auto l = case_losses(tape, model, cache, *c);
    sum = sum.valid() ? tape.add(sum, l.total) : l.total;
    charge += l.charge;
    attention += l.attention;
  }
  const Var mean = tape.scale(sum, 1.0 / static_cast<double>(batch.size()));
  model.params().store.zero_grad();
  tape.backward(mean);
  sgd_step(model.params().store, SgdConfig{model.config().learning_rate, model.config().batch_size});
  return {charge, attention};
}

inline eval::CaseResult case_result(const CasePrediction& p, const EncodedCase& c) {
  eval::CaseResult r;
  r.predicted = p.charges;
  r.gold = c.charges;
  if (!p.articles.empty()) {
    r.ranked_articles = p.ranked_articles();
    r.gold_articles = c.gold_articles;
  }
  return r;
}

inline eval::PredictionBatch evaluate(const ChargeModel& model, const std::vector<EncodedCase>& cases) {
  eval::PredictionBatch batch;
  for (const auto& c : cases) batch.cases.push_back(case_result(model.predict(c), c));
  return batch;
}

/// Micro-F1 of the predictions thresholded at `tau`.
inline double micro_f1_at(const std::vector<std::vector<double>>& probabilities, const std::vector<std::vector<int>>& gold,
                          double tau) {
  eval::PredictionBatch batch;
  for (std::size_t i = 0; i < probabilities.size(); ++i) batch.cases.push_back({predict_charges(probabilities[i], tau), gold[i], {}, {}});
  return eval::micro_prf(batch).f1;
}

/// Grid search over tau = 0.05, 0.10, ..., 0.95 for the best micro-F1;
/// ties go to the smaller tau.
inline double tune_threshold(const std::vector<std::vector<double>>& probabilities, const std::vector<std::vector<int>>& gold) {
  if (probabilities.size() != gold.size()) throw ShapeError("tune_threshold: predictions and gold differ in length");
  if (probabilities.empty()) throw DomainError("tune_threshold on an empty validation set");
  double best_tau = 0.05, best_f1 = -1.0;
  for (int i = 1; i <= 19; ++i) {
    const double tau = i / 20.0;
    const double f1 = micro_f1_at(probabilities, gold, tau);
    if (f1 > best_f1) {
      best_f1 = f1;
      best_tau = tau;
    }
  }
  return best_tau;
}

inline double tune_threshold(const ChargeModel& model, const std::vector<EncodedCase>& valid) {
  std::vector<std::vector<double>> probs;
  std::vector<std::vector<int>> gold;
  for (const auto& c : valid) {
    probs.push_back(model.predict(c).probabilities);
    gold.push_back(c.charges);
  }
  return tune_threshold(probs, gold);
}

inline std::vector<EncodedCase> prepare_all(const ChargeModel& model, const std::vector<corpus::CaseRecord>& cases) {
  std::vector<EncodedCase> out;
  out.reserve(cases.size());
  for (const auto& c : cases) out.push_back(model.prepare(c));
  return out;
}

/// Runs one epoch: seeded shuffle, mini-batch SGD, validation micro-F1 at
/// the model's current tau, best-snapshot bookkeeping.
inline EpochLog run_epoch(ChargeModel& model, const std::vector<EncodedCase>& train, const std::vector<EncodedCase>& valid,
                          TrainingState& state) {
  if (train.empty()) throw DomainError("training set is empty");
  if (valid.empty()) throw DomainError("validation set is empty");
  const auto& cfg = model.config();
  std::vector<std::size_t> order(train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(epoch_seed(cfg.seed, state.epochs_done));
  shuffle_in_place(order, rng);

  EpochLog entry;
  entry.epoch = state.epochs_done + 1;
  for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
    std::vector<const EncodedCase*> batch;
    for (std::size_t i = start; i < std::min(order.size(), start + cfg.batch_size); ++i) batch.push_back(&train[order[i]]);
    const auto [charge, attention] = train_batch(model, batch);
    entry.charge_loss += charge;
    entry.attention_loss += attention;
  }
  const double n = static_cast<double>(train.size());
  entry.charge_loss /= n;
  entry.attention_loss /= n;
  entry.total_loss = entry.charge_loss + cfg.effective_beta() * entry.attention_loss;
  if (!model.params().store.all_finite()) throw StateError("parameters became non-finite in epoch " + std::to_string(entry.epoch));

  entry.valid_micro_f1 = eval::micro_prf(evaluate(model, valid)).f1;
  state.epochs_done = entry.epoch;
  if (entry.valid_micro_f1 > state.best_valid_f1) {
    state.best_valid_f1 = entry.valid_micro_f1;
    state.best_epoch = entry.epoch;
    state.best_params = model.params().store.snapshot();
    state.stale_epochs = 0;
    entry.improved = true;
  } else {
    ++state.stale_epochs;
  }
  state.log.push_back(entry);
  return entry;
}

struct TrainOptions {
  /// Stop after this many epochs in this call even if the run is not done.
  std::optional<std::size_t> epoch_limit;
  bool tune_tau = true;
  std::function<void(const EpochLog&)> on_epoch;
};

/// Trains until max_epochs or `patience` epochs without a validation gain,
/// then restores the best parameters and tunes tau on the validation set.
/// Pass a previous state to resume.
inline TrainingState train(ChargeModel& model, const std::vector<EncodedCase>& train_set,
                           const std::vector<EncodedCase>& valid_set, const TrainOptions& options = {},
                           TrainingState state = {}) {
  std::size_t ran = 0;
  while (!state.finished(model.config()) && (!options.epoch_limit || ran < *options.epoch_limit)) {
    const auto entry = run_epoch(model, train_set, valid_set, state);
    ++ran;
    if (options.on_epoch) options.on_epoch(entry);
  }
  if (state.finished(model.config())) {
    if (!state.best_params.empty()) model.params().store.restore(state.best_params);
    if (options.tune_tau) model.set_tau(tune_threshold(model, valid_set));
  }
  return state;
}

inline TrainingState train(ChargeModel& model, const std::vector<corpus::CaseRecord>& train_set,
                           const std::vector<corpus::CaseRecord>& valid_set, const TrainOptions& options = {}) {
  return train(model, prepare_all(model, train_set), prepare_all(model, valid_set), options);
}

}  // namespace chargenet::model
