// Acceptance run: prints one PASS/FAIL line per criterion and exits
// nonzero when any criterion fails. Arguments restrict the run to criteria
// whose names contain one of them.
#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "chargenet/cli/commands.hpp"
#include "chargenet/tensor/grad_check.hpp"

namespace {

using namespace chargenet;
using Clock = std::chrono::steady_clock;
using Vec = std::vector<double>;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point start) { return std::chrono::duration<double>(Clock::now() - start).count(); }

std::string fixed(double v, int digits = 4) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

void randomize(const std::vector<Parameter*>& params, std::mt19937_64& rng, double scale) {
  std::uniform_real_distribution<double> dist(-scale, scale);
  for (Parameter* p : params) {
    for (double& v : p->value.data()) v = dist(rng);
  }
}

std::vector<corpus::ArticleId> ids_of(const corpus::ArticleDb& db) {
  std::vector<corpus::ArticleId> out;
  for (const auto& [id, text] : db) out.push_back(id);
  return out;
}

// ---- shared worlds ----------------------------------------------------------

corpus::SyntheticSpec tiny_spec() {
  corpus::SyntheticSpec s;
  s.n_charges = 3;
  s.n_articles = 4;
  s.charge_articles = {{0}, {1, 3}, {2, 3}};
  s.core_keywords = 4;
  s.topic_words = 4;
  s.article_keywords = 3;
  s.legal_words = 6;
  s.noise_words = 20;
  s.min_sentences = 1;
  s.max_sentences = 3;
  s.min_sentence_length = 1;
  s.max_sentence_length = 5;
  s.min_article_sentence_length = 1;
  s.max_article_sentence_length = 4;
  s.multi_charge_probability = 0.3;
  s.train_size = 40;
  s.valid_size = 5;
  s.test_size = 5;
  s.seed = 3;
  return s;
}

model::ModelConfig tiny_config() {
  model::ModelConfig c;
  c.word_emb_dim = 4;
  c.pos_emb_dim = 2;
  c.gru_hidden = 3;
  c.fc1_dim = 5;
  c.fc2_dim = 4;
  c.k = 3;
  c.init_scale = 0.3;
  return c;
}

struct TinyWorld {
  corpus::SyntheticCorpus corpus = corpus::generate_synthetic(tiny_spec());
  std::shared_ptr<const extract::ExtractorBank> bank;

  TinyWorld() {
    extract::ExtractorConfig ec;
    ec.k = 3;
    bank = std::make_shared<extract::ExtractorBank>(extract::ExtractorBank::train(corpus.train, ids_of(corpus.articles), ec));
  }
  model::ChargeModel model(const model::ModelConfig& c) const {
    return model::ChargeModel::build(c, corpus.train, corpus.charge_names, corpus.articles, bank);
  }
};

const TinyWorld& tiny() {
  static const TinyWorld w;
  return w;
}

/// Dimensions small enough to train every variant on the default corpus in
/// a few minutes on one core.
model::ModelConfig reduced_config(model::Variant v) {
  model::ModelConfig c;
  c.word_emb_dim = 24;
  c.pos_emb_dim = 8;
  c.gru_hidden = 16;
  c.fc1_dim = 32;
  c.fc2_dim = 32;
  c.init_scale = 0.3;
  c.variant = v;
  return c;
}

struct TrainedRun {
  eval::PredictionBatch test;
  double seconds = 0.0;
};

TrainedRun train_and_test(const corpus::SyntheticCorpus& corp, std::shared_ptr<const extract::ExtractorBank> bank,
                          const model::ModelConfig& cfg) {
  const auto start = Clock::now();
  auto m = model::ChargeModel::build(cfg, corp.train, corp.charge_names, corp.articles,
                                     model::uses_extractor(cfg.variant) ? bank : nullptr);
  model::train(m, corp.train, corp.valid);
  TrainedRun r;
  r.test = model::evaluate(m, model::prepare_all(m, corp.test));
  r.seconds = seconds_since(start);
  return r;
}

// ---- gradient suite ---------------------------------------------------------

Outcome gradient_suite() {
  const auto start = Clock::now();
  std::mt19937_64 rng(101);
  std::vector<std::pair<std::string, GradCheckReport>> reports;

  {
    ParameterStore s;
    const auto p = nn::GruParams::create(s, "gru", 3, 2);
    Parameter& x = s.add("x", {3});
    Parameter& h = s.add("h", {2});
    randomize(s.all(), rng, 1.0);
    reports.emplace_back("gru_step",
                         grad_check([&](Tape& t) { return t.sum(t.tanh(nn::gru_step(t, t.param(x), t.param(h), p))); }, s.all()));
  }
  {
    ParameterStore s;
    const auto p = nn::BiGruParams::create(s, "bi", 2, 2);
    Parameter& xs = s.add("xs", {4, 2});
    Parameter& w = s.add("w", {4});
    randomize(s.all(), rng, 1.0);
    reports.emplace_back("bigru_encode", grad_check(
                                             [&](Tape& t) {
                                               std::vector<Var> seq;
                                               for (std::size_t i = 0; i < 4; ++i) seq.push_back(t.lookup(xs, i));
                                               const auto out = nn::bigru_encode(t, seq, p);
                                               Var acc = t.dot(out[0], t.param(w));
                                               for (std::size_t i = 1; i < out.size(); ++i) acc = t.add(acc, t.dot(out[i], t.param(w)));
                                               return acc;
                                             },
                                             s.all()));
  }
  {
    ParameterStore s;
    Parameter& W = s.add("W", {3, 3});
    Parameter& u = s.add("u", {3});
    Parameter& hs = s.add("hs", {3, 3});
    randomize(s.all(), rng, 1.0);
    reports.emplace_back("attentive_pool", grad_check(
                                               [&](Tape& t) {
                                                 const std::vector<Var> states{t.lookup(hs, 0), t.lookup(hs, 1), t.lookup(hs, 2)};
                                                 const auto pooled = nn::attentive_pool(t, states, W, t.param(u));
                                                 return t.add(t.sum(t.tanh(pooled.g)),
                                                              t.dot(pooled.alpha, t.constant(Tensor::vector({0.3, -1, 2}))));
                                               },
                                               s.all()));
  }
  {
    ParameterStore s;
    const auto p = nn::DocEncoderParams::create(s, "doc", 2, 2, true);
    Parameter& xs = s.add("xs", {5, 2});
    randomize(s.all(), rng, 1.0);
    reports.emplace_back("encode_document", grad_check(
                                                [&](Tape& t) {
                                                  const std::vector<std::vector<Var>> sentences{
                                                      {t.lookup(xs, 0), t.lookup(xs, 1)}, {t.lookup(xs, 2), t.lookup(xs, 3), t.lookup(xs, 4)}};
                                                  return t.sum(t.tanh(nn::encode_document(t, sentences, p).d));
                                                },
                                                s.all()));
  }
  {
    ParameterStore s;
    Parameter& W = s.add("W", {3, 4});
    Parameter& b = s.add("b", {3});
    Parameter& d = s.add("d_f", {4});
    randomize(s.all(), rng, 1.0);
    reports.emplace_back("dynamic_context", grad_check(
                                                [&](Tape& t) {
                                                  const Var u = model::dynamic_context(t, t.param(d), W, b);
                                                  return t.dot(t.tanh(u), t.constant(Tensor::vector({1.0, -0.5, 2.0})));
                                                },
                                                s.all()));
  }
  {
    auto m = tiny().model(tiny_config());
    const std::size_t state = 2 * m.config().gru_hidden;
    ParameterStore s;
    Parameter& a = s.add("a", {3, state});
    Parameter& d = s.add("d_f", {state});
    randomize(s.all(), rng, 1.0);
    randomize(m.params().store.all(), rng, 0.5);
    auto params = m.params().store.all();
    params.push_back(&a);
    params.push_back(&d);
    reports.emplace_back("aggregate_articles", grad_check(
                                                   [&](Tape& t) {
                                                     const std::vector<Var> as{t.lookup(a, 0), t.lookup(a, 1), t.lookup(a, 2)};
                                                     const auto pooled = m.aggregate_articles(t, as, t.param(d));
                                                     return t.add(t.sum(t.tanh(pooled.g)),
                                                                  t.dot(pooled.alpha, t.constant(Tensor::vector({0.5, -1, 1.5}))));
                                                   },
                                                   params));
  }
  {
    auto m = tiny().model(tiny_config());
    randomize(m.params().store.all(), rng, 0.5);
    std::vector<model::EncodedCase> cases;
    for (const auto& rec : tiny().corpus.train) {
      auto c = m.prepare(rec);
      const auto t = model::attention_target(c.slots, c.gold_articles);
      if (t && t->k_prime < c.slots.size()) cases.push_back(std::move(c));
      if (cases.size() == 2) break;
    }
    reports.emplace_back("FactSupvArt graph", grad_check(
                                                  [&](Tape& t) {
                                                    model::ArticleCache cache;
                                                    Var total;
                                                    for (const auto& c : cases) {
                                                      const Var l = m.case_loss(t, m.forward(t, cache, c), c, 0.5);
                                                      total = total.valid() ? t.add(total, l) : l;
                                                    }
                                                    return t.scale(total, 0.5);
                                                  },
                                                  m.params().store.all()));
  }

  const double secs = seconds_since(start);
  bool ok = secs < 60.0;
  double worst = 0.0;
  std::string failed;
  for (const auto& [name, r] : reports) {
    worst = std::max(worst, r.max_relative_error());
    if (!r.passed()) {
      ok = false;
      failed += " " + name;
    }
  }
  return {ok, std::to_string(reports.size()) + " checks, max relative error " + fixed(worst * 1e6, 3) + "e-6, " +
                  fixed(secs, 1) + " s" + (failed.empty() ? "" : ", failed:" + failed)};
}

// ---- normalization suite ----------------------------------------------------

Outcome normalization_suite() {
  std::mt19937_64 rng(202);
  auto cfg = tiny_config();
  auto m = tiny().model(cfg);
  auto& p = m.params();
  std::vector<model::EncodedCase> cases;
  for (const auto& rec : tiny().corpus.train) cases.push_back(m.prepare(rec));

  double worst = 0.0;
  std::size_t checked = 0;
  auto check = [&](const Tape& tape, Var v) {
    double s = 0.0;
    for (double x : tape.value(v).data()) s += x;
    worst = std::max(worst, std::abs(s - 1.0));
    ++checked;
  };
  const double scales[] = {0.1, 1.0, 5.0};
  for (int pass = 0; pass < 1000; ++pass) {
    randomize(p.store.all(), rng, scales[pass % 3]);
    const auto& c = cases[static_cast<std::size_t>(pass) % cases.size()];
    Tape tape;
    model::ArticleCache cache;
    const auto tr = m.forward(tape, cache, c);
    check(tape, tr.o);
    check(tape, tr.alpha);

    const auto fact = nn::encode_document(tape, m.embed(tape, c.fact), p.fact);
    for (Var a : fact.word_attention) check(tape, a);
    check(tape, fact.sentence_attention);

    const Var u_aw = model::dynamic_context(tape, tr.d_f, *p.W_w, *p.b_w);
    const Var u_as = model::dynamic_context(tape, tr.d_f, *p.W_s, *p.b_s);
    for (const auto& id : c.slots) {
      std::vector<Var> sentences;
      for (const auto& keys : m.article_keys(tape, cache, id)) {
        const auto pooled = nn::pool_with_context(tape, keys, u_aw);
        check(tape, pooled.alpha);
        sentences.push_back(pooled.g);
      }
      const auto states = nn::bigru_encode(tape, sentences, p.article->sentence_gru);
      check(tape, nn::attentive_pool(tape, states, *p.article->sentence_pool.W, u_as).alpha);
    }

    std::uniform_real_distribution<double> logit(-60.0, 60.0);
    Tensor z({1 + static_cast<std::size_t>(pass % 40)});
    for (double& x : z.data()) x = logit(rng);
    check(tape, tape.softmax(tape.constant(z)));
  }
  return {worst <= 1e-9, std::to_string(checked) + " distributions over 1000 passes, max |sum - 1| = " +
                             fixed(worst * 1e15, 2) + "e-15"};
}

// ---- oracle suite -----------------------------------------------------------

std::string oracle_numeral(int n) {
  static const char* d[] = {"", "一", "二", "三", "四", "五", "六", "七", "八", "九"};
  const int h = n / 100, t = n / 10 % 10, o = n % 10;
  std::string s;
  if (h) s += std::string(d[h]) + "百";
  if (t) {
    s += (h == 0 && t == 1) ? std::string("十") : std::string(d[t]) + "十";
  } else if (h && o) {
    s += "零";
  }
  if (o) s += d[o];
  return s;
}

Outcome oracle_suite() {
  Rng rng(303);
  std::map<std::string, std::size_t> mismatches;
  auto expect = [&](const std::string& what, bool ok) { mismatches[what] += ok ? 0 : 1; };
  auto close = [](double a, double b) { return std::abs(a - b) <= 1e-9; };

  // TF-IDF: tf * ln(N / df), L2-normalized; every known token keeps a column.
  for (int trial = 0; trial < 40; ++trial) {
    std::vector<extract::TokenList> docs(1 + uniform_index(rng, 12));
    for (auto& d : docs) {
      for (std::size_t i = 0, n = uniform_index(rng, 10); i < n; ++i) d.push_back("w" + std::to_string(uniform_index(rng, 15)));
    }
    if (std::all_of(docs.begin(), docs.end(), [](const auto& d) { return d.empty(); })) docs[0].push_back("w0");
    const auto model = extract::TfidfModel::fit(docs);
    extract::TokenList q;
    for (std::size_t i = 0, n = uniform_index(rng, 12); i < n; ++i) q.push_back("w" + std::to_string(uniform_index(rng, 20)));
    std::map<std::string, double> want;
    for (const auto& w : q) {
      double df = 0;
      for (const auto& d : docs) df += std::find(d.begin(), d.end(), w) != d.end();
      if (df > 0) want[w] += std::log(static_cast<double>(docs.size()) / df);
    }
    double norm = 0;
    for (const auto& [w, x] : want) norm += x * x;
    norm = std::sqrt(norm);
    std::map<std::string, double> got;
    for (const auto& [col, v] : model.transform(q).entries) got[model.tokens()[col]] = v;
    bool ok = got.size() == want.size();
    for (const auto& [w, x] : want) ok = ok && got.count(w) && close(got[w], norm > 0 ? x / norm : 0.0);
    expect("tf-idf", ok);
  }

  // Chi-square: contingency counts by hand, then the observed-vs-expected sum.
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t n = 4 + uniform_index(rng, 30), cols = 1 + uniform_index(rng, 6);
    std::vector<extract::SparseVector> feats(n);
    std::vector<bool> labels(n);
    for (std::size_t d = 0; d < n; ++d) {
      labels[d] = d < 2 ? d == 0 : uniform01(rng) < 0.4;
      for (std::uint32_t c = 0; c < cols; ++c) {
        if (uniform01(rng) < 0.5) feats[d].entries.emplace_back(c, 1.0);
      }
    }
    const auto got = extract::chi_square_scores(feats, labels, cols);
    bool ok = true;
    for (std::uint32_t c = 0; c < cols; ++c) {
      double obs[2][2] = {{0, 0}, {0, 0}};
      for (std::size_t d = 0; d < n; ++d) {
        bool present = false;
        for (const auto& e : feats[d].entries) present = present || e.first == c;
        obs[present ? 0 : 1][labels[d] ? 0 : 1] += 1;
      }
      double chi = 0;
      for (int i = 0; i < 2; ++i) {
        for (int j = 0; j < 2; ++j) {
          const double e = (obs[i][0] + obs[i][1]) * (obs[0][j] + obs[1][j]) / static_cast<double>(n);
          if (e > 0) chi += (obs[i][j] - e) * (obs[i][j] - e) / e;
        }
      }
      ok = ok && close(got[c], chi);
    }
    expect("chi-square", ok);
  }

  // Cross-entropy: -sum t log max(p, 1e-12).
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + uniform_index(rng, 8);
    Vec t(n), q(n);
    for (std::size_t i = 0; i < n; ++i) {
      t[i] = uniform01(rng);
      q[i] = i == 0 && trial % 5 == 0 ? 0.0 : uniform01(rng);
    }
    double want = 0;
    for (std::size_t i = 0; i < n; ++i) want -= t[i] * std::log(std::max(q[i], 1e-12));
    expect("cross-entropy", close(cross_entropy(t, q), want));
  }

  // MAP: average of precision at each gold hit over all gold items.
  for (int trial = 0; trial < 40; ++trial) {
    std::vector<std::vector<corpus::ArticleId>> rankings, gold;
    double want = 0;
    const std::size_t cases = 1 + uniform_index(rng, 6);
    for (std::size_t c = 0; c < cases; ++c) {
      std::vector<corpus::ArticleId> r, g;
      for (int a = 1; a <= 8; ++a) {
        if (uniform01(rng) < 0.6) r.push_back({a, 0});
        if (uniform01(rng) < 0.3) g.push_back({a, 0});
      }
      if (g.empty()) g.push_back({9, 0});
      std::shuffle(r.begin(), r.end(), rng);
      double sum = 0;
      for (const auto& x : g) {
        const auto at = std::find(r.begin(), r.end(), x);
        if (at == r.end()) continue;
        const auto rank = static_cast<std::size_t>(at - r.begin()) + 1;
        std::size_t hits = 0;
        for (std::size_t i = 0; i < rank; ++i) hits += std::find(g.begin(), g.end(), r[i]) != g.end();
        sum += static_cast<double>(hits) / static_cast<double>(rank);
      }
      want += sum / static_cast<double>(g.size());
      rankings.push_back(r);
      gold.push_back(g);
    }
    expect("MAP", close(eval::mean_average_precision(rankings, gold), want / static_cast<double>(cases)));
  }

  // Micro and macro P/R/F1 from per-charge decision tables.
  for (int trial = 0; trial < 40; ++trial) {
    const int L = 2 + static_cast<int>(uniform_index(rng, 5));
    eval::PredictionBatch b;
    for (std::size_t i = 0, n = 1 + uniform_index(rng, 15); i < n; ++i) {
      std::set<int> g{static_cast<int>(uniform_index(rng, L))}, p;
      if (uniform01(rng) < 0.3) g.insert(static_cast<int>(uniform_index(rng, L)));
      for (int l = 0; l < L; ++l) {
        if (uniform01(rng) < 0.3) p.insert(l);
      }
      b.cases.push_back({{p.begin(), p.end()}, {g.begin(), g.end()}, {}, {}});
    }
    double TP = 0, FP = 0, FN = 0, ps = 0, rs = 0, fs = 0, seen = 0;
    for (int l = 0; l < L; ++l) {
      double tp = 0, fp = 0, fn = 0;
      bool in_gold = false;
      for (const auto& c : b.cases) {
        const bool pr = std::count(c.predicted.begin(), c.predicted.end(), l) > 0;
        const bool go = std::count(c.gold.begin(), c.gold.end(), l) > 0;
        in_gold = in_gold || go;
        tp += pr && go;
        fp += pr && !go;
        fn += !pr && go;
      }
      TP += tp;
      FP += fp;
      FN += fn;
      if (!in_gold) continue;
      const double p = tp + fp > 0 ? tp / (tp + fp) : 0.0, r = tp / (tp + fn);
      ps += p;
      rs += r;
      fs += p + r > 0 ? 2 * p * r / (p + r) : 0.0;
      ++seen;
    }
    const double mp = TP + FP > 0 ? TP / (TP + FP) : 0.0, mr = TP / (TP + FN);
    const double mf = mp + mr > 0 ? 2 * mp * mr / (mp + mr) : 0.0;
    const auto micro = eval::micro_prf(b);
    expect("micro P/R/F1", close(micro.precision, mp) && close(micro.recall, mr) && close(micro.f1, mf));
    const double Mp = ps / seen, Mr = rs / seen;
    const auto macro = eval::macro_prf(b);
    const auto macro_mean = eval::macro_prf(b, eval::MacroF1::MeanOfPerCharge);
    expect("macro P/R/F1", close(macro.precision, Mp) && close(macro.recall, Mr) &&
                               close(macro.f1, Mp + Mr > 0 ? 2 * Mp * Mr / (Mp + Mr) : 0.0) &&
                               close(macro_mean.f1, fs / seen));
  }

  // Chinese numerals, both directions, over 1..999.
  for (int n = 1; n <= 999; ++n) {
    const std::string text = oracle_numeral(n);
    expect("numerals", corpus::chinese_numeral_to_int(text) == n && corpus::int_to_chinese_numeral(n) == text);
  }

  std::size_t bad = 0;
  std::string names;
  for (const auto& [what, count] : mismatches) {
    bad += count;
    names += (names.empty() ? "" : ", ") + what + (count ? " (" + std::to_string(count) + " mismatches)" : "");
  }
  return {bad == 0, names};
}

// ---- joint loss and the beta sweep -------------------------------------------

Outcome beta_zero_bitwise() {
  std::mt19937_64 rng(404);
  auto m = tiny().model(tiny_config());
  std::vector<model::EncodedCase> cases;
  for (const auto& rec : tiny().corpus.train) cases.push_back(m.prepare(rec));
  std::size_t equal = 0, with_target = 0;
  for (int trial = 0; trial < 100; ++trial) {
    randomize(m.params().store.all(), rng, 1.0);
    const auto& c = cases[static_cast<std::size_t>(trial) % cases.size()];
    Tape tape;
    model::ArticleCache cache;
    const auto tr = m.forward(tape, cache, c);
    const auto y = model::charge_target(c.charges, m.charges().size()).y;
    const auto t = model::attention_target(c.slots, c.gold_articles);
    with_target += t.has_value();
    const double joint = tape.value(model::joint_loss(tape, tr.o, y, tr.alpha, t, 0.0)).item();
    const double plain = tape.value(tape.cross_entropy(y, tr.o)).item();
    const double numeric_joint = model::joint_loss(tape.value(tr.o).data(), y.data(), tape.value(tr.alpha).data(), t, 0.0);
    const double numeric_plain = cross_entropy(y.data(), tape.value(tr.o).data());
    equal += std::memcmp(&joint, &plain, sizeof(double)) == 0 &&
             std::memcmp(&numeric_joint, &numeric_plain, sizeof(double)) == 0;
  }
  return {equal == 100, std::to_string(equal) + "/100 bitwise equal (" + std::to_string(with_target) +
                            " with a nonempty attention target)"};
}

/// The corpus for the beta sweep: the default world with sparser article
/// evidence in the facts, so that unsupervised attention has room to improve.
corpus::SyntheticSpec sweep_spec() {
  corpus::SyntheticSpec s;
  s.keyword_rate = 0.1;
  return s;
}

Outcome beta_sweep() {
  const auto start = Clock::now();
  const auto corp = corpus::generate_synthetic(sweep_spec());
  const auto bank = std::make_shared<extract::ExtractorBank>(extract::ExtractorBank::train(corp.train, ids_of(corp.articles), {}));
  std::vector<double> p1, map;
  std::string detail;
  for (double beta : {0.0, 0.1, 1.0}) {
    auto cfg = reduced_config(model::Variant::FactSupvArt);
    cfg.beta = beta;
    const auto run = train_and_test(corp, bank, cfg);
    const auto am = eval::article_metrics(run.test);
    p1.push_back(am->prec_at_1);
    map.push_back(am->map);
    detail += "beta " + cli::RunConfig::format(beta) + ": Prec@1 " + fixed(am->prec_at_1) + " MAP " + fixed(am->map) + "; ";
  }
  const bool ok = p1[0] < p1[1] && p1[1] < p1[2] && map[0] < map[1] && map[1] < map[2];
  return {ok, detail + fixed(seconds_since(start), 0) + " s"};
}

Outcome joint_loss_suite() {
  const auto bitwise = beta_zero_bitwise();
  const auto sweep = beta_sweep();
  return {bitwise.pass && sweep.pass, "beta=0 loss " + bitwise.detail + "; " + sweep.detail};
}

// ---- variant ordering ---------------------------------------------------------

Outcome variant_ordering() {
  const auto start = Clock::now();
  const auto corp = corpus::generate_synthetic(corpus::SyntheticSpec{});
  const auto bank = std::make_shared<extract::ExtractorBank>(extract::ExtractorBank::train(corp.train, ids_of(corp.articles), {}));
  std::map<model::Variant, double> f1;
  std::string detail;
  for (auto v : {model::Variant::FactOnly, model::Variant::FactArt, model::Variant::FactSupvArt, model::Variant::FactGoldArt}) {
    const auto run = train_and_test(corp, bank, reduced_config(v));
    f1[v] = eval::micro_prf(run.test).f1;
    detail += model::to_string(v) + " " + fixed(f1[v]) + "; ";
  }
  using model::Variant;
  const double secs = seconds_since(start);
  const bool ok = f1[Variant::FactSupvArt] >= f1[Variant::FactArt] && f1[Variant::FactArt] >= f1[Variant::FactOnly] - 0.02 &&
                  f1[Variant::FactSupvArt] >= 0.90 && f1[Variant::FactGoldArt] >= f1[Variant::FactSupvArt] && secs < 1800.0;
  return {ok, "test micro-F1 " + detail + fixed(secs, 0) + " s"};
}

// ---- extractor suite ----------------------------------------------------------

// recall@10 of the default extractor on the default corpus's test split.
constexpr double kFrozenRecallAt10 = 1.0;

Outcome extractor_suite() {
  const auto corp = corpus::generate_synthetic(corpus::SyntheticSpec{});
  auto ids = ids_of(corp.articles);
  extract::ExtractorConfig ec;
  ec.k = ids.size();
  const auto bank = extract::ExtractorBank::train(corp.train, ids, ec);
  std::vector<std::vector<corpus::ArticleId>> ranked, gold;
  for (const auto& c : corp.test) {
    ranked.push_back(extract::extraction_ids(bank.extract_top_k(c)));
    gold.push_back(c.articles);
  }
  std::vector<std::size_t> ks(ids.size());
  for (std::size_t k = 0; k < ks.size(); ++k) ks[k] = k + 1;
  const auto recall = extract::recall_at_k(ranked, gold, ks);
  bool monotone = true;
  for (std::size_t i = 1; i < recall.size(); ++i) monotone = monotone && recall[i] >= recall[i - 1];
  const double r10 = recall[9];

  // Extension: retrain without one article, then add it back.
  const corpus::ArticleId held_out = ids[5];
  auto rest = ids;
  rest.erase(rest.begin() + 5);
  auto partial = extract::ExtractorBank::train(corp.train, rest, {});
  std::vector<Vec> before;
  for (const auto& c : corp.test) before.push_back(partial.scores(extract::case_tokens(c)));
  std::vector<extract::TokenList> docs;
  std::vector<bool> labels;
  for (const auto& c : corp.train) {
    docs.push_back(extract::case_tokens(c));
    labels.push_back(std::find(c.articles.begin(), c.articles.end(), held_out) != c.articles.end());
  }
  partial.extend(held_out, docs, labels, {});
  bool unchanged = true;
  for (std::size_t i = 0; i < corp.test.size(); ++i) {
    const auto after = partial.scores(extract::case_tokens(corp.test[i]));
    std::size_t j = 0;
    for (std::size_t s = 0; s < partial.scorers().size(); ++s) {
      if (partial.scorers()[s].article == held_out) continue;
      unchanged = unchanged && std::memcmp(&after[s], &before[i][j], sizeof(double)) == 0;
      ++j;
    }
  }
  const bool ok = monotone && r10 >= 0.95 && r10 == kFrozenRecallAt10 && unchanged;
  return {ok, "recall@1 " + fixed(recall[0]) + ", @5 " + fixed(recall[4]) + ", @10 " + fixed(r10) + ", @20 " +
                  fixed(recall[19]) + (monotone ? ", monotone" : ", NOT monotone") +
                  (unchanged ? ", extension bitwise unchanged" : ", extension CHANGED scores")};
}

// ---- corpus suite -------------------------------------------------------------

Outcome corpus_suite() {
  const corpus::SyntheticWorld world(corpus::SyntheticSpec{});
  const corpus::PretaggedTokenizer pretagged;
  Rng rng(505);
  std::size_t good = 0;
  for (int i = 0; i < 500; ++i) {
    const auto sc = world.sample_case(rng, "doc-" + std::to_string(i));
    const auto parts = corpus::segment(sc.doc, world.rules());
    auto arts = corpus::extract_articles(parts.view, world.rules());
    std::sort(arts.begin(), arts.end());
    const auto masked = corpus::mask_charges(parts.fact, world.charge_names());
    bool ok = parts.fact == sc.parts.fact && parts.view == sc.parts.view && parts.decision == sc.parts.decision &&
              arts == sc.articles && corpus::extract_charges(parts.decision, world.charge_names()) == sc.charges;
    for (const auto& name : world.charge_names()) ok = ok && masked.find(name) == std::string::npos;
    const auto rec = corpus::assemble_case(sc.doc, world.rules(), pretagged);
    ok = ok && rec.charges == sc.charges && rec.articles == sc.articles && !rec.fact.empty();
    good += ok;
  }

  // A hand-written judgement in the usual layout.
  const std::vector<std::string> charges = {"盗窃罪", "诈骗罪", "故意伤害罪", "危险驾驶罪"};
  const corpus::JudgementDoc doc{
      "template",
      "某某市某某区人民法院\n刑事判决书\n公诉机关某某市某某区人民检察院。\n被告人AA，男，1985年出生。\n"
      "某某区人民检察院指控被告人AA犯盗窃罪一案，本院依法审理。经审理查明，2015年3月5日，被告人AA在某小区内"
      "窃取被害人BB的手机一部，价值人民币3000元。同年4月，被告人AA醉酒驾驶机动车在道路上行驶，后被民警查获，"
      "AA供认自己涉嫌盗窃罪。\n本院认为，被告人AA以非法占有为目的，秘密窃取他人财物，数额较大，其行为已构成"
      "盗窃罪；在道路上醉酒驾驶机动车，其行为已构成危险驾驶罪。依照《中华人民共和国刑法》第二百六十四条、"
      "第一百三十三条之一、第六十七条第三款、第六十九条之规定，判决如下：\n一、被告人AA犯盗窃罪，判处有期徒刑"
      "一年；犯危险驾驶罪，判处拘役二个月。\n"};
  const auto rules = corpus::default_rules(charges);
  const auto rec = corpus::assemble_case(doc, rules, corpus::SimpleTokenizer{});
  const std::vector<corpus::ArticleId> want_articles = {{67, 0}, {69, 0}, {133, 1}, {264, 0}};
  const std::vector<int> want_charges = {0, 3};
  bool masked = false, residual = false;
  for (const auto& s : rec.fact) {
    for (const auto& t : s) {
      masked = masked || t.word.find(corpus::kMaskToken) != std::string::npos;
      for (const auto& n : charges) residual = residual || t.word.find(n) != std::string::npos;
    }
  }
  const bool template_ok = rec.articles == want_articles && rec.charges == want_charges && masked && !residual;
  return {good == 500 && template_ok, std::to_string(good) + "/500 generated documents round-trip; template " +
                                           (template_ok ? "yields articles 67, 69, 133-1, 264 and charges 盗窃罪, 危险驾驶罪"
                                                        : "extraction MISMATCH")};
}

// ---- determinism --------------------------------------------------------------

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome determinism() {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / ("chargenet_acceptance_" + std::to_string(std::random_device{}()));
  fs::create_directories(dir);
  cli::RunConfig cfg;
  for (const auto& [k, v] : std::map<std::string, std::string>{{"n_charges", "6"}, {"n_articles", "10"}, {"train_size", "150"},
                                                                {"valid_size", "30"}, {"test_size", "30"}, {"word_emb_dim", "8"},
                                                                {"pos_emb_dim", "4"}, {"gru_hidden", "6"}, {"fc1_dim", "12"},
                                                                {"fc2_dim", "12"}, {"k", "5"}, {"max_epochs", "3"},
                                                                {"extractor_epochs", "10"}, {"init_scale", "0.3"}}) {
    cfg.set(k, v);
  }
  cfg.set("data_dir", (dir / "data").string());
  cli::cmd_gen_data(cfg);
  cfg.set("checkpoint", (dir / "a.ckpt").string());
  const int a = cli::cmd_train(cfg, false);
  cfg.set("checkpoint", (dir / "b.ckpt").string());
  const int b = cli::cmd_train(cfg, false);
  const auto pa = slurp(dir / "a.ckpt"), pb = slurp(dir / "b.ckpt");
  const bool same = a == 0 && b == 0 && !pa.empty() && pa == pb && slurp(dir / "a.ckpt.json") == slurp(dir / "b.ckpt.json") &&
                    slurp(dir / "a.ckpt.bank.json") == slurp(dir / "b.ckpt.bank.json");
  fs::remove_all(dir);
  return {same, same ? "two training runs wrote identical checkpoints (" + std::to_string(pa.size()) + " bytes)"
                     : "checkpoints differ"};
}

}  // namespace

int main(int argc, char** argv) {
  log::threshold() = log::Level::Error;
  const std::vector<std::pair<std::string, Outcome (*)()>> criteria = {
      {"gradient suite", gradient_suite},
      {"normalization suite", normalization_suite},
      {"oracle suite", oracle_suite},
      {"joint loss and beta sweep", joint_loss_suite},
      {"variant ordering", variant_ordering},
      {"extractor suite", extractor_suite},
      {"corpus suite", corpus_suite},
      {"determinism", determinism},
  };
  int failures = 0;
  for (const auto& [name, fn] : criteria) {
    // Optional arguments select criteria by substring of their names.
    bool selected = argc == 1;
    for (int i = 1; i < argc; ++i) selected = selected || name.find(argv[i]) != std::string::npos;
    if (!selected) continue;
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    failures += !o.pass;
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
