// One PASS/FAIL line per acceptance criterion; exit status 1 if any fails.

#include <chrono>
#include <cmath>
#include <functional>
#include <iomanip>
#include <iostream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "ercmc/checkpoint.hpp"
#include "ercmc/consistency.hpp"
#include "ercmc/embedding_store.hpp"
#include "ercmc/error.hpp"
#include "ercmc/gradcheck.hpp"
#include "ercmc/metrics.hpp"
#include "ercmc/trainer.hpp"
#include "metric_oracles.hpp"
#include "parameter_formula.hpp"
#include "reference_model.hpp"
#include "synthetic.hpp"

using namespace ercmc;
namespace t = ercmc::testing;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(double v, int precision = 3, bool sci = true) {
  std::ostringstream s;
  if (sci) s << std::scientific;
  else s << std::fixed;
  s << std::setprecision(precision) << v;
  return s.str();
}

Outcome gradient_suite() {
  const auto start = Clock::now();
  const auto suite = run_gradient_suite(42, GradCheckOptions{});
  const double secs = seconds_since(start);
  double worst = 0;
  std::string worst_name;
  bool saw_model = false;
  for (const auto& e : suite) {
    if (e.result.max_rel_error >= worst) {
      worst = e.result.max_rel_error;
      worst_name = e.name;
    }
    saw_model = saw_model || e.name == "context_model";
  }
  const bool pass = saw_model && worst < 1e-4 && secs < 120.0;
  return {pass, std::to_string(suite.size()) + " cases, max rel err " + fmt(worst) + " (" +
                    worst_name + ") < 1e-4, " + fmt(secs, 1, false) + " s < 120 s"};
}

Outcome straight_line() {
  std::mt19937_64 rng(20240607);
  double worst = 0;
  for (int instance = 0; instance < 20; ++instance) {
    const auto cfg = t::random_oracle_config(rng);
    const std::size_t length = 1 + rng() % 9;
    ContextModel<double> model(cfg, rng());
    worst = std::max(worst, t::reference_gap(model, t::random_oracle_inputs(cfg, length, rng())));
  }
  return {worst < 1e-10, "20 instances, max abs gap " + fmt(worst) + " < 1e-10"};
}

Outcome overfit() {
  const auto data = t::synthetic_corpus({});
  const auto split = t::bind_synthetic(data, 32, 3, 2);
  auto cfg = t::small_config(32, data.vocabulary.size());
  ContextModel<double> model(cfg, 1);
  TrainOptions opts;
  opts.epochs = 200;
  opts.lr = 1e-3;
  opts.batch_conversations = 1;
  opts.grad_accum = 1;
  opts.seed = 42;
  TrainHooks hooks;
  hooks.stop_at_train_accuracy = 0.95;
  const auto start = Clock::now();
  const auto trace = train(model, split, nullptr, data.vocabulary, opts, hooks);
  const double secs = seconds_since(start);
  const auto report = evaluate(model, split, data.vocabulary, HeadlineMetric::weighted_f1, std::nullopt, 1);
  const double acc = trace.epochs.back().train_accuracy;
  const bool pass = acc >= 0.95 && trace.epochs.size() <= 200 && secs < 60.0 &&
                    report.metrics.weighted_f1 >= 0.95;
  return {pass, std::to_string(data.corpus.size()) + " conversations / " +
                    std::to_string(data.corpus.utterance_count()) + " utterances, train acc " +
                    fmt(acc, 4, false) + " >= 0.95 at epoch " + std::to_string(trace.epochs.size()) +
                    " <= 200, weighted F1 " + fmt(report.metrics.weighted_f1, 4, false) + ", " +
                    fmt(secs, 1, false) + " s < 60 s"};
}

Outcome causality() {
  std::mt19937_64 rng(77);
  std::size_t mismatches = 0;
  for (int trial = 0; trial < 50; ++trial) {
    ModelConfig cfg = t::small_config(8, 4);
    cfg.n_h = 2;
    cfg.window = 1 + rng() % 4;
    cfg.futures = 2;
    ContextModel<double> model(cfg, rng());
    const std::size_t length = 2 + rng() % 10;
    const std::size_t cut = 1 + rng() % (length - 1);
    auto full = t::random_oracle_inputs(cfg, length, rng());
    auto altered = full;
    for (std::size_t v = cut * cfg.d_m; v < altered.embeddings.size(); ++v) altered.embeddings[v] += 0.5f;
    for (std::size_t v = cut * cfg.futures * cfg.d_m; v < altered.futures.size(); ++v) altered.futures[v] -= 0.5f;
    for (std::size_t i = cut; i < length; ++i) altered.speakers[i] = "Z";
    const auto a = model.predict(full.prefix(cut));
    const auto b = model.predict(altered);
    const auto c = model.predict(full);
    for (std::size_t i = 0; i < cut; ++i) {
      mismatches += a[i].probabilities != b[i].probabilities;
      mismatches += a[i].probabilities != c[i].probabilities;
    }
  }
  return {mismatches == 0,
          "50 random prefixes, " + std::to_string(mismatches) + " rows differ bitwise (C&S&PF, 64-bit)"};
}

Outcome metric_oracles() {
  using Labels = std::vector<std::size_t>;
  const bool hand_wf1 = weighted_f1(Labels{0, 0, 1}, Labels{0, 1, 1}, 2) == 2.0 / 3.0;
  const auto micro = micro_scores_excluding(Labels{0, 1, 1, 2}, Labels{1, 1, 2, 2}, 3, 0);
  const bool hand_micro = micro.precision == 0.5 && micro.recall == 2.0 / 3.0 && micro.f1 == 4.0 / 7.0;
  std::mt19937_64 rng(99);
  double worst = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t classes = 2 + rng() % 7;
    const std::size_t n = 1 + rng() % 200;
    Labels gold(n), pred(n);
    for (std::size_t i = 0; i < n; ++i) {
      gold[i] = std::min(rng() % classes, rng() % classes);
      pred[i] = rng() % 3 == 0 ? gold[i] : rng() % classes;
    }
    worst = std::max(worst, std::abs(weighted_f1(gold, pred, classes) - t::brute_weighted_f1(gold, pred, classes)));
    // Exclude a class that is not the only gold label.
    std::size_t excluded = rng() % classes;
    if (std::all_of(gold.begin(), gold.end(), [&](std::size_t g) { return g == excluded; })) {
      excluded = (excluded + 1) % classes;
    }
    worst = std::max(worst, std::abs(micro_f1_excluding(gold, pred, classes, excluded) -
                                     t::brute_micro_excluding(gold, pred, classes, excluded)));
  }
  const bool pass = hand_wf1 && hand_micro && worst < 1e-12;
  return {pass, "1000 instances, max gap " + fmt(worst) + " < 1e-12; hand 2/3 " +
                    (hand_wf1 ? "exact" : "WRONG") + ", hand 4/7 " + (hand_micro ? "exact" : "WRONG")};
}

Outcome emotion_consistency_checks() {
  using W = EcWeighting;
  std::vector<std::size_t> same = {3, 3, 3, 3, 3, 3};
  std::vector<std::size_t> none = {1, 0, 2, 0, 2, 0};
  std::vector<std::size_t> two = {4, 4, 0, 4, 1, 2};
  bool ok = true;
  for (W w : {W::uniform, W::proximal}) {
    ok = ok && std::abs(emotion_consistency(same, 0, 5, w) - 100.0) < 1e-9;
    ok = ok && emotion_consistency(none, 0, 5, w) == 0.0;
  }
  const double forty = emotion_consistency(two, 0, 5, W::uniform);
  ok = ok && std::abs(forty - 40.0) < 1e-12;
  double worst_sum = 0;
  for (std::size_t ell = 1; ell <= 12; ++ell) {
    for (W w : {W::uniform, W::proximal}) {
      auto v = ec_weights(ell, w);
      worst_sum = std::max(worst_sum, std::abs(std::accumulate(v.begin(), v.end(), 0.0) - 1.0));
    }
  }
  ok = ok && worst_sum < 1e-9;
  std::mt19937_64 rng(31);
  std::size_t violations = 0;
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t ell = 1 + rng() % 8;
    const std::size_t classes = 2 + rng() % 5;
    std::vector<std::size_t> labels(ell + 1 + rng() % 4);
    for (auto& l : labels) l = rng() % classes;
    const std::size_t start = rng() % (labels.size() - ell);
    const W w = rng() % 2 ? W::uniform : W::proximal;
    const double before = emotion_consistency(labels, start, ell, w);
    labels[start + 1 + rng() % ell] = labels[start];
    violations += emotion_consistency(labels, start, ell, w) < before;
  }
  ok = ok && violations == 0;
  return {ok, "100/0 both weightings, 2-of-5 uniform = " + fmt(forty, 6, false) +
                  ", weight sums within " + fmt(worst_sum, 1) + ", " + std::to_string(violations) +
                  "/500 monotonicity violations"};
}

std::set<std::string> signature(const ContextModel<double>& model) {
  std::set<std::string> names;
  for (const auto& p : model.parameters()) {
    std::ostringstream s;
    s << p.name << shape_string(p.value.shape());
    names.insert(s.str());
  }
  return names;
}

Outcome ablation_wiring() {
  std::size_t configs = 0, count_mismatch = 0;
  auto check_count = [&](const ModelConfig& cfg) {
    ContextModel<double> model(cfg, 1);
    ++configs;
    count_mismatch += model.parameter_count() != t::expected_parameter_count(cfg);
  };
  const auto data = t::synthetic_corpus({});
  const std::size_t classes = data.vocabulary.size();
  for (const char* ctx : {"raw", "c", "s", "pf", "c,pf", "s,pf", "c,s", "c,s,pf"}) {
    auto cfg = t::small_config(32, classes);
    cfg.contexts = parse_contexts(ctx);
    check_count(cfg);
  }
  for (int drop = 0; drop < 4; ++drop) {
    auto cfg = t::small_config(32, classes);
    cfg.use_h = drop != 0;
    cfg.use_s = drop != 1;
    cfg.use_t = drop != 2;
    check_count(cfg);
  }

  const auto split = t::bind_synthetic(data, 32, 3, 2);
  std::map<PosMode, std::set<std::string>> sigs;
  std::string failures;
  for (PosMode mode : {PosMode::none, PosMode::sinusoidal, PosMode::learned, PosMode::relative}) {
    auto cfg = t::small_config(32, classes);
    cfg.pos_mode = mode;
    check_count(cfg);
    ContextModel<double> model(cfg, 1);
    sigs[mode] = signature(model);
    TrainOptions opts;
    opts.epochs = 1;
    opts.lr = 1e-3;
    opts.grad_accum = 1;
    try {
      const auto trace = train(model, split, nullptr, data.vocabulary, opts);
      if (!std::isfinite(trace.epochs.at(0).train_loss)) failures += std::string(" ") + to_string(mode);
    } catch (const std::exception& e) {
      failures += std::string(" ") + to_string(mode) + "(" + e.what() + ")";
    }
  }
  const bool signatures_ok = sigs[PosMode::none] == sigs[PosMode::sinusoidal] &&
                             sigs[PosMode::none] != sigs[PosMode::learned] &&
                             sigs[PosMode::none] != sigs[PosMode::relative] &&
                             sigs[PosMode::learned] != sigs[PosMode::relative];
  const bool pass = count_mismatch == 0 && failures.empty() && signatures_ok;
  return {pass, std::to_string(configs - count_mismatch) + "/" + std::to_string(configs) +
                    " parameter counts match the shape formula; N/S/L/R one epoch " +
                    (failures.empty() ? "ok" : "failed:" + failures) + "; signatures " +
                    (signatures_ok ? "N=S, L and R distinct" : "UNEXPECTED")};
}

template <typename Write>
std::string bytes_of(Write write) {
  std::ostringstream out(std::ios::binary);
  write(out);
  return out.str();
}

Outcome formats() {
  const auto data = t::synthetic_corpus({});
  const auto base = mock_encode(data.corpus, 32, 7);
  const auto futures = build_mock_futures(data.corpus, base, 3, 2, 7);
  bool erce_ok = true;
  for (const auto* store : {&base, &futures}) {
    const auto bytes = bytes_of([&](std::ostream& o) { write_embeddings(o, *store); });
    std::istringstream in(bytes, std::ios::binary);
    const auto back = read_embeddings(in);
    erce_ok = erce_ok && back == *store &&
              bytes_of([&](std::ostream& o) { write_embeddings(o, back); }) == bytes;
  }

  auto cfg = t::small_config(32, data.vocabulary.size());
  ContextModel<double> model(cfg, 5);
  round_to_checkpoint_precision(model);
  RunConfig run;
  run.model = cfg;
  const auto ck = make_checkpoint(model, data.vocabulary, run);
  const auto ck_bytes = bytes_of([&](std::ostream& o) { write_checkpoint(o, ck); });
  std::istringstream ck_in(ck_bytes, std::ios::binary);
  const auto ck_back = read_checkpoint(ck_in);
  const bool ck_ok = bytes_of([&](std::ostream& o) { write_checkpoint(o, ck_back); }) == ck_bytes;

  BoundSplit split(data.corpus, base, futures, 3);
  const auto before = evaluate(model, split, data.vocabulary, HeadlineMetric::weighted_f1, std::nullopt);
  const auto loaded = restore_model<double>(ck_back);
  const auto after = evaluate(loaded, split, data.vocabulary, HeadlineMetric::weighted_f1, std::nullopt);
  bool probs_ok = before.predictions.size() == after.predictions.size();
  for (std::size_t i = 0; probs_ok && i < before.predictions.size(); ++i) {
    probs_ok = before.predictions[i].probabilities == after.predictions[i].probabilities;
  }

  std::size_t simplify_checks = 0, simplify_bad = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto corpus = t::synthetic_corpus({15, 1, 12, 4, 3, 0.5, seed}).corpus;
    for (std::size_t ell = 1; ell <= 6; ++ell) {
      std::size_t expected = 0;
      for (const auto& conv : corpus.conversations()) expected += conv.size() > ell ? conv.size() - ell : 0;
      ++simplify_checks;
      simplify_bad += simplify_testset(corpus, ell).retained_count() != expected;
    }
  }
  const bool pass = erce_ok && ck_ok && probs_ok && simplify_bad == 0;
  return {pass, std::string("ERCE base+futures ") + (erce_ok ? "bitwise" : "DIFFER") + ", checkpoint " +
                    (ck_ok ? "bitwise" : "DIFFER") + ", save-load-evaluate P_i " +
                    (probs_ok ? "bitwise" : "DIFFER") + ", simplify " +
                    std::to_string(simplify_checks - simplify_bad) + "/" +
                    std::to_string(simplify_checks) + " closed-form counts (real datasets not supplied)"};
}

Outcome determinism() {
  const auto train_data = t::synthetic_corpus({12, 4, 8, 6, 2, 0.5, 1});
  const auto dev_data = t::synthetic_corpus({6, 4, 8, 6, 2, 0.5, 2});
  const auto train_split = t::bind_synthetic(train_data, 32, 3, 2);
  const auto dev_split = t::bind_synthetic(dev_data, 32, 3, 2);
  auto run = [&]() {
    auto cfg = t::small_config(32, train_data.vocabulary.size());
    ContextModel<double> model(cfg, 42);
    TrainOptions opts;
    opts.epochs = 3;
    opts.lr = 1e-3;
    opts.grad_accum = 2;
    const auto trace = train(model, train_split, &dev_split, train_data.vocabulary, opts);
    auto report = evaluate(model, dev_split, train_data.vocabulary, opts.metric, std::nullopt, 1);
    std::ostringstream sig;
    sig << std::hexfloat;
    for (const auto& e : trace.epochs) {
      sig << e.epoch << ' ' << e.train_loss << ' ' << e.train_accuracy << ' ' << *e.dev_metric << ' '
          << e.steps << '\n';
    }
    sig << *trace.best_epoch << '\n';
    for (const auto& p : report.predictions) {
      for (double v : p.probabilities) sig << v << ' ';
    }
    sig << eval_report_json(report, train_data.vocabulary, {});
    return sig.str();
  };
  const auto a = run();
  const auto b = run();
  return {a == b, std::string("two train+eval runs, traces and reports ") +
                      (a == b ? "identical" : "DIFFER") + " (64-bit, single thread)"};
}

}  // namespace

int main() {
  const std::pair<const char*, std::function<Outcome()>> criteria[] = {
      {"gradient-suite", gradient_suite},
      {"straight-line-oracle", straight_line},
      {"overfit-oracle", overfit},
      {"causality", causality},
      {"metric-oracles", metric_oracles},
      {"emotion-consistency", emotion_consistency_checks},
      {"ablation-wiring", ablation_wiring},
      {"format-round-trip", formats},
      {"determinism", determinism},
  };
  bool all = true;
  for (const auto& [name, check] : criteria) {
    Outcome outcome;
    try {
      outcome = check();
    } catch (const std::exception& e) {
      outcome = {false, std::string("threw: ") + e.what()};
    }
    all = all && outcome.pass;
    std::cout << (outcome.pass ? "PASS " : "FAIL ") << std::left << std::setw(22) << name
              << outcome.detail << std::endl;
  }
  return all ? 0 : 1;
}
