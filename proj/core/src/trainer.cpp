#include "ercmc/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numeric>
#include <thread>

#include "ercmc/error.hpp"

namespace ercmc {

std::optional<std::size_t> excluded_class(const TrainOptions& options,
                                          const LabelVocabulary& vocabulary) {
  if (options.metric != HeadlineMetric::micro_f1_excluding) return std::nullopt;
  auto idx = vocabulary.find(options.neutral_label);
  if (!idx) {
    throw ConfigError("train.neutral_label '" + options.neutral_label +
                      "' is not in the label vocabulary");
  }
  return idx;
}

std::size_t default_eval_threads() {
  if (const char* env = std::getenv("ERCMC_THREADS")) {
    const long n = std::strtol(env, nullptr, 10);
    if (n > 0) return static_cast<std::size_t>(n);
  }
  return 1;
}

template <typename T>
double accumulate_window(ContextModel<T>& model, const BoundSplit& split,
                         std::span<const std::size_t> conversations, Rng& dropout_rng) {
  const T weight = T(1) / static_cast<T>(conversations.size());
  double total = 0.0;
  for (std::size_t c : conversations) {
    Tape<T> tape;
    const auto inputs = split.inputs(c);
    auto out = model.forward(tape, inputs, true, dropout_rng);
    if (!out.loss.defined()) continue;
    const double value = static_cast<double>(out.loss.item());
    if (!std::isfinite(value)) {
      throw NumericError("non-finite loss on conversation '" + split.corpus()[c].id + "'");
    }
    auto scaled = ops::affine(tape, out.loss, weight, T(0));
    tape.backward(scaled);
    total += value * static_cast<double>(weight);
  }
  return total;
}

template <typename T>
TrainTrace train(ContextModel<T>& model, const BoundSplit& train_split, const BoundSplit* dev,
                 const LabelVocabulary& vocabulary, const TrainOptions& options,
                 const TrainHooks& hooks) {
  options.validate();
  if (train_split.size() == 0) throw ConsistencyError("training split has no conversations");
  const auto excluded = excluded_class(options, vocabulary);
  AdamWOptions adam;
  adam.lr = options.lr;
  adam.weight_decay = options.weight_decay;
  adam.clip_norm = options.clip_norm;
  AdamW<T> optimizer(model.parameters(), adam);
  zero_grads(model.parameters());

  Rng shuffle_rng(options.seed);
  Rng dropout_rng(options.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<std::size_t> order(train_split.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t window = options.batch_conversations * options.grad_accum;
  const std::size_t threads = default_eval_threads();

  TrainTrace trace;
  std::vector<std::vector<T>> best;
  for (std::size_t epoch = 1; epoch <= options.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double loss_sum = 0.0;
    std::size_t windows = 0;
    for (std::size_t start = 0; start < order.size(); start += window) {
      const std::size_t len = std::min(window, order.size() - start);
      loss_sum += accumulate_window(model, train_split,
                                    std::span<const std::size_t>(order).subspan(start, len),
                                    dropout_rng);
      optimizer.step();
      ++windows;
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(windows);
    rec.steps = optimizer.step_count();
    if (!hooks.skip_train_accuracy) {
      rec.train_accuracy = evaluate(model, train_split, vocabulary, options.metric, std::nullopt,
                                    threads).metrics.accuracy;
    }
    if (dev) {
      rec.dev_metric =
          evaluate(model, *dev, vocabulary, options.metric, excluded, threads).headline_value;
      if (!trace.best_dev_metric || *rec.dev_metric > *trace.best_dev_metric) {
        trace.best_dev_metric = rec.dev_metric;
        trace.best_epoch = epoch;
        best = model.snapshot();
      }
    }
    trace.epochs.push_back(rec);
    if (hooks.on_epoch) hooks.on_epoch(rec);
    if (hooks.stop_at_train_accuracy && !hooks.skip_train_accuracy &&
        rec.train_accuracy >= *hooks.stop_at_train_accuracy) {
      break;
    }
  }
  if (!best.empty()) model.restore(best);
  return trace;
}

template <typename T>
EvalReport evaluate(const ContextModel<T>& model, const BoundSplit& split,
                    const LabelVocabulary& vocabulary, HeadlineMetric metric,
                    std::optional<std::size_t> excluded, std::size_t threads) {
  if (model.config().num_classes != vocabulary.size()) {
    throw ConsistencyError("model has " + std::to_string(model.config().num_classes) +
                           " classes, vocabulary has " + std::to_string(vocabulary.size()));
  }
  if (split.embeddings().dim() != model.config().d_m) {
    throw ConsistencyError("embedding dim " + std::to_string(split.embeddings().dim()) +
                           " does not match model d_m " + std::to_string(model.config().d_m));
  }
  const std::size_t n = split.size();
  std::vector<std::vector<Prediction>> per_conv(n);
  auto work = [&](std::size_t first, std::size_t stride) {
    for (std::size_t c = first; c < n; c += stride) per_conv[c] = model.predict(split.inputs(c));
  };
  threads = std::max<std::size_t>(1, std::min(threads, n));
  if (threads == 1) {
    work(0, 1);
  } else {
    std::vector<std::exception_ptr> errors(threads);
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) {
      pool.emplace_back([&, t] {
        try {
          work(t, threads);
        } catch (...) {
          errors[t] = std::current_exception();
        }
      });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  EvalReport report;
  report.headline = metric;
  std::vector<std::size_t> gold, pred;
  for (std::size_t c = 0; c < n; ++c) {
    const auto& conv = split.corpus()[c];
    for (std::size_t i = 0; i < conv.size(); ++i) {
      auto& p = per_conv[c][i];
      const auto label = conv.utterances[i].label;
      if (label) {
        gold.push_back(*label);
        pred.push_back(p.label);
      }
      report.predictions.push_back({conv.id, i, label, p.label, std::move(p.probabilities)});
    }
  }
  report.labelled = gold.size();
  if (gold.empty()) throw ConsistencyError("split has no labelled utterances to evaluate");
  report.metrics = classification_metrics(gold, pred, vocabulary.size(), excluded);
  report.headline_value = metric == HeadlineMetric::micro_f1_excluding && report.metrics.micro_excluding
                              ? report.metrics.micro_excluding->f1
                              : report.metrics.weighted_f1;
  return report;
}

#define ERCMC_INSTANTIATE_TRAINER(T)                                                            \
  template TrainTrace train(ContextModel<T>&, const BoundSplit&, const BoundSplit*,            \
                            const LabelVocabulary&, const TrainOptions&, const TrainHooks&);   \
  template double accumulate_window(ContextModel<T>&, const BoundSplit&,                       \
                                    std::span<const std::size_t>, Rng&);                       \
  template EvalReport evaluate(const ContextModel<T>&, const BoundSplit&,                      \
                               const LabelVocabulary&, HeadlineMetric,                         \
                               std::optional<std::size_t>, std::size_t);

ERCMC_INSTANTIATE_TRAINER(float)
ERCMC_INSTANTIATE_TRAINER(double)

}  // namespace ercmc
