#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "ercmc/context_model.hpp"
#include "ercmc/dataset.hpp"
#include "ercmc/report.hpp"
#include "ercmc/run_config.hpp"

namespace ercmc {

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  std::optional<double> dev_metric;
  std::size_t steps = 0;  // optimizer steps so far
};

struct TrainTrace {
  std::vector<EpochRecord> epochs;
  std::optional<std::size_t> best_epoch;
  std::optional<double> best_dev_metric;
};

struct TrainHooks {
  // Stop once training accuracy reaches this value.
  std::optional<double> stop_at_train_accuracy;
  // Skip the per-epoch evaluation pass over the training split.
  bool skip_train_accuracy = false;
  std::function<void(const EpochRecord&)> on_epoch;
};

// Which class the micro-F1 metric excludes, or nullopt for weighted F1.
std::optional<std::size_t> excluded_class(const TrainOptions& options,
                                          const LabelVocabulary& vocabulary);

// Trains in place. Conversations are shuffled per epoch; every window of
// batch_conversations·grad_accum conversations contributes the mean of its
// per-conversation losses and ends in one optimizer step. With `dev`, the
// parameters of the best epoch are restored at the end.
template <typename T>
TrainTrace train(ContextModel<T>& model, const BoundSplit& train_split, const BoundSplit* dev,
                 const LabelVocabulary& vocabulary, const TrainOptions& options,
                 const TrainHooks& hooks = {});

// Accumulates one window of conversations into the parameter gradients
// (each loss weighted 1/|window|) and returns the summed weighted loss.
template <typename T>
double accumulate_window(ContextModel<T>& model, const BoundSplit& split,
                         std::span<const std::size_t> conversations, Rng& dropout_rng);

// Deterministic; `threads` > 1 fans out across conversations.
template <typename T>
EvalReport evaluate(const ContextModel<T>& model, const BoundSplit& split,
                    const LabelVocabulary& vocabulary, HeadlineMetric metric,
                    std::optional<std::size_t> excluded, std::size_t threads = 1);

// ERCMC_THREADS if set and positive, else 1.
std::size_t default_eval_threads();

}  // namespace ercmc
