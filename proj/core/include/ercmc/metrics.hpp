#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace ercmc {

struct ClassScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;    // gold count
  std::size_t predicted = 0;  // prediction count
};

struct MicroScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t true_positives = 0;
  std::size_t false_positives = 0;
  std::size_t false_negatives = 0;
};

struct ClassificationMetrics {
  std::vector<ClassScores> per_class;
  std::vector<std::vector<std::size_t>> confusion;  // [gold][pred]
  double accuracy = 0.0;
  double weighted_f1 = 0.0;
  std::optional<MicroScores> micro_excluding;
  std::optional<std::size_t> excluded_class;
};

// Per-class F1 (0 when precision and recall are both zero or undefined),
// averaged with gold-support weights.
double weighted_f1(std::span<const std::size_t> gold, std::span<const std::size_t> pred,
                   std::size_t num_classes);

// Pooled TP/FP/FN over every class except `excluded`. Throws MetricError when
// no gold label falls outside the excluded class.
MicroScores micro_scores_excluding(std::span<const std::size_t> gold,
                                   std::span<const std::size_t> pred, std::size_t num_classes,
                                   std::size_t excluded);
double micro_f1_excluding(std::span<const std::size_t> gold, std::span<const std::size_t> pred,
                          std::size_t num_classes, std::size_t excluded);

ClassificationMetrics classification_metrics(std::span<const std::size_t> gold,
                                             std::span<const std::size_t> pred,
                                             std::size_t num_classes,
                                             std::optional<std::size_t> excluded = std::nullopt);

}  // namespace ercmc
