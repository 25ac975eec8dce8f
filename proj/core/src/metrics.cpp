#include "ercmc/metrics.hpp"

#include <string>

#include "ercmc/error.hpp"

namespace ercmc {
namespace {

void check_inputs(std::span<const std::size_t> gold, std::span<const std::size_t> pred,
                  std::size_t num_classes) {
  if (gold.size() != pred.size()) {
    throw ContractError("metric inputs differ in length: " + std::to_string(gold.size()) +
                        " gold vs " + std::to_string(pred.size()) + " predicted");
  }
  if (gold.empty()) throw ContractError("metric over zero items");
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (gold[i] >= num_classes || pred[i] >= num_classes) {
      throw IndexError("class index outside " + std::to_string(num_classes) + " classes");
    }
  }
}

// 2PR/(P+R) over counts.
double f1_of(std::size_t tp, std::size_t fp, std::size_t fn) {
  return tp ? 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn) : 0.0;
}

}  // namespace

ClassificationMetrics classification_metrics(std::span<const std::size_t> gold,
                                             std::span<const std::size_t> pred,
                                             std::size_t num_classes,
                                             std::optional<std::size_t> excluded) {
  check_inputs(gold, pred, num_classes);
  ClassificationMetrics m;
  m.confusion.assign(num_classes, std::vector<std::size_t>(num_classes, 0));
  std::size_t correct = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    ++m.confusion[gold[i]][pred[i]];
    correct += gold[i] == pred[i];
  }
  m.accuracy = static_cast<double>(correct) / static_cast<double>(gold.size());
  m.per_class.resize(num_classes);
  double weighted = 0.0;
  for (std::size_t c = 0; c < num_classes; ++c) {
    auto& s = m.per_class[c];
    const std::size_t tp = m.confusion[c][c];
    for (std::size_t k = 0; k < num_classes; ++k) {
      s.support += m.confusion[c][k];
      s.predicted += m.confusion[k][c];
    }
    s.precision = s.predicted ? static_cast<double>(tp) / static_cast<double>(s.predicted) : 0.0;
    s.recall = s.support ? static_cast<double>(tp) / static_cast<double>(s.support) : 0.0;
    s.f1 = f1_of(tp, s.predicted - tp, s.support - tp);
    weighted += s.f1 * static_cast<double>(s.support);
  }
  m.weighted_f1 = weighted / static_cast<double>(gold.size());
  if (excluded) {
    m.excluded_class = excluded;
    m.micro_excluding = micro_scores_excluding(gold, pred, num_classes, *excluded);
  }
  return m;
}

double weighted_f1(std::span<const std::size_t> gold, std::span<const std::size_t> pred,
                   std::size_t num_classes) {
  return classification_metrics(gold, pred, num_classes).weighted_f1;
}

MicroScores micro_scores_excluding(std::span<const std::size_t> gold,
                                   std::span<const std::size_t> pred, std::size_t num_classes,
                                   std::size_t excluded) {
  check_inputs(gold, pred, num_classes);
  if (excluded >= num_classes) {
    throw IndexError("excluded class " + std::to_string(excluded) + " outside " +
                     std::to_string(num_classes) + " classes");
  }
  MicroScores s;
  bool any_gold = false;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    const bool gold_in = gold[i] != excluded;
    const bool pred_in = pred[i] != excluded;
    any_gold = any_gold || gold_in;
    if (gold[i] == pred[i]) {
      if (gold_in) ++s.true_positives;
      continue;
    }
    if (pred_in) ++s.false_positives;
    if (gold_in) ++s.false_negatives;
  }
  if (!any_gold) throw MetricError("micro F1 undefined: every gold label is the excluded class");
  const auto tp = static_cast<double>(s.true_positives);
  s.precision = s.true_positives + s.false_positives
                    ? tp / static_cast<double>(s.true_positives + s.false_positives)
                    : 0.0;
  s.recall = tp / static_cast<double>(s.true_positives + s.false_negatives);
  s.f1 = f1_of(s.true_positives, s.false_positives, s.false_negatives);
  return s;
}

double micro_f1_excluding(std::span<const std::size_t> gold, std::span<const std::size_t> pred,
                          std::size_t num_classes, std::size_t excluded) {
  return micro_scores_excluding(gold, pred, num_classes, excluded).f1;
}

}  // namespace ercmc
