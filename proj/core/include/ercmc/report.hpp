#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ercmc/corpus.hpp"
#include "ercmc/metrics.hpp"
#include "ercmc/run_config.hpp"

namespace ercmc {

struct UtterancePrediction {
  std::string conversation;
  std::size_t index = 0;
  std::optional<std::size_t> gold;
  std::size_t pred = 0;
  std::vector<double> probabilities;
};

struct EvalReport {
  std::string split;
  ClassificationMetrics metrics;
  HeadlineMetric headline = HeadlineMetric::weighted_f1;
  double headline_value = 0.0;
  std::size_t labelled = 0;
  std::vector<UtterancePrediction> predictions;
};

// The report as a JSON object with labels spelled out; `config` is echoed
// verbatim under "config".
std::string eval_report_json(const EvalReport& report, const LabelVocabulary& vocabulary,
                             const std::vector<std::pair<std::string, std::string>>& config);

// One JSON object per line: conversation, index, gold, pred, probs.
void write_predictions(std::ostream& out, const std::vector<UtterancePrediction>& predictions,
                       const LabelVocabulary& vocabulary);

struct PredictionRecord {
  std::string conversation;
  std::size_t index = 0;
  std::optional<std::string> gold;
  std::string pred;
};

std::vector<PredictionRecord> read_predictions(std::istream& in);
std::vector<PredictionRecord> read_predictions(const std::filesystem::path& path);

}  // namespace ercmc
