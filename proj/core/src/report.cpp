#include "ercmc/report.hpp"

#include <fstream>
#include <nlohmann/json.hpp>

#include "ercmc/error.hpp"

namespace ercmc {

std::string eval_report_json(const EvalReport& report, const LabelVocabulary& vocabulary,
                             const std::vector<std::pair<std::string, std::string>>& config) {
  using nlohmann::json;
  const auto& m = report.metrics;
  json classes = json::object();
  for (std::size_t c = 0; c < m.per_class.size(); ++c) {
    const auto& s = m.per_class[c];
    classes[vocabulary.name_of(c)] = {{"precision", s.precision}, {"recall", s.recall},
                                      {"f1", s.f1},               {"support", s.support},
                                      {"predicted", s.predicted}};
  }
  json out = {{"split", report.split},
              {"labels", vocabulary.labels()},
              {"utterances", report.labelled},
              {"accuracy", m.accuracy},
              {"weighted_f1", m.weighted_f1},
              {"headline_metric", to_string(report.headline)},
              {"headline", report.headline_value},
              {"per_class", classes},
              {"confusion", m.confusion}};
  if (m.micro_excluding) {
    const auto& s = *m.micro_excluding;
    out["micro_f1_excluding"] = {{"excluded", vocabulary.name_of(*m.excluded_class)},
                                 {"precision", s.precision},
                                 {"recall", s.recall},
                                 {"f1", s.f1},
                                 {"tp", s.true_positives},
                                 {"fp", s.false_positives},
                                 {"fn", s.false_negatives}};
  }
  json cfg = json::object();
  for (const auto& [k, v] : config) cfg[k] = v;
  out["config"] = cfg;
  return out.dump(2) + "\n";
}

void write_predictions(std::ostream& out, const std::vector<UtterancePrediction>& predictions,
                       const LabelVocabulary& vocabulary) {
  for (const auto& p : predictions) {
    nlohmann::json j = {{"conversation", p.conversation},
                        {"index", p.index},
                        {"gold", p.gold ? nlohmann::json(vocabulary.name_of(*p.gold)) : nlohmann::json(nullptr)},
                        {"pred", vocabulary.name_of(p.pred)},
                        {"probs", p.probabilities}};
    out << j.dump() << '\n';
  }
}

std::vector<PredictionRecord> read_predictions(std::istream& in) {
  std::vector<PredictionRecord> out;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      PredictionRecord r;
      r.conversation = j.at("conversation").get<std::string>();
      r.index = j.at("index").get<std::size_t>();
      if (j.contains("gold") && !j["gold"].is_null()) r.gold = j["gold"].get<std::string>();
      r.pred = j.at("pred").get<std::string>();
      out.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("bad prediction record: ") + e.what(), number);
    }
  }
  return out;
}

std::vector<PredictionRecord> read_predictions(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open predictions " + path.string());
  return read_predictions(in);
}

}  // namespace ercmc
