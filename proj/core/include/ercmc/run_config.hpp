#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ercmc/model_config.hpp"

namespace ercmc {

enum class HeadlineMetric { weighted_f1, micro_f1_excluding };

const char* to_string(HeadlineMetric metric);

struct TrainOptions {
  std::size_t epochs = 20;
  double lr = 3e-5;
  std::size_t batch_conversations = 1;
  std::size_t grad_accum = 4;
  std::uint64_t seed = 42;
  int precision = 64;
  HeadlineMetric metric = HeadlineMetric::weighted_f1;
  std::string neutral_label = "neutral";
  double weight_decay = 0.01;
  std::optional<double> clip_norm;

  void validate() const;
};

struct SplitFiles {
  std::string data;
  std::string embeddings;
  std::string futures;
};

// Everything a command needs, parsed from key=value lines. Keys outside the
// known set are rejected.
struct RunConfig {
  SplitFiles train, dev, test;
  std::string vocab;
  ModelConfig model;  // num_classes is filled in from the vocabulary
  TrainOptions training;

  static RunConfig parse(std::istream& in);
  static RunConfig load(const std::filesystem::path& path);

  // Applies one "key=value" assignment; throws ConfigError on unknown keys or
  // malformed values.
  void set(const std::string& key, const std::string& value);
  void set(const std::string& assignment);

  // Canonical ordered key=value pairs (every known key).
  std::vector<std::pair<std::string, std::string>> entries() const;
  std::string to_text() const;

  const SplitFiles& split(const std::string& name) const;
  void validate() const;
};

std::vector<std::string> known_config_keys();

}  // namespace ercmc
