#pragma once

// Seeded synthetic conversations for tests, acceptance checks and benchmarks.

#include <random>
#include <string>
#include <vector>

#include "ercmc/corpus.hpp"
#include "ercmc/dataset.hpp"
#include "ercmc/embedding_store.hpp"
#include "ercmc/futures.hpp"
#include "ercmc/model_config.hpp"

namespace ercmc::testing {

struct SyntheticSpec {
  std::size_t conversations = 20;
  std::size_t min_length = 6;
  std::size_t max_length = 10;
  std::size_t classes = 6;
  std::size_t speakers = 2;
  double stay_probability = 0.5;  // label persists to the next utterance
  std::uint64_t seed = 1;
};

struct Synthetic {
  Corpus corpus;
  LabelVocabulary vocabulary;
};

inline const std::vector<std::string>& synthetic_labels() {
  static const std::vector<std::string> labels = {"neutral", "joy",      "sadness", "anger",
                                                  "surprise", "fear",    "disgust", "frustrated"};
  return labels;
}

// Each utterance mixes two cue words of its label with filler, so the mock
// encoder's trigram features carry the label.
inline Synthetic synthetic_corpus(const SyntheticSpec& spec) {
  std::mt19937_64 rng(spec.seed);
  std::vector<std::string> names(synthetic_labels().begin(),
                                 synthetic_labels().begin() + static_cast<std::ptrdiff_t>(spec.classes));
  LabelVocabulary vocab(names);
  std::uniform_int_distribution<std::size_t> length(spec.min_length, spec.max_length);
  std::uniform_int_distribution<std::size_t> label(0, spec.classes - 1);
  std::uniform_int_distribution<std::size_t> speaker(0, spec.speakers - 1);
  std::uniform_int_distribution<int> cue(0, 3);
  std::uniform_int_distribution<int> filler(0, 49);
  std::bernoulli_distribution stay(spec.stay_probability);
  std::vector<Conversation> convs;
  for (std::size_t c = 0; c < spec.conversations; ++c) {
    Conversation conv;
    conv.id = "conv" + std::to_string(c);
    const std::size_t n = length(rng);
    std::size_t current = label(rng);
    for (std::size_t i = 0; i < n; ++i) {
      if (i > 0 && !stay(rng)) current = label(rng);
      Utterance u;
      u.speaker = "spk" + std::to_string(speaker(rng));
      u.text = names[current] + "cue" + std::to_string(cue(rng)) + " filler" +
               std::to_string(filler(rng)) + " " + names[current] + "cue" +
               std::to_string(cue(rng));
      u.label = current;
      conv.utterances.push_back(std::move(u));
    }
    convs.push_back(std::move(conv));
  }
  return {Corpus(std::move(convs)), std::move(vocab)};
}

// Corpus bound to mock embeddings and precomputed mock futures.
inline BoundSplit bind_synthetic(const Synthetic& data, std::uint32_t d_m, std::size_t m,
                                 std::size_t k, std::uint64_t seed = 7) {
  auto emb = mock_encode(data.corpus, d_m, seed);
  std::optional<EmbeddingStore> futures;
  if (m > 0) futures = build_mock_futures(data.corpus, emb, m, k, seed);
  return BoundSplit(data.corpus, std::move(emb), std::move(futures), m);
}

inline ModelConfig small_config(std::size_t d_m, std::size_t classes) {
  ModelConfig cfg;
  cfg.d_m = d_m;
  cfg.n_h = 4;
  cfg.window = 5;
  cfg.futures = 3;
  cfg.history = 2;
  cfg.dropout = 0.1;
  cfg.num_classes = classes;
  return cfg;
}

}  // namespace ercmc::testing
