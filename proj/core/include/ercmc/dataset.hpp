#pragma once

#include <memory>
#include <optional>

#include "ercmc/context_model.hpp"
#include "ercmc/corpus.hpp"
#include "ercmc/embedding_store.hpp"
#include "ercmc/futures.hpp"
#include "ercmc/run_config.hpp"

namespace ercmc {

// A corpus bound to its embedding store and (optionally) a futures provider.
// Binding checks coverage up front, so a successful bind means every
// conversation can be turned into model inputs.
class BoundSplit {
 public:
  BoundSplit(Corpus corpus, EmbeddingStore embeddings, std::optional<EmbeddingStore> futures,
             std::size_t futures_needed);
  // Futures retrieved on the fly by MockRetrievalFutures with history k.
  static BoundSplit with_mock_futures(Corpus corpus, EmbeddingStore embeddings, std::size_t m,
                                      std::size_t k);

  BoundSplit(BoundSplit&&) noexcept = default;
  BoundSplit& operator=(BoundSplit&&) noexcept = default;

  const Corpus& corpus() const noexcept { return state_->corpus; }
  const EmbeddingStore& embeddings() const noexcept { return state_->embeddings; }
  std::size_t size() const noexcept { return state_->corpus.size(); }
  std::size_t futures_per_utterance() const noexcept { return state_->futures_needed; }

  ConversationInputs inputs(std::size_t conversation) const;

 private:
  struct State {
    Corpus corpus;
    EmbeddingStore embeddings;
    std::unique_ptr<FuturesProvider> futures;
    std::size_t futures_needed = 0;
    std::size_t history = 0;
  };
  BoundSplit() = default;
  std::unique_ptr<State> state_;
};

struct LoadedSplit {
  BoundSplit split;
  LabelVocabulary vocabulary;
};

// Loads corpus, base embeddings and (when the model uses futures) the futures
// file named in `files`; verifies manifests and coverage. With `vocabulary`
// set, labels outside it are rejected.
LoadedSplit load_split(const SplitFiles& files, const ModelConfig& model,
                       const LabelVocabulary* vocabulary);

}  // namespace ercmc
