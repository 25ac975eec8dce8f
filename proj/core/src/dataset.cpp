#include "ercmc/dataset.hpp"

#include <filesystem>

#include "ercmc/error.hpp"

namespace ercmc {

BoundSplit::BoundSplit(Corpus corpus, EmbeddingStore embeddings,
                       std::optional<EmbeddingStore> futures, std::size_t futures_needed)
    : state_(std::make_unique<State>()) {
  state_->corpus = std::move(corpus);
  state_->embeddings = std::move(embeddings);
  state_->futures_needed = futures_needed;
  state_->embeddings.check_bound(state_->corpus, "base embedding store");
  if (futures_needed > 0) {
    if (!futures) {
      throw CoverageError("future context enabled but no futures store was provided");
    }
    if (futures->kind() != StoreKind::futures) {
      throw CoverageError("futures file lacks the futures flag (is it a base embedding file?)");
    }
    if (futures->dim() != state_->embeddings.dim()) {
      throw ConsistencyError("futures dim " + std::to_string(futures->dim()) +
                             " differs from embedding dim " +
                             std::to_string(state_->embeddings.dim()));
    }
    if (futures->futures_per_utterance() < futures_needed) {
      throw CoverageError("futures store holds " + std::to_string(futures->futures_per_utterance()) +
                          " futures per utterance, model needs " + std::to_string(futures_needed));
    }
    futures->check_bound(state_->corpus, "futures store");
    state_->futures = std::make_unique<PrecomputedFutures>(state_->corpus, std::move(*futures));
  }
}

BoundSplit BoundSplit::with_mock_futures(Corpus corpus, EmbeddingStore embeddings, std::size_t m,
                                         std::size_t k) {
  BoundSplit out(std::move(corpus), std::move(embeddings), std::nullopt, 0);
  out.state_->futures_needed = m;
  out.state_->history = k;
  out.state_->futures =
      std::make_unique<MockRetrievalFutures>(out.state_->corpus, out.state_->embeddings);
  return out;
}

ConversationInputs BoundSplit::inputs(std::size_t conversation) const {
  const auto& conv = state_->corpus[conversation];
  const std::size_t dim = state_->embeddings.dim();
  const std::size_t offset = state_->corpus.conversation_offset(conversation);
  ConversationInputs in;
  in.length = conv.size();
  in.dim = dim;
  in.embeddings.reserve(in.length * dim);
  for (std::size_t i = 0; i < conv.size(); ++i) {
    in.speakers.push_back(conv.utterances[i].speaker);
    in.labels.push_back(conv.utterances[i].label);
    auto row = state_->embeddings.row(offset + i);
    in.embeddings.insert(in.embeddings.end(), row.begin(), row.end());
  }
  if (state_->futures) {
    const std::size_t m = state_->futures_needed;
    in.futures_per_utterance = m;
    in.futures.reserve(in.length * m * dim);
    for (std::size_t i = 0; i < conv.size(); ++i) {
      auto block = state_->futures->futures_for({conv.id, i, m, state_->history});
      in.futures.insert(in.futures.end(), block.values.begin(), block.values.end());
    }
  }
  return in;
}

LoadedSplit load_split(const SplitFiles& files, const ModelConfig& model,
                       const LabelVocabulary* vocabulary) {
  if (files.data.empty()) throw ConfigError("no corpus file configured for this split");
  if (files.embeddings.empty()) throw ConfigError("no embedding file configured for this split");
  auto loaded = load_corpus(files.data, vocabulary);
  auto embeddings = read_embeddings(files.embeddings);
  verify_manifest(files.embeddings, files.data);
  if (embeddings.kind() != StoreKind::base) {
    throw ConsistencyError(files.embeddings + " is a futures file, expected base embeddings");
  }
  std::optional<EmbeddingStore> futures;
  const bool needs_futures = !model.contexts.raw && model.contexts.future;
  if (needs_futures) {
    if (files.futures.empty()) {
      throw CoverageError("contexts include pf but no futures file is configured");
    }
    if (!std::filesystem::exists(files.futures)) {
      throw CoverageError("futures file " + files.futures + " does not exist");
    }
    futures = read_embeddings(files.futures);
    verify_manifest(files.futures, files.data);
  }
  BoundSplit split(std::move(loaded.corpus), std::move(embeddings), std::move(futures),
                   needs_futures ? model.futures : 0);
  return {std::move(split), std::move(loaded.vocabulary)};
}

}  // namespace ercmc
