#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ercmc/corpus.hpp"
#include "ercmc/embedding_store.hpp"

namespace ercmc {

struct FuturesRequest {
  std::string conversation_id;
  std::size_t index = 0;
  std::size_t count = 5;    // m
  std::size_t history = 2;  // k; effective history is min(index, history)
};

// m × d_m row-major block of pseudo-future vectors.
struct FutureBlock {
  std::size_t count = 0;
  std::size_t dim = 0;
  std::vector<float> values;

  std::span<const float> row(std::size_t j) const {
    return std::span<const float>(values).subspan(j * dim, dim);
  }
};

class FuturesProvider {
 public:
  virtual ~FuturesProvider() = default;
  virtual FutureBlock futures_for(const FuturesRequest& request) const = 0;
  virtual std::size_t dim() const = 0;
};

// Serves rows [flat(i)·m, flat(i)·m + m) of a futures store verbatim.
class PrecomputedFutures final : public FuturesProvider {
 public:
  PrecomputedFutures(const Corpus& corpus, EmbeddingStore store);

  FutureBlock futures_for(const FuturesRequest& request) const override;
  std::size_t dim() const override { return store_.dim(); }
  const EmbeddingStore& store() const noexcept { return store_; }

 private:
  const Corpus* corpus_;
  EmbeddingStore store_;
};

// Retrieval stand-in for a dialogue generator: the query is the mean of the
// min(i,k)+1 most recent embeddings; each of the m picks is the nearest corpus
// utterance by cosine (excluding u_i and earlier picks, ties to the lower flat
// index), folded into the query mean before the next pick.
class MockRetrievalFutures final : public FuturesProvider {
 public:
  MockRetrievalFutures(const Corpus& corpus, const EmbeddingStore& embeddings);

  FutureBlock futures_for(const FuturesRequest& request) const override;
  std::size_t dim() const override { return embeddings_->dim(); }

 private:
  const Corpus* corpus_;
  const EmbeddingStore* embeddings_;
  std::vector<double> norms_;
};

// Runs MockRetrievalFutures over every utterance into a futures store.
EmbeddingStore build_mock_futures(const Corpus& corpus, const EmbeddingStore& embeddings,
                                  std::size_t m, std::size_t k, std::uint64_t seed);

}  // namespace ercmc
