#include "ercmc/futures.hpp"

#include <algorithm>
#include <cmath>

#include "ercmc/error.hpp"

namespace ercmc {
namespace {

double dot(std::span<const double> a, std::span<const float> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * static_cast<double>(b[i]);
  return s;
}

double norm_of(std::span<const float> v) {
  double s = 0.0;
  for (float x : v) s += static_cast<double>(x) * static_cast<double>(x);
  return std::sqrt(s);
}

std::size_t locate(const Corpus& corpus, const FuturesRequest& request) {
  auto conv = corpus.find_conversation(request.conversation_id);
  if (!conv) {
    throw CoverageError("no futures for unknown conversation '" + request.conversation_id + "'");
  }
  if (request.index >= corpus[*conv].size()) {
    throw CoverageError("conversation '" + request.conversation_id + "' has no utterance " +
                        std::to_string(request.index));
  }
  if (request.count == 0) throw ParameterError("futures request needs m >= 1");
  return corpus.flat_index(*conv, request.index);
}

}  // namespace

PrecomputedFutures::PrecomputedFutures(const Corpus& corpus, EmbeddingStore store)
    : corpus_(&corpus), store_(std::move(store)) {
  if (store_.kind() != StoreKind::futures) {
    throw FormatError("precomputed futures need an ERCE file with the futures flag set");
  }
}

FutureBlock PrecomputedFutures::futures_for(const FuturesRequest& request) const {
  const std::size_t flat = locate(*corpus_, request);
  const std::size_t m = store_.futures_per_utterance();
  if (request.count > m) {
    throw CoverageError("futures store holds " + std::to_string(m) + " rows per utterance, " +
                        std::to_string(request.count) + " requested");
  }
  const std::uint64_t first = static_cast<std::uint64_t>(flat) * m;
  if (first + request.count > store_.rows()) {
    throw CoverageError("futures store has " + std::to_string(store_.rows()) +
                        " rows; utterance " + request.conversation_id + "#" +
                        std::to_string(request.index) + " needs rows [" + std::to_string(first) +
                        ", " + std::to_string(first + request.count) + ")");
  }
  FutureBlock block{request.count, store_.dim(), {}};
  block.values.reserve(request.count * store_.dim());
  for (std::size_t j = 0; j < request.count; ++j) {
    auto r = store_.row(first + j);
    block.values.insert(block.values.end(), r.begin(), r.end());
  }
  return block;
}

MockRetrievalFutures::MockRetrievalFutures(const Corpus& corpus, const EmbeddingStore& embeddings)
    : corpus_(&corpus), embeddings_(&embeddings) {
  embeddings.check_bound(corpus, "base embeddings");
  norms_.reserve(embeddings.rows());
  for (std::uint64_t r = 0; r < embeddings.rows(); ++r) norms_.push_back(norm_of(embeddings.row(r)));
}

FutureBlock MockRetrievalFutures::futures_for(const FuturesRequest& request) const {
  const std::size_t flat = locate(*corpus_, request);
  const std::size_t dim = embeddings_->dim();
  const std::size_t pool = embeddings_->rows();
  const std::size_t history = std::min(request.index, request.history);

  std::vector<double> total(dim, 0.0);
  std::size_t folded = 0;
  for (std::size_t r = flat - history; r <= flat; ++r) {
    auto v = embeddings_->row(r);
    for (std::size_t d = 0; d < dim; ++d) total[d] += v[d];
    ++folded;
  }

  std::vector<char> taken(pool, 0);
  taken[flat] = 1;
  FutureBlock block{request.count, dim, {}};
  block.values.reserve(request.count * dim);
  std::vector<double> query(dim);
  for (std::size_t j = 0; j < request.count; ++j) {
    for (std::size_t d = 0; d < dim; ++d) query[d] = total[d] / static_cast<double>(folded);
    double qnorm = 0.0;
    for (double q : query) qnorm += q * q;
    qnorm = std::sqrt(qnorm);

    std::size_t best = pool;
    double best_cos = -INFINITY;
    for (std::size_t r = 0; r < pool; ++r) {
      if (taken[r]) continue;
      const double denom = qnorm * norms_[r];
      const double cos = denom > 0.0 ? dot(query, embeddings_->row(r)) / denom : 0.0;
      if (cos > best_cos) {
        best_cos = cos;
        best = r;
      }
    }
    if (best == pool) {
      // Pool exhausted: repeat the current query vector.
      for (double q : query) block.values.push_back(static_cast<float>(q));
      continue;
    }
    taken[best] = 1;
    auto picked = embeddings_->row(best);
    block.values.insert(block.values.end(), picked.begin(), picked.end());
    for (std::size_t d = 0; d < dim; ++d) total[d] += picked[d];
    ++folded;
  }
  return block;
}

EmbeddingStore build_mock_futures(const Corpus& corpus, const EmbeddingStore& embeddings,
                                  std::size_t m, std::size_t k, std::uint64_t /*seed*/) {
  if (m == 0) throw ParameterError("mock futures need m >= 1");
  MockRetrievalFutures provider(corpus, embeddings);
  std::vector<float> values;
  values.reserve(corpus.utterance_count() * m * embeddings.dim());
  for (const auto& conv : corpus.conversations()) {
    for (std::size_t i = 0; i < conv.size(); ++i) {
      auto block = provider.futures_for({conv.id, i, m, k});
      values.insert(values.end(), block.values.begin(), block.values.end());
    }
  }
  return EmbeddingStore(embeddings.dim(), std::move(values), StoreKind::futures,
                        static_cast<std::uint32_t>(m));
}

}  // namespace ercmc
