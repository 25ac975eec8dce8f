#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ercmc/corpus.hpp"

namespace ercmc {

enum class StoreKind : std::uint8_t { base = 0, futures = 1 };

// Dense f32 rows addressed implicitly by corpus order. A futures store holds
// `futures_per_utterance` consecutive rows per utterance.
class EmbeddingStore {
 public:
  EmbeddingStore() = default;
  EmbeddingStore(std::uint32_t dim, std::vector<float> values, StoreKind kind = StoreKind::base,
                 std::uint32_t futures_per_utterance = 0);

  std::uint32_t dim() const noexcept { return dim_; }
  std::uint64_t rows() const noexcept { return dim_ ? values_.size() / dim_ : 0; }
  StoreKind kind() const noexcept { return kind_; }
  std::uint32_t futures_per_utterance() const noexcept { return m_; }
  std::span<const float> row(std::uint64_t r) const;
  std::span<const float> values() const noexcept { return values_; }

  // Rows this store must have to cover `corpus`.
  std::uint64_t expected_rows(const Corpus& corpus) const;
  // Throws ConsistencyError when the row count does not match `corpus`.
  void check_bound(const Corpus& corpus, const std::string& label) const;

  friend bool operator==(const EmbeddingStore&, const EmbeddingStore&) = default;

 private:
  std::uint32_t dim_ = 0;
  StoreKind kind_ = StoreKind::base;
  std::uint32_t m_ = 0;
  std::vector<float> values_;
};

inline constexpr std::uint32_t kEmbeddingFormatVersion = 1;
// magic, version, dim, row count, kind flag, futures count.
inline constexpr std::size_t kEmbeddingHeaderBytes = 4 + 4 + 4 + 8 + 1 + 4;

void write_embeddings(std::ostream& out, const EmbeddingStore& store);
void write_embeddings(const std::filesystem::path& path, const EmbeddingStore& store);
EmbeddingStore read_embeddings(std::istream& in);
EmbeddingStore read_embeddings(const std::filesystem::path& path);

// Sidecar manifest written beside every ERCE file: "<file>.manifest.json".
std::filesystem::path manifest_path(const std::filesystem::path& store_path);
void write_manifest(const std::filesystem::path& store_path, const std::string& json_text);
// When a manifest exists beside `store_path`, its corpus_sha256 must equal the
// hash of `corpus_path`. Returns false when no manifest is present.
bool verify_manifest(const std::filesystem::path& store_path,
                     const std::filesystem::path& corpus_path);

// Signed character-trigram hashing into `dim` buckets, scaled to unit norm.
std::vector<float> mock_encode_text(std::string_view text, std::uint32_t dim, std::uint64_t seed);
EmbeddingStore mock_encode(const Corpus& corpus, std::uint32_t dim, std::uint64_t seed);

}  // namespace ercmc
