#include "ercmc/embedding_store.hpp"

#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "ercmc/error.hpp"
#include "ercmc/io_util.hpp"

namespace ercmc {
namespace {

constexpr char kMagic[4] = {'E', 'R', 'C', 'E'};

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed) {
  std::uint64_t h = 0xcbf29ce484222325ULL ^ splitmix64(seed);
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return splitmix64(h);
}

}  // namespace

EmbeddingStore::EmbeddingStore(std::uint32_t dim, std::vector<float> values, StoreKind kind,
                               std::uint32_t futures_per_utterance)
    : dim_(dim), kind_(kind), m_(futures_per_utterance), values_(std::move(values)) {
  if (dim_ == 0) throw FormatError("embedding dim must be positive");
  if (values_.size() % dim_ != 0) {
    throw FormatError("embedding payload of " + std::to_string(values_.size()) +
                      " values is not a multiple of dim " + std::to_string(dim_));
  }
  if (kind_ == StoreKind::futures && m_ == 0) {
    throw FormatError("futures store needs a positive futures count");
  }
  if (kind_ == StoreKind::base) m_ = 0;
}

std::span<const float> EmbeddingStore::row(std::uint64_t r) const {
  if (r >= rows()) {
    throw IndexError("embedding row " + std::to_string(r) + " outside store of " +
                     std::to_string(rows()) + " rows");
  }
  return std::span<const float>(values_).subspan(r * dim_, dim_);
}

std::uint64_t EmbeddingStore::expected_rows(const Corpus& corpus) const {
  const std::uint64_t per = kind_ == StoreKind::futures ? m_ : 1;
  return corpus.utterance_count() * per;
}

void EmbeddingStore::check_bound(const Corpus& corpus, const std::string& label) const {
  if (rows() != expected_rows(corpus)) {
    std::ostringstream os;
    os << label << " has " << rows() << " rows but the corpus of "
       << corpus.utterance_count() << " utterances needs " << expected_rows(corpus);
    throw ConsistencyError(os.str());
  }
}

void write_embeddings(std::ostream& out, const EmbeddingStore& store) {
  for (float v : store.values()) {
    if (!std::isfinite(v)) throw NumericError("refusing to write a non-finite embedding value");
  }
  out.write(kMagic, 4);
  le::put<std::uint32_t>(out, kEmbeddingFormatVersion);
  le::put<std::uint32_t>(out, store.dim());
  le::put<std::uint64_t>(out, store.rows());
  le::put<std::uint8_t>(out, static_cast<std::uint8_t>(store.kind()));
  le::put<std::uint32_t>(out, store.futures_per_utterance());
  for (float v : store.values()) le::put_f32(out, v);
}

void write_embeddings(const std::filesystem::path& path, const EmbeddingStore& store) {
  write_atomically(path, [&](std::ostream& out) { write_embeddings(out, store); }, true);
}

EmbeddingStore read_embeddings(std::istream& in) {
  char magic[4] = {};
  in.read(magic, 4);
  if (in.gcount() != 4 || std::string_view(magic, 4) != std::string_view(kMagic, 4)) {
    throw FormatError("not an ERCE embedding file (bad magic)");
  }
  const auto version = le::get<std::uint32_t>(in, "version");
  if (version != kEmbeddingFormatVersion) {
    throw FormatError("unsupported ERCE version " + std::to_string(version));
  }
  const auto dim = le::get<std::uint32_t>(in, "dim");
  const auto rows = le::get<std::uint64_t>(in, "row count");
  const auto flag = le::get<std::uint8_t>(in, "kind flag");
  const auto m = le::get<std::uint32_t>(in, "futures count");
  if (dim == 0) throw FormatError("ERCE header has zero dim");
  if (flag > 1) throw FormatError("ERCE kind flag " + std::to_string(flag) + " is not 0 or 1");
  if (flag == 1 && (m == 0 || rows % m != 0)) {
    throw FormatError("ERCE futures header: row count " + std::to_string(rows) +
                      " is not a positive multiple of m=" + std::to_string(m));
  }
  if (rows > (std::uint64_t{1} << 40) / dim) throw FormatError("ERCE row count is implausible");
  std::vector<float> values(rows * dim);
  for (auto& v : values) v = le::get_f32(in, "payload");
  return EmbeddingStore(dim, std::move(values), static_cast<StoreKind>(flag), m);
}

EmbeddingStore read_embeddings(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open embedding file " + path.string());
  return read_embeddings(in);
}

std::filesystem::path manifest_path(const std::filesystem::path& store_path) {
  auto p = store_path;
  p += ".manifest.json";
  return p;
}

void write_manifest(const std::filesystem::path& store_path, const std::string& json_text) {
  write_atomically(manifest_path(store_path), [&](std::ostream& out) { out << json_text << '\n'; });
}

bool verify_manifest(const std::filesystem::path& store_path,
                     const std::filesystem::path& corpus_path) {
  const auto mpath = manifest_path(store_path);
  if (!std::filesystem::exists(mpath)) return false;
  std::ifstream in(mpath);
  nlohmann::json manifest;
  try {
    in >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("malformed manifest " + mpath.string() + ": " + e.what());
  }
  if (!manifest.is_object() || !manifest.contains("corpus_sha256") ||
      !manifest["corpus_sha256"].is_string()) {
    throw FormatError("manifest " + mpath.string() + " lacks corpus_sha256");
  }
  const auto expected = manifest["corpus_sha256"].get<std::string>();
  const auto actual = sha256_file(corpus_path);
  if (expected != actual) {
    throw ConsistencyError("manifest " + mpath.string() + " was produced for a different corpus (" +
                           expected + " != " + actual + ")");
  }
  return true;
}

std::vector<float> mock_encode_text(std::string_view text, std::uint32_t dim, std::uint64_t seed) {
  if (dim == 0) throw ParameterError("mock encoder dim must be positive");
  std::vector<double> acc(dim, 0.0);
  if (!text.empty()) {
    // Boundary markers make every nonempty text yield at least one trigram.
    std::string padded;
    padded.reserve(text.size() + 2);
    padded.push_back('\x02');
    padded.append(text);
    padded.push_back('\x03');
    for (std::size_t i = 0; i + 3 <= padded.size(); ++i) {
      const std::uint64_t h = fnv1a(std::string_view(padded).substr(i, 3), seed);
      acc[h % dim] += (h >> 63) ? -1.0 : 1.0;
    }
  }
  double norm = 0.0;
  for (double v : acc) norm += v * v;
  std::vector<float> out(dim, 0.0f);
  if (norm == 0.0) {
    // Empty text, or trigrams that cancelled exactly.
    out[splitmix64(seed ^ 0x5eedULL) % dim] = 1.0f;
    return out;
  }
  norm = std::sqrt(norm);
  for (std::uint32_t i = 0; i < dim; ++i) out[i] = static_cast<float>(acc[i] / norm);
  return out;
}

EmbeddingStore mock_encode(const Corpus& corpus, std::uint32_t dim, std::uint64_t seed) {
  std::vector<float> values;
  values.reserve(corpus.utterance_count() * dim);
  for (const auto& conv : corpus.conversations()) {
    for (const auto& u : conv.utterances) {
      auto v = mock_encode_text(u.text, dim, seed);
      values.insert(values.end(), v.begin(), v.end());
    }
  }
  return EmbeddingStore(dim, std::move(values));
}

}  // namespace ercmc
