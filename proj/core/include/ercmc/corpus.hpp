#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace ercmc {

struct Utterance {
  std::string speaker;
  std::string text;
  std::optional<std::size_t> label;
  std::size_t conv_index = 0;
};

struct Conversation {
  std::string id;
  std::vector<Utterance> utterances;

  std::size_t size() const noexcept { return utterances.size(); }
};

// Ordered label set. Class indices are positions in this list.
class LabelVocabulary {
 public:
  LabelVocabulary() = default;
  explicit LabelVocabulary(std::vector<std::string> labels);

  // Index of `label`, appending it when absent.
  std::size_t intern(const std::string& label);
  std::optional<std::size_t> find(const std::string& label) const;
  // Throws VocabularyError for unknown labels.
  std::size_t index_of(const std::string& label) const;
  const std::string& name_of(std::size_t index) const;
  std::size_t size() const noexcept { return labels_.size(); }
  const std::vector<std::string>& labels() const noexcept { return labels_; }

  // One label per line.
  static LabelVocabulary read(const std::filesystem::path& path);

  friend bool operator==(const LabelVocabulary& a, const LabelVocabulary& b) {
    return a.labels_ == b.labels_;
  }

 private:
  std::vector<std::string> labels_;
  std::unordered_map<std::string, std::size_t> index_;
};

class Corpus {
 public:
  Corpus() = default;
  explicit Corpus(std::vector<Conversation> conversations);

  const std::vector<Conversation>& conversations() const noexcept { return conversations_; }
  std::size_t size() const noexcept { return conversations_.size(); }
  const Conversation& operator[](std::size_t i) const { return conversations_[i]; }
  std::size_t utterance_count() const noexcept { return total_; }

  // Row of utterance (conversation, index) in corpus order.
  std::size_t flat_index(std::size_t conversation, std::size_t index) const;
  std::size_t conversation_offset(std::size_t conversation) const {
    return offsets_.at(conversation);
  }
  std::optional<std::size_t> find_conversation(const std::string& id) const;

 private:
  std::vector<Conversation> conversations_;
  std::vector<std::size_t> offsets_;
  std::unordered_map<std::string, std::size_t> by_id_;
  std::size_t total_ = 0;
};

struct LoadedCorpus {
  Corpus corpus;
  LabelVocabulary vocabulary;
};

// JSON-lines corpus: {"id": ..., "utterances": [{"speaker", "text", "label"?}]}.
// With `fixed_vocabulary`, labels outside it raise VocabularyError; otherwise
// the vocabulary is built in first-appearance order.
LoadedCorpus parse_corpus(std::istream& in, const LabelVocabulary* fixed_vocabulary = nullptr);
LoadedCorpus load_corpus(const std::filesystem::path& path,
                         const LabelVocabulary* fixed_vocabulary = nullptr);

void write_corpus(std::ostream& out, const Corpus& corpus, const LabelVocabulary& vocabulary);
void write_corpus(const std::filesystem::path& path, const Corpus& corpus,
                  const LabelVocabulary& vocabulary);

// Utterances with at least `followers` later utterances in their conversation.
struct SimplifiedConversation {
  std::size_t conversation = 0;
  std::vector<std::size_t> retained;
};

struct SimplifiedCorpus {
  std::size_t followers = 0;
  std::vector<SimplifiedConversation> conversations;
  std::size_t retained_count() const;
};

SimplifiedCorpus simplify_testset(const Corpus& corpus, std::size_t followers);

}  // namespace ercmc
