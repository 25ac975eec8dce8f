#include "ercmc/corpus.hpp"

#include <fstream>
#include <nlohmann/json.hpp>

#include "ercmc/error.hpp"
#include "ercmc/io_util.hpp"

namespace ercmc {

using nlohmann::json;

LabelVocabulary::LabelVocabulary(std::vector<std::string> labels) {
  for (auto& l : labels) {
    if (find(l)) throw VocabularyError("duplicate label '" + l + "' in vocabulary");
    intern(l);
  }
}

std::size_t LabelVocabulary::intern(const std::string& label) {
  if (auto hit = find(label)) return *hit;
  index_.emplace(label, labels_.size());
  labels_.push_back(label);
  return labels_.size() - 1;
}

std::optional<std::size_t> LabelVocabulary::find(const std::string& label) const {
  auto it = index_.find(label);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::size_t LabelVocabulary::index_of(const std::string& label) const {
  if (auto hit = find(label)) return *hit;
  throw VocabularyError("label '" + label + "' is not in the vocabulary");
}

const std::string& LabelVocabulary::name_of(std::size_t index) const {
  if (index >= labels_.size()) {
    throw VocabularyError("class index " + std::to_string(index) + " outside vocabulary of " +
                          std::to_string(labels_.size()));
  }
  return labels_[index];
}

LabelVocabulary LabelVocabulary::read(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open vocabulary file " + path.string());
  std::vector<std::string> labels;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) labels.push_back(line);
  }
  return LabelVocabulary(std::move(labels));
}

Corpus::Corpus(std::vector<Conversation> conversations)
    : conversations_(std::move(conversations)) {
  offsets_.reserve(conversations_.size());
  for (std::size_t c = 0; c < conversations_.size(); ++c) {
    auto& conv = conversations_[c];
    if (conv.utterances.empty()) {
      throw ConsistencyError("conversation '" + conv.id + "' has no utterances");
    }
    for (std::size_t i = 0; i < conv.utterances.size(); ++i) conv.utterances[i].conv_index = i;
    offsets_.push_back(total_);
    total_ += conv.utterances.size();
    if (!by_id_.emplace(conv.id, c).second) {
      throw ConsistencyError("duplicate conversation id '" + conv.id + "'");
    }
  }
}

std::size_t Corpus::flat_index(std::size_t conversation, std::size_t index) const {
  if (conversation >= conversations_.size() ||
      index >= conversations_[conversation].utterances.size()) {
    throw IndexError("utterance (" + std::to_string(conversation) + ", " +
                     std::to_string(index) + ") does not exist");
  }
  return offsets_[conversation] + index;
}

std::optional<std::size_t> Corpus::find_conversation(const std::string& id) const {
  auto it = by_id_.find(id);
  if (it == by_id_.end()) return std::nullopt;
  return it->second;
}

LoadedCorpus parse_corpus(std::istream& in, const LabelVocabulary* fixed_vocabulary) {
  LabelVocabulary vocabulary = fixed_vocabulary ? *fixed_vocabulary : LabelVocabulary{};
  std::vector<Conversation> conversations;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json record;
    try {
      record = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(std::string("malformed corpus record: ") + e.what(), line_no);
    }
    if (!record.is_object() || !record.contains("id") || !record["id"].is_string() ||
        !record.contains("utterances") || !record["utterances"].is_array()) {
      throw ParseError("corpus record needs string 'id' and array 'utterances'", line_no);
    }
    Conversation conv;
    conv.id = record["id"].get<std::string>();
    for (const auto& u : record["utterances"]) {
      if (!u.is_object() || !u.contains("speaker") || !u["speaker"].is_string() ||
          !u.contains("text") || !u["text"].is_string()) {
        throw ParseError("utterance needs string 'speaker' and 'text'", line_no);
      }
      Utterance utt;
      utt.speaker = u["speaker"].get<std::string>();
      utt.text = u["text"].get<std::string>();
      if (u.contains("label") && !u["label"].is_null()) {
        if (!u["label"].is_string()) throw ParseError("utterance 'label' must be a string", line_no);
        const auto name = u["label"].get<std::string>();
        if (fixed_vocabulary) {
          if (!vocabulary.find(name)) {
            throw VocabularyError("line " + std::to_string(line_no) + ": label '" + name +
                                  "' is not in the fixed vocabulary");
          }
          utt.label = vocabulary.index_of(name);
        } else {
          utt.label = vocabulary.intern(name);
        }
      }
      utt.conv_index = conv.utterances.size();
      conv.utterances.push_back(std::move(utt));
    }
    if (conv.utterances.empty()) {
      throw ParseError("conversation '" + conv.id + "' has no utterances", line_no);
    }
    conversations.push_back(std::move(conv));
  }
  return {Corpus(std::move(conversations)), std::move(vocabulary)};
}

LoadedCorpus load_corpus(const std::filesystem::path& path,
                         const LabelVocabulary* fixed_vocabulary) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open corpus file " + path.string());
  return parse_corpus(in, fixed_vocabulary);
}

void write_corpus(std::ostream& out, const Corpus& corpus, const LabelVocabulary& vocabulary) {
  for (const auto& conv : corpus.conversations()) {
    json utterances = json::array();
    for (const auto& u : conv.utterances) {
      json item = {{"speaker", u.speaker}, {"text", u.text}};
      if (u.label) item["label"] = vocabulary.name_of(*u.label);
      utterances.push_back(std::move(item));
    }
    json record = {{"id", conv.id}, {"utterances", std::move(utterances)}};
    out << record.dump() << '\n';
  }
}

void write_corpus(const std::filesystem::path& path, const Corpus& corpus,
                  const LabelVocabulary& vocabulary) {
  write_atomically(path, [&](std::ostream& out) { write_corpus(out, corpus, vocabulary); });
}

std::size_t SimplifiedCorpus::retained_count() const {
  std::size_t n = 0;
  for (const auto& c : conversations) n += c.retained.size();
  return n;
}

SimplifiedCorpus simplify_testset(const Corpus& corpus, std::size_t followers) {
  if (followers == 0) throw ParameterError("simplify_testset needs at least one follower");
  SimplifiedCorpus out;
  out.followers = followers;
  for (std::size_t c = 0; c < corpus.size(); ++c) {
    const std::size_t n = corpus[c].size();
    if (n <= followers) continue;
    SimplifiedConversation kept{c, {}};
    for (std::size_t i = 0; i + followers < n; ++i) kept.retained.push_back(i);
    out.conversations.push_back(std::move(kept));
  }
  return out;
}

}  // namespace ercmc
