#include <fstream>
#include <sstream>

#include "doctest.h"
#include "ercmc/corpus.hpp"
#include "ercmc/error.hpp"
#include "synthetic.hpp"
#include "temp_dir.hpp"

using namespace ercmc;

namespace {

const char* kTwoConversations =
    R"({"id":"a","utterances":[{"speaker":"P","text":"hi","label":"joy"},{"speaker":"Q","text":"yo","label":"neutral"}]})"
    "\n\n"
    R"({"id":"b","utterances":[{"speaker":"P","text":"hm"},{"speaker":"P","text":"ok","label":"joy"},{"speaker":"Q","text":"no","label":"anger"}]})"
    "\n";

}  // namespace

TEST_SUITE("corpus") {
  TEST_CASE("parses JSON lines and builds the vocabulary in order") {
    std::istringstream in(kTwoConversations);
    auto loaded = parse_corpus(in);
    const auto& c = loaded.corpus;
    REQUIRE(c.size() == 2);
    CHECK(c.utterance_count() == 5);
    CHECK(loaded.vocabulary.labels() == std::vector<std::string>{"joy", "neutral", "anger"});
    CHECK(c[1].utterances[0].label == std::nullopt);
    CHECK(c[1].utterances[2].label == 2u);
    CHECK(c[1].utterances[2].conv_index == 2u);
    CHECK(c.flat_index(1, 1) == 3u);
    CHECK(c.find_conversation("b") == 1u);
    CHECK_FALSE(c.find_conversation("zz"));
    CHECK_THROWS_AS(c.flat_index(1, 3), IndexError);
  }

  TEST_CASE("malformed lines report their line number") {
    std::istringstream in("{\"id\":\"a\",\"utterances\":[{\"speaker\":\"P\",\"text\":\"x\"}]}\n{oops\n");
    try {
      parse_corpus(in);
      FAIL("expected a parse error");
    } catch (const ParseError& e) {
      CHECK(e.line() == 2);
    }
    std::istringstream missing("{\"id\":\"a\"}\n");
    CHECK_THROWS_AS(parse_corpus(missing), ParseError);
    std::istringstream empty("{\"id\":\"a\",\"utterances\":[]}\n");
    CHECK_THROWS_AS(parse_corpus(empty), ParseError);
  }

  TEST_CASE("duplicate conversation ids are inconsistent") {
    std::istringstream in(
        "{\"id\":\"a\",\"utterances\":[{\"speaker\":\"P\",\"text\":\"x\"}]}\n"
        "{\"id\":\"a\",\"utterances\":[{\"speaker\":\"P\",\"text\":\"y\"}]}\n");
    CHECK_THROWS_AS(parse_corpus(in), ConsistencyError);
  }

  TEST_CASE("a fixed vocabulary rejects unseen labels") {
    LabelVocabulary vocab({"joy", "neutral"});
    std::istringstream in(kTwoConversations);
    CHECK_THROWS_AS(parse_corpus(in, &vocab), VocabularyError);
    CHECK_THROWS_AS(vocab.index_of("anger"), VocabularyError);
    CHECK_THROWS_AS(LabelVocabulary({"x", "x"}), VocabularyError);
  }

  TEST_CASE("write then read reproduces the corpus") {
    testing::TempDir dir;
    auto data = testing::synthetic_corpus({.conversations = 4, .seed = 3});
    write_corpus(dir / "c.jsonl", data.corpus, data.vocabulary);
    auto back = load_corpus(dir / "c.jsonl", &data.vocabulary);
    REQUIRE(back.corpus.size() == data.corpus.size());
    for (std::size_t c = 0; c < back.corpus.size(); ++c) {
      const auto& a = data.corpus[c];
      const auto& b = back.corpus[c];
      CHECK(a.id == b.id);
      REQUIRE(a.size() == b.size());
      for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a.utterances[i].speaker == b.utterances[i].speaker);
        CHECK(a.utterances[i].text == b.utterances[i].text);
        CHECK(a.utterances[i].label == b.utterances[i].label);
      }
    }
  }

  TEST_CASE("label vocabulary file has one label per line") {
    testing::TempDir dir;
    {
      std::ofstream out(dir / "labels.txt");
      out << "neutral\njoy\r\n\nanger\n";
    }
    auto vocab = LabelVocabulary::read(dir / "labels.txt");
    CHECK(vocab.labels() == std::vector<std::string>{"neutral", "joy", "anger"});
  }
}

TEST_SUITE("simplify") {
  TEST_CASE("retains exactly the utterances with enough followers") {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
      auto data = testing::synthetic_corpus({.conversations = 15, .min_length = 1, .max_length = 12, .seed = seed});
      for (std::size_t ell : {1u, 3u, 5u}) {
        auto s = simplify_testset(data.corpus, ell);
        std::size_t expected = 0;
        for (const auto& conv : data.corpus.conversations()) {
          expected += conv.size() > ell ? conv.size() - ell : 0;
        }
        CHECK(s.retained_count() == expected);
        for (const auto& kept : s.conversations) {
          for (std::size_t i : kept.retained) CHECK(i + ell < data.corpus[kept.conversation].size());
        }
      }
    }
  }

  TEST_CASE("zero followers is rejected") {
    auto data = testing::synthetic_corpus({.conversations = 2});
    CHECK_THROWS_AS(simplify_testset(data.corpus, 0), ParameterError);
  }
}
