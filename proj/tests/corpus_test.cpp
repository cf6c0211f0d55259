// Copyright 2026 The dale-forge Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "support.hpp"

namespace {

using dale::ErrorCode;
using dale::testing::TempDir;

std::vector<std::string> texts(const std::vector<dale::Token>& toks) {
  std::vector<std::string> out;
  for (const auto& t : toks) out.push_back(t.text);
  return out;
}

dale::ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const dale::Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no dale::Error thrown";
  return ErrorCode::kIoError;
}

TEST(Tokenize, EmptyInput) { EXPECT_TRUE(dale::tokenize("").empty()); }

TEST(Tokenize, TrailingPunctuationSplitInternalDotKept) {
  EXPECT_EQ(texts(dale::tokenize("gotinder.com,")), (std::vector<std::string>{"gotinder.com", ","}));
  EXPECT_EQ(texts(dale::tokenize("Agreement.")), (std::vector<std::string>{"Agreement", "."}));
}

TEST(Tokenize, LeadingAndTrailingRunsPeelOneByOne) {
  EXPECT_EQ(texts(dale::tokenize("(a) \"Buyer\".")),
            (std::vector<std::string>{"(", "a", ")", "\"", "Buyer", "\"", "."}));
  EXPECT_EQ(texts(dale::tokenize("U.S.")), (std::vector<std::string>{"U.S", "."}));
}

TEST(Tokenize, UnicodeWhitespaceAndQuotes) {
  EXPECT_EQ(texts(dale::tokenize("a b c\nd")), (std::vector<std::string>{"a", "b", "c", "d"}));
  EXPECT_EQ(texts(dale::tokenize("“term”")), (std::vector<std::string>{"“", "term", "”"}));
}

TEST(Tokenize, OffsetsPointAtSourceBytes) {
  const std::string s = "  Seller shall, (i) deliver.";
  const auto toks = dale::tokenize(s);
  ASSERT_FALSE(toks.empty());
  for (std::size_t i = 0; i < toks.size(); ++i) {
    EXPECT_EQ(s.substr(toks[i].byte_offset, toks[i].text.size()), toks[i].text);
    if (i) {
      EXPECT_GT(toks[i].byte_offset, toks[i - 1].byte_offset);
    }
  }
}

TEST(Tokenize, LowercaseOnlyWhenRequested) {
  EXPECT_EQ(texts(dale::tokenize("Buyer SHALL")), (std::vector<std::string>{"Buyer", "SHALL"}));
  EXPECT_EQ(texts(dale::tokenize("Buyer SHALL", {.lowercase = true})),
            (std::vector<std::string>{"buyer", "shall"}));
}

TEST(Tokenize, RetokenizingTheJoinedTextIsIdempotent) {
  std::mt19937_64 gen(11);
  const std::vector<std::string> pieces = {"Buyer", "(a)", "shall,", "\"pay\"", "U.S.", "--", "x.y", "!", "é."};
  std::uniform_int_distribution<std::size_t> pick(0, pieces.size() - 1);
  for (int trial = 0; trial < 200; ++trial) {
    std::string s;
    for (int i = 0; i < 12; ++i) s += pieces[pick(gen)] + (i % 3 ? " " : "  \t");
    const auto once = texts(dale::tokenize(s));
    const auto twice = texts(dale::tokenize(dale::text::join(once)));
    EXPECT_EQ(once, twice) << s;
    for (const auto& t : once) {
      EXPECT_FALSE(t.empty());
      EXPECT_EQ(t.find(' '), std::string::npos);
    }
  }
}

TEST(SplitSentences, Empty) { EXPECT_TRUE(dale::split_sentences({}).empty()); }

TEST(SplitSentences, BreaksBeforeCapitalizedToken) {
  const auto s = dale::split_sentences(dale::tokenize("A b. C d."));
  ASSERT_EQ(s.size(), 2u);
  EXPECT_EQ(s[0].tokens.size(), 3u);
  EXPECT_EQ(s[1].tokens.size(), 3u);
  EXPECT_EQ(s[0].index_in_doc, 0u);
  EXPECT_EQ(s[1].index_in_doc, 1u);
}

TEST(SplitSentences, NoTerminalPunctuation) {
  EXPECT_EQ(dale::split_sentences(dale::tokenize("No terminal punctuation")).size(), 1u);
}

TEST(SplitSentences, LowercaseContinuationDoesNotBreak) {
  EXPECT_EQ(dale::split_sentences(dale::tokenize("See sec. five of it. Then stop!")).size(), 2u);
}

TEST(SplitSentences, PartitionsTheTokenList) {
  std::mt19937_64 gen(3);
  for (int trial = 0; trial < 100; ++trial) {
    const std::string body = dale::testing::random_text(gen, 1 + trial % 7, 1, 9, 20);
    const auto toks = dale::tokenize(body);
    const auto sents = dale::split_sentences(toks);
    std::vector<dale::Token> joined;
    for (std::size_t i = 0; i < sents.size(); ++i) {
      EXPECT_FALSE(sents[i].tokens.empty());
      EXPECT_EQ(sents[i].index_in_doc, i);
      joined.insert(joined.end(), sents[i].tokens.begin(), sents[i].tokens.end());
    }
    EXPECT_EQ(joined, toks);
    EXPECT_EQ(sents.size(), static_cast<std::size_t>(1 + trial % 7));
  }
}

TEST(LoadCorpus, EmptyFile) {
  TempDir dir;
  dale::testing::write_file(dir.file("c.jsonl"), "");
  const auto c = dale::load_corpus(dir.file("c.jsonl"));
  EXPECT_TRUE(c.documents.empty());
}

TEST(LoadCorpus, SingleRecordFiveTokens) {
  std::istringstream in(R"({"id":"d1","text":"Buyer has full power."})" "\n");
  const auto c = dale::parse_corpus(in, "mem");
  ASSERT_EQ(c.documents.size(), 1u);
  const auto& d = c.documents[0];
  EXPECT_EQ(d.id, "d1");
  EXPECT_EQ(d.token_texts(), (std::vector<std::string>{"Buyer", "has", "full", "power", "."}));
  EXPECT_EQ(d.token_count(), 5u);
  EXPECT_FALSE(d.label_text.has_value());
}

TEST(LoadCorpus, MissingIdsUseLineNumbersAndOrderIsKept) {
  std::istringstream in("{\"text\":\"one\"}\n\n{\"text\":\"two\",\"label\":\"L\"}\n{\"id\":\"x\",\"text\":\"three\"}\n");
  const auto c = dale::parse_corpus(in, "mem");
  ASSERT_EQ(c.documents.size(), 3u);
  EXPECT_EQ(c.documents[0].id, "line-1");
  EXPECT_EQ(c.documents[1].id, "line-3");
  EXPECT_EQ(c.documents[1].label_text, std::optional<std::string>("L"));
  EXPECT_EQ(c.documents[2].id, "x");
}

TEST(LoadCorpus, DuplicateId) {
  std::istringstream in("{\"id\":\"d1\",\"text\":\"a\"}\n{\"id\":\"d1\",\"text\":\"b\"}\n");
  EXPECT_EQ(code_of([&] { dale::parse_corpus(in, "mem"); }), ErrorCode::kDuplicateId);
}

TEST(LoadCorpus, MalformedRecordReportsLine) {
  std::istringstream in("{\"text\":\"ok\"}\n{\"text\": 3}\n");
  try {
    dale::parse_corpus(in, "mem");
    FAIL() << "expected ParseError";
  } catch (const dale::Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kParseError);
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
  }
  std::istringstream bad("not json\n");
  EXPECT_EQ(code_of([&] { dale::parse_corpus(bad, "mem"); }), ErrorCode::kParseError);
}

TEST(LoadCorpus, UnreadablePath) {
  EXPECT_EQ(code_of([] { dale::load_corpus("/nonexistent/dir/c.jsonl"); }), ErrorCode::kIoError);
}

TEST(LoadCorpus, SaveLoadRoundTripAndDeterminism) {
  TempDir dir;
  std::mt19937_64 gen(5);
  dale::Corpus c = dale::testing::random_corpus(gen, 20, 3, 2, 8, 30);
  c.documents[3].label_text.reset();
  c.documents[4].text = "Unicode été “quoted” text.";
  c.documents[4].sentences = dale::split_sentences(dale::tokenize(c.documents[4].text));
  const std::string p = dir.file("c.jsonl");
  dale::save_corpus(p, c);
  auto a = dale::load_corpus(p);
  auto b = dale::load_corpus(p);
  EXPECT_EQ(a, b);
  a.name = c.name;
  EXPECT_EQ(a, c);
}

TEST(LoadCorpus, EmitTokensAddsTokenArray) {
  const auto d = dale::make_document("d", "Buyer pays.", "L");
  const auto rec = dale::document_record(d, true);
  EXPECT_EQ(rec["tokens"], nlohmann::ordered_json::array({"Buyer", "pays", "."}));
  EXPECT_EQ(rec.dump(), R"({"id":"d","text":"Buyer pays.","label":"L","tokens":["Buyer","pays","."]})");
}

}  // namespace
