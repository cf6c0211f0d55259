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

// Documents, the tokenizer and the rule-based sentence splitter, plus the
// JSON-lines corpus reader and writer.

#pragma once

#include <cstddef>
#include <fstream>
#include <functional>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "json.hpp"

#include "dale/error.hpp"
#include "dale/text.hpp"

namespace dale {

struct Token {
  std::string text;
  std::size_t byte_offset = 0;

  bool operator==(const Token&) const = default;
};

struct Sentence {
  std::vector<Token> tokens;
  std::size_t index_in_doc = 0;

  bool operator==(const Sentence&) const = default;
};

struct Document {
  std::string id;
  std::string text;
  std::vector<Sentence> sentences;
  std::optional<std::string> label_text;

  std::size_t token_count() const {
    std::size_t n = 0;
    for (const auto& s : sentences) n += s.tokens.size();
    return n;
  }

  std::vector<Token> tokens() const {
    std::vector<Token> out;
    out.reserve(token_count());
    for (const auto& s : sentences) out.insert(out.end(), s.tokens.begin(), s.tokens.end());
    return out;
  }

  std::vector<std::string> token_texts() const {
    std::vector<std::string> out;
    out.reserve(token_count());
    for (const auto& s : sentences) {
      for (const auto& t : s.tokens) out.push_back(t.text);
    }
    return out;
  }

  bool operator==(const Document&) const = default;
};

struct Corpus {
  std::string name;
  std::vector<Document> documents;

  bool operator==(const Corpus&) const = default;
};

struct TokenizerOptions {
  bool lowercase = false;
};

// Whitespace split, then every leading and trailing punctuation character
// becomes its own token. Internal punctuation stays ("gotinder.com").
inline std::vector<Token> tokenize(std::string_view input, TokenizerOptions opts = {}) {
  std::vector<Token> out;
  std::size_t i = 0;
  const std::size_t n = input.size();
  auto emit = [&](std::size_t begin, std::size_t end) {
    std::string_view piece = input.substr(begin, end - begin);
    out.push_back({opts.lowercase ? text::ascii_lower(piece) : std::string(piece), begin});
  };
  while (i < n) {
    auto cp = text::decode_utf8(input, i);
    if (text::is_space(cp.value)) {
      i += cp.length;
      continue;
    }
    // One whitespace-delimited chunk; keep code point boundaries so
    // trailing punctuation can be peeled right to left.
    std::vector<std::pair<std::size_t, text::CodePoint>> cps;
    while (i < n) {
      cp = text::decode_utf8(input, i);
      if (text::is_space(cp.value)) break;
      cps.emplace_back(i, cp);
      i += cp.length;
    }
    std::size_t lo = 0;
    std::size_t hi = cps.size();
    while (lo < hi && text::is_edge_punct(cps[lo].second.value)) {
      emit(cps[lo].first, cps[lo].first + cps[lo].second.length);
      ++lo;
    }
    std::size_t trail_begin = hi;
    while (trail_begin > lo && text::is_edge_punct(cps[trail_begin - 1].second.value)) {
      --trail_begin;
    }
    if (lo < trail_begin) {
      const std::size_t core_end = cps[trail_begin - 1].first + cps[trail_begin - 1].second.length;
      emit(cps[lo].first, core_end);
    }
    for (std::size_t k = trail_begin; k < hi; ++k) {
      emit(cps[k].first, cps[k].first + cps[k].second.length);
    }
  }
  return out;
}

namespace detail {

inline bool is_terminal(std::string_view t) { return t == "." || t == "!" || t == "?"; }

inline bool is_closer(std::string_view t) {
  return t == "\"" || t == "'" || t == ")" || t == "]" || t == "\xE2\x80\x9D" ||
         t == "\xE2\x80\x99";
}

}  // namespace detail

// A sentence ends after a terminal mark (. ! ?), plus any closing quotes or
// brackets that follow it, when the next token is capitalized or the input
// ends.
inline std::vector<Sentence> split_sentences(std::vector<Token> tokens) {
  std::vector<Sentence> out;
  std::size_t start = 0;
  std::size_t i = 0;
  const std::size_t n = tokens.size();
  auto close = [&](std::size_t end) {
    Sentence s;
    s.index_in_doc = out.size();
    s.tokens.assign(std::make_move_iterator(tokens.begin() + static_cast<std::ptrdiff_t>(start)),
                    std::make_move_iterator(tokens.begin() + static_cast<std::ptrdiff_t>(end)));
    out.push_back(std::move(s));
    start = end;
  };
  while (i < n) {
    if (!detail::is_terminal(tokens[i].text)) {
      ++i;
      continue;
    }
    std::size_t j = i + 1;
    while (j < n && (detail::is_terminal(tokens[j].text) || detail::is_closer(tokens[j].text))) ++j;
    if (j == n || text::starts_upper(tokens[j].text)) close(j);
    i = j;
  }
  if (start < n) close(n);
  return out;
}

inline Document make_document(std::string id, std::string body,
                              std::optional<std::string> label = std::nullopt,
                              TokenizerOptions opts = {}) {
  Document d;
  d.id = std::move(id);
  d.text = std::move(body);
  d.sentences = split_sentences(tokenize(d.text, opts));
  d.label_text = std::move(label);
  return d;
}

// Optional hook that derives the label string from a whole record, for
// corpora whose labels are structured (entity lists, label arrays).
using LabelExtractor = std::function<std::optional<std::string>(const nlohmann::json&)>;

inline Corpus parse_corpus(std::istream& in, std::string name,
                           const LabelExtractor& extract_label = nullptr) {
  Corpus corpus;
  corpus.name = std::move(name);
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  auto parse_error = [&](const std::string& why) {
    fail(ErrorCode::kParseError, "line " + std::to_string(line_no) + ": " + why);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (text::trim(line).empty()) continue;
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      parse_error(std::string("malformed JSON: ") + e.what());
    }
    if (!rec.is_object()) parse_error("record is not a JSON object");
    const auto text_it = rec.find("text");
    if (text_it == rec.end() || !text_it->is_string()) parse_error("missing string field \"text\"");
    std::string id;
    if (const auto it = rec.find("id"); it != rec.end() && !it->is_null()) {
      if (!it->is_string()) parse_error("field \"id\" must be a string");
      id = it->get<std::string>();
    } else {
      id = "line-" + std::to_string(line_no);
    }
    std::optional<std::string> label;
    if (extract_label) {
      label = extract_label(rec);
    } else if (const auto it = rec.find("label"); it != rec.end() && !it->is_null()) {
      if (!it->is_string()) parse_error("field \"label\" must be a string");
      label = it->get<std::string>();
    }
    if (!seen.insert(id).second) {
      fail(ErrorCode::kDuplicateId,
           "line " + std::to_string(line_no) + ": duplicate document id '" + id + "'");
    }
    corpus.documents.push_back(make_document(std::move(id), text_it->get<std::string>(),
                                             std::move(label)));
  }
  return corpus;
}

inline Corpus load_corpus(const std::string& path, const LabelExtractor& extract_label = nullptr) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIoError, "cannot read corpus: " + path);
  return parse_corpus(in, path, extract_label);
}

inline nlohmann::ordered_json document_record(const Document& d, bool emit_tokens = false) {
  nlohmann::ordered_json rec;
  rec["id"] = d.id;
  rec["text"] = d.text;
  if (d.label_text) rec["label"] = *d.label_text;
  if (emit_tokens) rec["tokens"] = d.token_texts();
  return rec;
}

inline void write_corpus(std::ostream& out, const Corpus& corpus, bool emit_tokens = false) {
  for (const auto& d : corpus.documents) out << document_record(d, emit_tokens).dump() << '\n';
}

inline void save_corpus(const std::string& path, const Corpus& corpus, bool emit_tokens = false) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::kIoError, "cannot write corpus: " + path);
  write_corpus(out, corpus, emit_tokens);
  if (!out) fail(ErrorCode::kIoError, "write failed: " + path);
}

}  // namespace dale
