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

// Shared helpers for the test binaries: scripted random sources, a table
// embedding provider, random corpora and scratch directories.

#pragma once

#include <atomic>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "dale/dale.hpp"

namespace dale::testing {

// Replays fixed draws; runs out loudly so a test notices extra draws.
class ScriptedRng {
 public:
  ScriptedRng(std::vector<double> gaussians, std::vector<std::size_t> indices = {})
      : gaussians_(gaussians.begin(), gaussians.end()), indices_(indices.begin(), indices.end()) {}

  double gaussian(double, double) {
    if (gaussians_.empty()) throw std::logic_error("scripted gaussian draws exhausted");
    const double g = gaussians_.front();
    gaussians_.pop_front();
    return g;
  }

  std::size_t uniform_index(std::size_t n) {
    if (indices_.empty()) throw std::logic_error("scripted index draws exhausted");
    const std::size_t i = indices_.front();
    indices_.pop_front();
    if (i >= n) throw std::logic_error("scripted index out of range");
    return i;
  }

  std::size_t gaussians_left() const { return gaussians_.size(); }

 private:
  std::deque<double> gaussians_;
  std::deque<std::size_t> indices_;
};

// Always below any sensible gate threshold: no hints, no selection.
struct NeverRng {
  double gaussian(double, double) { return -1e9; }
  std::size_t uniform_index(std::size_t) { return 0; }
};

struct AlwaysRng {
  double gaussian(double, double) { return 1e9; }
  std::size_t uniform_index(std::size_t) { return 0; }
};

// Exact-text lookup with an optional fallback for unlisted texts.
class TableProvider final : public EmbeddingProvider {
 public:
  using Fallback = std::function<EmbeddingVector(std::string_view)>;

  TableProvider(std::size_t dim, std::map<std::string, std::vector<double>> table, Fallback fb = nullptr)
      : dim_(dim), fallback_(std::move(fb)) {
    for (auto& [k, v] : table) table_[k] = EmbeddingVector{std::move(v)};
  }

  ProviderKind kind() const override { return ProviderKind::kFileBacked; }
  std::size_t dim() const override { return dim_; }

  EmbeddingVector embed(std::string_view s) override {
    const auto it = table_.find(std::string(s));
    if (it != table_.end()) return it->second;
    if (fallback_) return fallback_(s);
    fail(ErrorCode::kKeyNotFound, "no table entry for '" + std::string(s) + "'");
  }

 private:
  std::size_t dim_;
  std::map<std::string, EmbeddingVector> table_;
  Fallback fallback_;
};

inline std::vector<std::string> words(const std::string& s) { return text::split_spaces(s); }

// Random sentences over a small vocabulary. Words are lowercase so the
// sentence splitter only breaks where "." is followed by the next sentence's
// capitalized first word.
inline std::string random_text(std::mt19937_64& gen, std::size_t sentences, std::size_t min_len,
                               std::size_t max_len, std::size_t vocab) {
  std::uniform_int_distribution<std::size_t> len(min_len, max_len);
  std::uniform_int_distribution<std::size_t> word(0, vocab - 1);
  std::string out;
  for (std::size_t s = 0; s < sentences; ++s) {
    if (s) out += ' ';
    const std::size_t n = len(gen);
    for (std::size_t i = 0; i < n; ++i) {
      std::string w = "w" + std::to_string(word(gen));
      if (i == 0) w[0] = 'W';
      if (i) out += ' ';
      out += w;
    }
    out += " .";
  }
  return out;
}

inline Corpus random_corpus(std::mt19937_64& gen, std::size_t docs, std::size_t sentences,
                            std::size_t min_len, std::size_t max_len, std::size_t vocab) {
  Corpus c;
  c.name = "random";
  for (std::size_t d = 0; d < docs; ++d) {
    c.documents.push_back(make_document("d" + std::to_string(d),
                                        random_text(gen, sentences, min_len, max_len, vocab), "Label"));
  }
  return c;
}

// Unique scratch directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("dale-test-" + std::to_string(rd()) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string file(const std::string& name) const { return (path_ / name).string(); }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace dale::testing
