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

// Embedding providers behind one interface, plus the vector arithmetic used
// by every similarity score in the pipeline.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <memory>
#include <mutex>
#include <semaphore>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "json.hpp"

#include "dale/corpus.hpp"
#include "dale/error.hpp"
#include "dale/http.hpp"
#include "dale/text.hpp"

namespace dale {

struct EmbeddingVector {
  std::vector<double> values;

  std::size_t dim() const noexcept { return values.size(); }
  bool operator==(const EmbeddingVector&) const = default;
};

inline double dot(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.dim() != b.dim()) {
    fail(ErrorCode::kDimMismatch, "dimension mismatch: " + std::to_string(a.dim()) + " vs " +
                                      std::to_string(b.dim()));
  }
  double s = 0.0;
  for (std::size_t i = 0; i < a.dim(); ++i) s += a.values[i] * b.values[i];
  return s;
}

inline double l2_norm(const EmbeddingVector& v) {
  double s = 0.0;
  for (double x : v.values) s += x * x;
  return std::sqrt(s);
}

inline double cosine(const EmbeddingVector& a, const EmbeddingVector& b) {
  const double d = dot(a, b);
  const double na = l2_norm(a);
  const double nb = l2_norm(b);
  if (na == 0.0 || nb == 0.0) fail(ErrorCode::kZeroVector, "cosine of a zero vector");
  return std::clamp(d / (na * nb), -1.0, 1.0);
}

// Elementwise lambda * x + (1 - lambda) * y.
inline EmbeddingVector blend(const EmbeddingVector& x, const EmbeddingVector& y, double lambda) {
  if (x.dim() != y.dim()) {
    fail(ErrorCode::kDimMismatch, "dimension mismatch: " + std::to_string(x.dim()) + " vs " +
                                      std::to_string(y.dim()));
  }
  EmbeddingVector out;
  out.values.resize(x.dim());
  for (std::size_t i = 0; i < x.dim(); ++i) {
    out.values[i] = lambda * x.values[i] + (1.0 - lambda) * y.values[i];
  }
  return out;
}

enum class ProviderKind { kHashedBow, kFileBacked, kRemote };

// Providers are deterministic: the same text always maps to the same vector
// for the lifetime of the provider. Implementations are safe to call from
// several threads.
class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;

  virtual ProviderKind kind() const = 0;
  virtual std::size_t dim() const = 0;

  // `text` is already known to be non-blank.
  virtual EmbeddingVector embed(std::string_view text) = 0;

  virtual std::vector<EmbeddingVector> embed_batch(std::span<const std::string> texts) {
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (const auto& t : texts) out.push_back(embed(t));
    return out;
  }
};

inline void require_text(std::string_view s) {
  if (text::trim(s).empty()) fail(ErrorCode::kEmptyText, "cannot embed empty text");
}

inline EmbeddingVector embed_text(EmbeddingProvider& provider, std::string_view s) {
  require_text(s);
  return provider.embed(s);
}

inline std::vector<EmbeddingVector> embed_texts(EmbeddingProvider& provider,
                                                std::span<const std::string> texts) {
  for (const auto& t : texts) require_text(t);
  return provider.embed_batch(texts);
}

// Bag of words: each token (ASCII-lowercased) is hashed with FNV-1a into one
// of `dim` buckets; the count vector is L2-normalized.
class HashedBowProvider final : public EmbeddingProvider {
 public:
  explicit HashedBowProvider(std::size_t dim = 512) : dim_(dim) {
    if (dim == 0) fail(ErrorCode::kInvalidConfig, "embedding dim must be positive");
  }

  ProviderKind kind() const override { return ProviderKind::kHashedBow; }
  std::size_t dim() const override { return dim_; }

  static std::size_t bucket(std::string_view token, std::size_t dim) {
    return static_cast<std::size_t>(text::fnv1a64(text::ascii_lower(token)) % dim);
  }

  EmbeddingVector embed(std::string_view s) override {
    EmbeddingVector v;
    v.values.assign(dim_, 0.0);
    for (const auto& tok : tokenize(s)) v.values[bucket(tok.text, dim_)] += 1.0;
    const double n = l2_norm(v);
    if (n == 0.0) fail(ErrorCode::kEmptyText, "text has no tokens");
    for (double& x : v.values) x /= n;
    return v;
  }

 private:
  std::size_t dim_;
};

namespace detail {

inline EmbeddingVector checked_vector(const nlohmann::json& arr, std::size_t want_dim,
                                      ErrorCode code, const std::string& where) {
  if (!arr.is_array()) fail(code, where + ": vector is not an array");
  EmbeddingVector v;
  v.values.reserve(arr.size());
  for (const auto& x : arr) {
    if (!x.is_number()) fail(code, where + ": vector entry is not a number");
    const double d = x.get<double>();
    if (!std::isfinite(d)) fail(code, where + ": non-finite vector entry");
    v.values.push_back(d);
  }
  if (v.values.empty()) fail(code, where + ": empty vector");
  if (want_dim != 0 && v.dim() != want_dim) {
    fail(code, where + ": expected dim " + std::to_string(want_dim) + ", got " +
                   std::to_string(v.dim()));
  }
  return v;
}

}  // namespace detail

// Exact-key lookup table read from JSON-lines {"key": ..., "vector": [...]}.
class FileBackedProvider final : public EmbeddingProvider {
 public:
  explicit FileBackedProvider(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::kIoError, "cannot read embeddings: " + path);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (text::trim(line).empty()) continue;
      const std::string where = path + " line " + std::to_string(line_no);
      nlohmann::json rec;
      try {
        rec = nlohmann::json::parse(line);
      } catch (const nlohmann::json::parse_error& e) {
        fail(ErrorCode::kParseError, where + ": " + e.what());
      }
      if (!rec.is_object() || !rec.contains("key") || !rec["key"].is_string()) {
        fail(ErrorCode::kParseError, where + ": missing string field \"key\"");
      }
      if (!rec.contains("vector")) fail(ErrorCode::kParseError, where + ": missing field \"vector\"");
      auto v = detail::checked_vector(rec["vector"], dim_, ErrorCode::kParseError, where);
      dim_ = v.dim();
      table_[rec["key"].get<std::string>()] = std::move(v);
    }
    if (table_.empty()) fail(ErrorCode::kParseError, "embedding file has no entries: " + path);
  }

  ProviderKind kind() const override { return ProviderKind::kFileBacked; }
  std::size_t dim() const override { return dim_; }

  EmbeddingVector embed(std::string_view s) override {
    const auto it = table_.find(std::string(s));
    if (it == table_.end()) fail(ErrorCode::kKeyNotFound, "no stored embedding for '" + std::string(s) + "'");
    return it->second;
  }

 private:
  std::unordered_map<std::string, EmbeddingVector> table_;
  std::size_t dim_ = 0;
};

// Client for POST /embed {"texts": [...]} -> {"vectors": [[...]], "dim": N}.
// Results are memoized so a text maps to one vector for the provider's
// lifetime; uncached texts go out in batches of at most `max_batch`.
class RemoteProvider final : public EmbeddingProvider {
 public:
  RemoteProvider(const std::string& endpoint, std::size_t dim, std::size_t max_batch = 64,
                 int max_in_flight = 4)
      : endpoint_(http::parse_endpoint(endpoint)),
        dim_(dim),
        max_batch_(max_batch == 0 ? 64 : max_batch),
        in_flight_(std::max(1, max_in_flight)) {}

  ProviderKind kind() const override { return ProviderKind::kRemote; }
  std::size_t dim() const override { return dim_; }
  std::size_t requests_sent() const {
    std::lock_guard<std::mutex> lock(mu_);
    return requests_;
  }

  EmbeddingVector embed(std::string_view s) override {
    const std::string key(s);
    return embed_batch(std::span<const std::string>(&key, 1)).front();
  }

  std::vector<EmbeddingVector> embed_batch(std::span<const std::string> texts) override {
    std::vector<std::string> missing;
    {
      std::lock_guard<std::mutex> lock(mu_);
      std::unordered_map<std::string, bool> queued;
      for (const auto& t : texts) {
        if (!cache_.count(t) && !queued[t]) {
          queued[t] = true;
          missing.push_back(t);
        }
      }
    }
    for (std::size_t b = 0; b < missing.size(); b += max_batch_) {
      const std::size_t e = std::min(missing.size(), b + max_batch_);
      fetch(std::span<const std::string>(missing).subspan(b, e - b));
    }
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    std::lock_guard<std::mutex> lock(mu_);
    for (const auto& t : texts) out.push_back(cache_.at(t));
    return out;
  }

 private:
  void fetch(std::span<const std::string> batch) {
    nlohmann::json body;
    body["texts"] = std::vector<std::string>(batch.begin(), batch.end());
    in_flight_.acquire();
    nlohmann::json res;
    try {
      res = http::post_json(endpoint_, "/embed", body);
    } catch (...) {
      in_flight_.release();
      throw;
    }
    in_flight_.release();
    if (!res.contains("vectors") || !res["vectors"].is_array()) {
      fail(ErrorCode::kProtocolError, "/embed response lacks \"vectors\"");
    }
    if (res["vectors"].size() != batch.size()) {
      fail(ErrorCode::kProtocolError, "/embed returned " + std::to_string(res["vectors"].size()) +
                                          " vectors for " + std::to_string(batch.size()) + " texts");
    }
    if (res.contains("dim") && (!res["dim"].is_number_integer() || res["dim"].get<std::size_t>() != dim_)) {
      fail(ErrorCode::kProtocolError, "/embed advertised a dim different from " + std::to_string(dim_));
    }
    std::vector<EmbeddingVector> vecs;
    vecs.reserve(batch.size());
    for (const auto& v : res["vectors"]) {
      vecs.push_back(detail::checked_vector(v, dim_, ErrorCode::kProtocolError, "/embed"));
    }
    std::lock_guard<std::mutex> lock(mu_);
    ++requests_;
    for (std::size_t i = 0; i < batch.size(); ++i) cache_.try_emplace(batch[i], std::move(vecs[i]));
  }

  http::Endpoint endpoint_;
  std::size_t dim_;
  std::size_t max_batch_;
  std::counting_semaphore<> in_flight_;
  mutable std::mutex mu_;
  std::unordered_map<std::string, EmbeddingVector> cache_;
  std::size_t requests_ = 0;
};

}  // namespace dale
