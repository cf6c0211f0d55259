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

// Context selection: a sentence similarity graph scored with PageRank, then
// a greedy pick of the best sentences that fit the output token budget.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

#include "dale/corpus.hpp"
#include "dale/embed.hpp"
#include "dale/error.hpp"
#include "dale/random.hpp"

namespace dale {

// Row-major n x n weights; weight(i, j) is the edge i -> j.
struct SimilarityGraph {
  std::size_t n = 0;
  std::vector<double> weights;

  double weight(std::size_t i, std::size_t j) const { return weights[i * n + j]; }
  double& weight(std::size_t i, std::size_t j) { return weights[i * n + j]; }
};

// Surface text of a sentence: the exact source bytes from its first token to
// the end of its last token.
inline std::string sentence_text(const Document& doc, const Sentence& s) {
  if (s.tokens.empty()) return {};
  const auto& last = s.tokens.back();
  const std::size_t begin = s.tokens.front().byte_offset;
  const std::size_t end = last.byte_offset + last.text.size();
  if (end <= doc.text.size() && begin < end) return doc.text.substr(begin, end - begin);
  std::vector<std::string> parts;
  for (const auto& t : s.tokens) parts.push_back(t.text);
  return text::join(parts);
}

// weight(i, j) = max(0, cosine(e_i, lambda * e_j + (1 - lambda) * e_doc)).
// The graph is asymmetric; the diagonal is kept but ignored by pagerank().
inline SimilarityGraph build_similarity_graph(const Document& doc, EmbeddingProvider& provider,
                                              double lambda) {
  if (doc.sentences.empty()) fail(ErrorCode::kEmptyText, "document '" + doc.id + "' has no sentences");
  std::vector<std::string> texts;
  texts.reserve(doc.sentences.size() + 1);
  for (const auto& s : doc.sentences) texts.push_back(sentence_text(doc, s));
  texts.push_back(doc.text);
  const auto vecs = embed_texts(provider, texts);
  const std::size_t n = doc.sentences.size();
  const EmbeddingVector& doc_vec = vecs[n];

  std::vector<EmbeddingVector> targets;
  targets.reserve(n);
  for (std::size_t j = 0; j < n; ++j) targets.push_back(blend(vecs[j], doc_vec, lambda));

  SimilarityGraph g;
  g.n = n;
  g.weights.assign(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      // A blend can cancel to zero when lambda mixes opposite vectors.
      const double norm_t = l2_norm(targets[j]);
      g.weight(i, j) = norm_t == 0.0 ? 0.0 : std::max(0.0, cosine(vecs[i], targets[j]));
    }
  }
  return g;
}

struct PageRankResult {
  std::vector<double> scores;
  int iterations = 0;
  bool converged = false;
};

// Weighted PageRank by power iteration. Rows are normalized into transition
// probabilities (self-loops dropped); rows with no outgoing weight spread
// their mass uniformly. Stops when the L1 change drops below `tol`; when
// max_iter is hit first, the last iterate is returned with converged=false.
inline PageRankResult pagerank(const SimilarityGraph& g, double damping = 0.85,
                               double tol = 1e-8, int max_iter = 200) {
  const std::size_t n = g.n;
  if (n == 0) fail(ErrorCode::kInvalidConfig, "pagerank needs at least one node");
  if (!(damping > 0.0 && damping < 1.0)) fail(ErrorCode::kInvalidConfig, "damping must be in (0, 1)");
  std::vector<double> out_weight(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const double w = g.weight(i, j);
      if (!std::isfinite(w) || w < 0.0) fail(ErrorCode::kInvalidConfig, "graph weights must be finite and >= 0");
      out_weight[i] += w;
    }
  }
  const double nd = static_cast<double>(n);
  PageRankResult res;
  res.scores.assign(n, 1.0 / nd);
  // Doubly stochastic transitions keep the uniform start fixed; return it
  // as is rather than letting rounding drift accumulate.
  std::vector<double> in_share(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (out_weight[i] == 0.0) {
        in_share[j] += 1.0 / nd;
      } else if (i != j) {
        in_share[j] += g.weight(i, j) / out_weight[i];
      }
    }
  }
  if (std::all_of(in_share.begin(), in_share.end(), [](double s) { return std::abs(s - 1.0) <= 1e-12; })) {
    res.iterations = 1;
    res.converged = true;
    return res;
  }
  std::vector<double> next(n);
  for (int it = 1; it <= max_iter; ++it) {
    double dangling = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (out_weight[i] == 0.0) dangling += res.scores[i];
    }
    std::fill(next.begin(), next.end(), (1.0 - damping) / nd + damping * dangling / nd);
    for (std::size_t i = 0; i < n; ++i) {
      if (out_weight[i] == 0.0) continue;
      const double share = damping * res.scores[i] / out_weight[i];
      for (std::size_t j = 0; j < n; ++j) {
        if (i != j) next[j] += share * g.weight(i, j);
      }
    }
    // Renormalize away floating drift so the scores sum to one.
    const double total = std::accumulate(next.begin(), next.end(), 0.0);
    double delta = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      next[j] /= total;
      delta += std::abs(next[j] - res.scores[j]);
    }
    res.scores.swap(next);
    res.iterations = it;
    if (delta < tol) {
      res.converged = true;
      break;
    }
  }
  return res;
}

struct SelectionResult {
  std::vector<std::size_t> kept_sentence_indices;  // ascending
  std::size_t token_count = 0;
  bool applied = false;
  double epsilon = 0.0;  // the gate draw
};

struct GateParams {
  double mu = 0.5;
  double sigma2 = 0.7;
  double beta = 0.3;
};

// Draws eps ~ N(mu, sigma2). When eps > beta, sentences are taken in
// descending score order, skipping any that would overflow the budget, and
// returned in document order. Otherwise the longest leading run of whole
// sentences that fits is kept.
template <RandomSource Rand>
SelectionResult select_context(const Document& doc, const std::vector<double>& scores,
                               std::size_t budget_tokens, Rand& rng, GateParams gate = {}) {
  if (budget_tokens < 1) fail(ErrorCode::kInvalidConfig, "token budget must be positive");
  if (scores.size() != doc.sentences.size()) {
    fail(ErrorCode::kInvalidConfig, "score count does not match sentence count");
  }
  SelectionResult res;
  res.epsilon = rng.gaussian(gate.mu, gate.sigma2);
  res.applied = res.epsilon > gate.beta;
  const std::size_t n = scores.size();
  if (!res.applied) {
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t len = doc.sentences[i].tokens.size();
      if (res.token_count + len > budget_tokens) break;
      res.token_count += len;
      res.kept_sentence_indices.push_back(i);
    }
    return res;
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  for (std::size_t i : order) {
    const std::size_t len = doc.sentences[i].tokens.size();
    if (res.token_count + len > budget_tokens) continue;
    res.token_count += len;
    res.kept_sentence_indices.push_back(i);
  }
  std::sort(res.kept_sentence_indices.begin(), res.kept_sentence_indices.end());
  return res;
}

// Token texts of the selected context. When no whole sentence fits, the
// document's first `budget_tokens` tokens are used instead.
inline std::vector<std::string> selected_tokens(const Document& doc, const SelectionResult& sel,
                                                std::size_t budget_tokens) {
  std::vector<std::string> out;
  if (sel.kept_sentence_indices.empty()) {
    for (const auto& s : doc.sentences) {
      for (const auto& t : s.tokens) {
        if (out.size() >= budget_tokens) return out;
        out.push_back(t.text);
      }
    }
    return out;
  }
  for (std::size_t i : sel.kept_sentence_indices) {
    for (const auto& t : doc.sentences[i].tokens) out.push_back(t.text);
  }
  return out;
}

}  // namespace dale
