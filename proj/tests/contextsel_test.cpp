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

#include <numeric>
#include <random>

#include "pagerank_oracle.hpp"
#include "support.hpp"

namespace {

using dale::ErrorCode;

// Sentence i has exactly lengths[i] tokens.
dale::Document sized_doc(const std::vector<std::size_t>& lengths) {
  std::string body;
  for (std::size_t len : lengths) {
    if (!body.empty()) body += ' ';
    body += "S";
    for (std::size_t k = 2; k < len; ++k) body += " w";
    body += " .";
  }
  return dale::make_document("sized", body);
}

dale::SimilarityGraph graph_of(std::size_t n, std::vector<double> w) { return {n, std::move(w)}; }

double sum(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0); }

TEST(SimilarityGraph, Singleton) {
  dale::HashedBowProvider p;
  const auto doc = dale::make_document("one", "The buyer pays.");
  const auto g = dale::build_similarity_graph(doc, p, 0.7);
  ASSERT_EQ(g.n, 1u);
  const auto pr = dale::pagerank(g);
  ASSERT_EQ(pr.scores.size(), 1u);
  EXPECT_NEAR(pr.scores[0], 1.0, 1e-12);
}

TEST(SimilarityGraph, IdenticalSentencesGiveUniformScores) {
  dale::HashedBowProvider p;
  const auto doc = dale::make_document("same", "Payment is due. Payment is due. Payment is due.");
  const auto g = dale::build_similarity_graph(doc, p, 0.7);
  ASSERT_EQ(g.n, 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 3; ++j) {
      if (i != j) {
        EXPECT_NEAR(g.weight(i, j), g.weight(0, 1), 1e-15);
      }
    }
  }
  for (double s : dale::pagerank(g).scores) EXPECT_NEAR(s, 1.0 / 3.0, 1e-12);
}

TEST(SimilarityGraph, SharedVocabularySentenceWins) {
  // Frozen from tests/oracles/hashed_bow_oracle.py (context_case).
  const std::vector<std::vector<double>> want_w = {
      {0.9945526316206743, 0.7935349531541896, 0.7689621441917507},
      {0.7477417123676471, 0.9859857801209567, 0.6636672359745222},
      {0.7071072818227906, 0.6475687523312516, 0.9828875061303776}};
  const std::vector<double> want_pr = {0.3434792281079435, 0.3306731742950636, 0.3258475975969927};
  dale::HashedBowProvider p;
  const auto doc = dale::make_document(
      "ctx", "The buyer shall pay the seller the price on delivery. The buyer shall pay promptly. The seller shall deliver.");
  ASSERT_EQ(doc.sentences.size(), 3u);
  const auto g = dale::build_similarity_graph(doc, p, 0.7);
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(g.weight(i, j), want_w[i][j], 1e-12);
  }
  const auto pr = dale::pagerank(g);
  EXPECT_TRUE(pr.converged);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(pr.scores[i], want_pr[i], 1e-6);
  EXPECT_GT(pr.scores[0], pr.scores[1]);
  EXPECT_GT(pr.scores[0], pr.scores[2]);
}

TEST(SimilarityGraph, NegativeCosinesClampToZero) {
  dale::testing::TableProvider p(2, {{"Up here.", {1, 0}}, {"Down there.", {-1, 0.1}}},
                                 [](std::string_view) { return dale::EmbeddingVector{{1, 1}}; });
  const auto doc = dale::make_document("neg", "Up here. Down there.");
  const auto g = dale::build_similarity_graph(doc, p, 1.0);
  EXPECT_EQ(g.weight(0, 1), 0.0);
  EXPECT_EQ(g.weight(1, 0), 0.0);
}

TEST(PageRank, UniformCompleteGraphIsExactlyUniform) {
  const auto pr = dale::pagerank(graph_of(4, std::vector<double>(16, 1.0)));
  for (double s : pr.scores) EXPECT_EQ(s, 0.25);
}

TEST(PageRank, AllZeroWeightsRedistributeUniformly) {
  const auto pr = dale::pagerank(graph_of(3, std::vector<double>(9, 0.0)));
  for (double s : pr.scores) EXPECT_NEAR(s, 1.0 / 3.0, 1e-15);
}

TEST(PageRank, SelfLoopsIgnored) {
  std::vector<double> w = {5, 1, 0, 1, 9, 2, 3, 1, 7};
  std::vector<double> no_diag = w;
  for (std::size_t i = 0; i < 3; ++i) no_diag[i * 3 + i] = 0.0;
  EXPECT_EQ(dale::pagerank(graph_of(3, w)).scores, dale::pagerank(graph_of(3, no_diag)).scores);
}

TEST(PageRank, MatchesDenseOracleOnRandomAsymmetricGraphs) {
  std::mt19937_64 gen(77);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::bernoulli_distribution sparse(0.3);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t n = 2 + static_cast<std::size_t>(trial % 11);
    std::vector<double> w(n * n);
    for (double& x : w) x = sparse(gen) ? 0.0 : u(gen);
    if (trial % 7 == 0) std::fill(w.begin(), w.begin() + static_cast<std::ptrdiff_t>(n), 0.0);
    const auto got = dale::pagerank(graph_of(n, w));
    const auto want = dale::oracle::dense_pagerank(w, n);
    EXPECT_TRUE(got.converged);
    EXPECT_NEAR(sum(got.scores), 1.0, 1e-9);
    for (std::size_t i = 0; i < n; ++i) {
      EXPECT_NEAR(got.scores[i], want[i], 1e-6);
      EXPECT_GE(got.scores[i], 0.0);
    }
  }
}

TEST(PageRank, NonConvergenceIsFlaggedNotThrown) {
  std::vector<double> w = {0, 1, 1, 0, 0, 1, 1, 0, 0};
  const auto pr = dale::pagerank(graph_of(3, w), 0.85, 1e-300, 2);
  EXPECT_FALSE(pr.converged);
  EXPECT_EQ(pr.iterations, 2);
  EXPECT_NEAR(sum(pr.scores), 1.0, 1e-9);
}

TEST(SelectContext, SlackBudgetKeepsEverything) {
  const auto doc = sized_doc({10, 20, 30});
  dale::testing::AlwaysRng rng;
  const auto sel = dale::select_context(doc, {0.1, 0.5, 0.4}, 1024, rng);
  EXPECT_TRUE(sel.applied);
  EXPECT_EQ(sel.kept_sentence_indices, (std::vector<std::size_t>{0, 1, 2}));
  EXPECT_EQ(sel.token_count, 60u);
}

TEST(SelectContext, GreedySkipsOverflowingSentence) {
  const auto doc = sized_doc({600, 600, 300});
  dale::testing::ScriptedRng rng({0.9});
  const auto sel = dale::select_context(doc, {0.5, 0.3, 0.2}, 1024, rng);
  EXPECT_TRUE(sel.applied);
  EXPECT_EQ(sel.kept_sentence_indices, (std::vector<std::size_t>{0, 2}));
  EXPECT_EQ(sel.token_count, 900u);
}

TEST(SelectContext, FailedGateKeepsLeadingPrefix) {
  const auto doc = sized_doc({400, 500, 200, 10});
  dale::testing::ScriptedRng rng({0.3});  // equal to beta: does not cross
  const auto sel = dale::select_context(doc, {0.1, 0.2, 0.9, 0.8}, 1024, rng);
  EXPECT_FALSE(sel.applied);
  EXPECT_EQ(sel.epsilon, 0.3);
  EXPECT_EQ(sel.kept_sentence_indices, (std::vector<std::size_t>{0, 1}));
  EXPECT_EQ(sel.token_count, 900u);
}

TEST(SelectContext, InvalidInputs) {
  const auto doc = sized_doc({5, 5});
  dale::testing::AlwaysRng rng;
  try {
    dale::select_context(doc, {0.5, 0.5}, 0, rng);
    FAIL();
  } catch (const dale::Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInvalidConfig);
  }
  EXPECT_THROW(dale::select_context(doc, {1.0}, 10, rng), dale::Error);
}

TEST(SelectContext, TruncationFallbackWhenNothingFits) {
  const auto doc = sized_doc({50, 50});
  dale::testing::AlwaysRng rng;
  const auto sel = dale::select_context(doc, {0.5, 0.5}, 20, rng);
  EXPECT_TRUE(sel.kept_sentence_indices.empty());
  EXPECT_EQ(dale::selected_tokens(doc, sel, 20).size(), 20u);
}

TEST(SelectContext, BudgetOrderDominanceAndDeterminism) {
  std::mt19937_64 gen(31);
  std::uniform_int_distribution<std::size_t> nsent(1, 25), len(1, 300);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<std::size_t> lengths(nsent(gen));
    for (auto& l : lengths) l = std::max<std::size_t>(2, len(gen));
    const auto doc = sized_doc(lengths);
    std::vector<double> scores(lengths.size());
    for (double& s : scores) s = u(gen);
    const std::uint64_t seed = gen();
    dale::Rng r1(seed), r2(seed);
    const auto a = dale::select_context(doc, scores, 1024, r1);
    const auto b = dale::select_context(doc, scores, 1024, r2);
    EXPECT_EQ(a.kept_sentence_indices, b.kept_sentence_indices);
    EXPECT_EQ(a.applied, b.applied);
    EXPECT_LE(a.token_count, 1024u);
    std::size_t total = 0;
    for (std::size_t k = 0; k < a.kept_sentence_indices.size(); ++k) {
      total += lengths[a.kept_sentence_indices[k]];
      if (k) {
        EXPECT_LT(a.kept_sentence_indices[k - 1], a.kept_sentence_indices[k]);
      }
    }
    EXPECT_EQ(total, a.token_count);
    if (a.applied) {
      std::size_t best = lengths.size();
      for (std::size_t i = 0; i < lengths.size(); ++i) {
        if (lengths[i] <= 1024 && (best == lengths.size() || scores[i] > scores[best])) best = i;
      }
      if (best < lengths.size()) {
        EXPECT_TRUE(std::count(a.kept_sentence_indices.begin(), a.kept_sentence_indices.end(), best));
      }
    }
  }
}

}  // namespace
