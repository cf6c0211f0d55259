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

#include <cmath>
#include <random>
#include <set>

#include "support.hpp"

namespace {

using dale::EmbeddingVector;
using dale::ErrorCode;

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const dale::Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no dale::Error thrown";
  return ErrorCode::kIoError;
}

TEST(HashedBow, ScalarMultiplesCollapse) {
  dale::HashedBowProvider p;
  EXPECT_EQ(dale::embed_text(p, "a a").values, dale::embed_text(p, "a").values);
  EXPECT_EQ(p.dim(), 512u);
}

TEST(HashedBow, DisjointVocabularyIsOrthogonal) {
  // Frozen from tests/oracles/hashed_bow_oracle.py.
  dale::HashedBowProvider p;
  EXPECT_EQ(dale::cosine(dale::embed_text(p, "alpha beta gamma"), dale::embed_text(p, "delta epsilon zeta")), 0.0);
}

TEST(HashedBow, BucketIsFnv1aOfLowercasedToken) {
  EXPECT_EQ(dale::text::fnv1a64(""), 14695981039346656037ULL);
  EXPECT_EQ(dale::text::fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(dale::HashedBowProvider::bucket("Buyer", 512), dale::text::fnv1a64("buyer") % 512);
  dale::HashedBowProvider p(64);
  const auto v = dale::embed_text(p, "Buyer");
  EXPECT_EQ(v.values[dale::text::fnv1a64("buyer") % 64], 1.0);
}

TEST(HashedBow, PermutationInvariantAndUnitNorm) {
  dale::HashedBowProvider p;
  const auto a = dale::embed_text(p, "the seller shall deliver the goods");
  const auto b = dale::embed_text(p, "goods the deliver shall seller the");
  EXPECT_EQ(a.values, b.values);
  EXPECT_NEAR(dale::l2_norm(a), 1.0, 1e-12);
}

TEST(HashedBow, EmptyTextRejected) {
  dale::HashedBowProvider p;
  EXPECT_EQ(code_of([&] { dale::embed_text(p, ""); }), ErrorCode::kEmptyText);
  EXPECT_EQ(code_of([&] { dale::embed_text(p, "  \t "); }), ErrorCode::kEmptyText);
}

TEST(HashedBow, ThousandCallsGiveOneVector) {
  dale::HashedBowProvider p;
  std::set<std::vector<double>> seen;
  for (int i = 0; i < 1000; ++i) seen.insert(dale::embed_text(p, "Governing law: Delaware.").values);
  EXPECT_EQ(seen.size(), 1u);
}

TEST(Cosine, Examples) {
  const EmbeddingVector v{{0.3, -1.2, 4.0}};
  EXPECT_NEAR(dale::cosine(v, v), 1.0, 1e-15);
  EXPECT_EQ(dale::cosine(EmbeddingVector{{1, 0}}, EmbeddingVector{{0, 1}}), 0.0);
  EXPECT_NEAR(dale::cosine(EmbeddingVector{{1, 2, 3}}, EmbeddingVector{{4, 5, 6}}),
              32.0 / (std::sqrt(14.0) * std::sqrt(77.0)), 1e-15);
  EXPECT_EQ(code_of([] { dale::cosine(EmbeddingVector{{1, 2}}, EmbeddingVector{{1, 2, 3}}); }), ErrorCode::kDimMismatch);
  EXPECT_EQ(code_of([] { dale::cosine(EmbeddingVector{{0, 0}}, EmbeddingVector{{1, 2}}); }), ErrorCode::kZeroVector);
}

TEST(Cosine, SymmetricScaleInvariantAndBounded) {
  std::mt19937_64 gen(4);
  std::normal_distribution<double> nd(0.0, 1.0);
  std::uniform_real_distribution<double> scale(1e-3, 1e3);
  for (int trial = 0; trial < 500; ++trial) {
    EmbeddingVector a, b;
    for (int i = 0; i < 16; ++i) {
      a.values.push_back(nd(gen));
      b.values.push_back(nd(gen));
    }
    const double ab = dale::cosine(a, b);
    EXPECT_NEAR(ab, dale::cosine(b, a), 1e-12);
    EmbeddingVector ka = a;
    const double k = scale(gen);
    for (double& x : ka.values) x *= k;
    EXPECT_NEAR(dale::cosine(ka, b), ab, 1e-9);
    EXPECT_GE(ab, -1.0);
    EXPECT_LE(ab, 1.0);
  }
}

TEST(Blend, Examples) {
  const EmbeddingVector x{{2, 0}}, y{{0, 2}};
  EXPECT_EQ(dale::blend(x, y, 1.0).values, x.values);
  EXPECT_EQ(dale::blend(x, y, 0.0).values, y.values);
  EXPECT_EQ(dale::blend(x, y, 0.5).values, (std::vector<double>{1, 1}));
  EXPECT_EQ(code_of([] { dale::blend(EmbeddingVector{{1}}, EmbeddingVector{{1, 2}}, 0.5); }), ErrorCode::kDimMismatch);
}

TEST(FileBacked, LookupIsBitExact) {
  dale::testing::TempDir dir;
  const double tricky = 0.1 + 0.2;
  dale::testing::write_file(dir.file("v.jsonl"),
                            "{\"key\":\"a\",\"vector\":[0.30000000000000004,-1e-300,2]}\n"
                            "\n{\"key\":\"b c\",\"vector\":[1,0,0]}\n");
  dale::FileBackedProvider p(dir.file("v.jsonl"));
  EXPECT_EQ(p.dim(), 3u);
  EXPECT_EQ(p.kind(), dale::ProviderKind::kFileBacked);
  const auto v = dale::embed_text(p, "a");
  EXPECT_EQ(v.values[0], tricky);
  EXPECT_EQ(v.values[1], -1e-300);
  EXPECT_EQ(dale::embed_text(p, "b c").values, (std::vector<double>{1, 0, 0}));
  EXPECT_EQ(code_of([&] { dale::embed_text(p, "zzz"); }), ErrorCode::kKeyNotFound);
}

TEST(FileBacked, MalformedFiles) {
  dale::testing::TempDir dir;
  dale::testing::write_file(dir.file("dims.jsonl"), "{\"key\":\"a\",\"vector\":[1,2]}\n{\"key\":\"b\",\"vector\":[1]}\n");
  EXPECT_EQ(code_of([&] { dale::FileBackedProvider p(dir.file("dims.jsonl")); }), ErrorCode::kParseError);
  dale::testing::write_file(dir.file("junk.jsonl"), "nope\n");
  EXPECT_EQ(code_of([&] { dale::FileBackedProvider p(dir.file("junk.jsonl")); }), ErrorCode::kParseError);
  EXPECT_EQ(code_of([&] { dale::FileBackedProvider p(dir.file("missing.jsonl")); }), ErrorCode::kIoError);
}

}  // namespace
