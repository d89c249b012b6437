// Copyright (c) 2026, The CaseLink Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "test_util.hpp"

namespace caselink {
namespace {

TEST(ToyHash, DeterministicUnitNorm) {
  const ToyHashEncoder enc(64);
  const auto a = enc.encode("x", "the court dismissed the appeal");
  EXPECT_EQ(a, enc.encode("other-id", "the court dismissed the appeal"));
  EXPECT_NEAR(l2_norm(a), 1.0, 1e-12);
}

TEST(ToyHash, EmptyTextUsesBiasBucket) {
  const ToyHashEncoder enc(32);
  const auto v = enc.encode("e", " ,,; ");
  EXPECT_NEAR(l2_norm(v), 1.0, 1e-12);
  EXPECT_EQ(v[enc.bucket(ToyHashEncoder::kBiasToken)], 1.0);
}

TEST(ToyHash, DisjointVocabulariesAreOrthogonalWhenBucketsDoNotCollide) {
  const ToyHashEncoder enc(4096);
  const std::vector<std::string> left = {"alpha", "beta", "gamma"}, right = {"delta", "epsilon", "zeta"};
  std::set<std::size_t> lb, rb;
  for (const auto& w : left) lb.insert(enc.bucket(w));
  for (const auto& w : right) rb.insert(enc.bucket(w));
  std::vector<std::size_t> shared;
  std::set_intersection(lb.begin(), lb.end(), rb.begin(), rb.end(), std::back_inserter(shared));
  ASSERT_TRUE(shared.empty()) << "fixture words collide at this dim";
  EXPECT_EQ(cosine(enc.encode("l", join(left, " ")), enc.encode("r", join(right, " "))), 0.0);
}

TEST(ToyHash, ZeroDimRejected) { EXPECT_THROW(ToyHashEncoder(0), ShapeError); }

TEST(EmbeddingStore, JsonlRoundTripIsExact) {
  EmbeddingStore store(3);
  store.insert("b", {0.1, 1.0 / 3.0, -2.5e-17});
  store.insert("a", {1, 2, 3});
  const auto back = EmbeddingStore::from_jsonl(store.to_jsonl());
  EXPECT_EQ(back, store);
  EXPECT_EQ(back.ids(), (std::vector<std::string>{"b", "a"}));
}

TEST(EmbeddingStore, RejectsBadVectors) {
  EmbeddingStore store(2);
  EXPECT_THROW(store.insert("x", {1.0}), ShapeError);
  EXPECT_THROW(store.insert("x", {1.0, std::nan("")}), ValidationError);
  store.insert("x", {1.0, 0.0});
  EXPECT_THROW(store.insert("x", {0.0, 1.0}), ValidationError);
  EXPECT_THROW(store.at("y"), LookupError);
  EXPECT_THROW(EmbeddingStore::from_jsonl("{\"id\":\"x\",\"vector\":[1]}\n"), ValidationError);
}

TEST(ExternalFileEncoder, ServesVectorsByIdAndChecksDim) {
  testing::TempDir dir;
  EmbeddingStore store(2);
  store.insert("case#fact", {0.6, 0.8});
  store.save(dir / "emb.jsonl");
  const auto enc = make_encoder({"external-file", 2, dir / "emb.jsonl"});
  EXPECT_EQ(enc->encode("case#fact", "ignored"), (std::vector<double>{0.6, 0.8}));
  EXPECT_THROW(enc->encode("missing", ""), LookupError);
  EXPECT_THROW(make_encoder({"external-file", 3, dir / "emb.jsonl"}), ShapeError);
  EXPECT_THROW(make_encoder({"external-file", 2, dir / "absent.jsonl"}), LoadError);
  EXPECT_THROW(make_encoder({"sailer", 2, {}}), ConfigError);
}

TEST(EncodeTexts, KeysByIdInInputOrder) {
  const ToyHashEncoder enc(16);
  const auto store = encode_texts(enc, {{"b", "x y"}, {"a", "z"}});
  EXPECT_EQ(store.ids(), (std::vector<std::string>{"b", "a"}));
  EXPECT_EQ(store.dim(), 16u);
  EXPECT_THROW(encode_texts(enc, {}), ValidationError);
}

TEST(Cosine, ZeroVectorRaisesAndScaleInvariance) {
  EXPECT_THROW(cosine({0, 0}, {1, 2}), NumericError);
  EXPECT_NEAR(cosine({1, 2, 3}, {2, 4, 6}), 1.0, 1e-15);
}

}  // namespace
}  // namespace caselink
