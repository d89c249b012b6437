// Copyright (c) 2026, The CaseLink Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "test_util.hpp"

namespace caselink {
namespace {

using testing::doc;

std::vector<CaseDocument> toy_corpus() { return {doc("D1", "a b"), doc("D2", "b c"), doc("D3", "c d c")}; }

// Frozen from an independent hand evaluation of Okapi BM25 with
// idf = ln(1 + (N - df + 0.5) / (df + 0.5)), k1 = 1.5, b = 0.75.
TEST(Bm25, ToyCorpusScoresMatchOracle) {
  const auto index = Bm25Index::build(toy_corpus());
  EXPECT_NEAR(index.score("c", "D3"), 0.6149580195738596, 1e-12);
  EXPECT_NEAR(index.score("c", "D2"), 0.5022939549191067, 1e-12);
  EXPECT_DOUBLE_EQ(index.score("c", "D1"), 0.0);
  EXPECT_DOUBLE_EQ(index.avgdl(), 7.0 / 3.0);
  EXPECT_EQ(index.document_frequency("c"), 2u);
}

TEST(Bm25, UnknownTermsScoreZero) {
  const auto index = Bm25Index::build(toy_corpus());
  for (double s : index.score_all("zzz yyy")) EXPECT_EQ(s, 0.0);
}

TEST(Bm25, ScoreIsMonotoneInTermFrequencyAtFixedLength) {
  // Documents all have length 6; the count of "t" sweeps 0..6.
  std::vector<CaseDocument> docs;
  for (int tf = 0; tf <= 6; ++tf) {
    std::string text;
    for (int i = 0; i < 6; ++i) text += (i < tf ? "t " : "f" + std::to_string(i) + " ");
    docs.push_back(doc("d" + std::to_string(tf), text));
  }
  const auto index = Bm25Index::build(docs);
  double prev = -1.0;
  for (int tf = 0; tf <= 6; ++tf) {
    const double s = index.score("t", "d" + std::to_string(tf));
    EXPECT_GT(s, prev) << "tf=" << tf;
    prev = s;
  }
}

TEST(Bm25, DuplicateIdsAndBadParametersRejected) {
  EXPECT_THROW(Bm25Index::build({doc("a", "x"), doc("a", "y")}), ValidationError);
  EXPECT_THROW(Bm25Index::build(toy_corpus(), -1.0), ConfigError);
  EXPECT_THROW(Bm25Index::build(toy_corpus(), 1.5, 1.5), ConfigError);
  EXPECT_THROW(Bm25Index::build(toy_corpus()).position("nope"), LookupError);
}

TEST(TopKPairs, UndirectedSelfFreeAndBounded) {
  std::mt19937_64 rng(3);
  std::vector<CaseDocument> pool;
  std::uniform_int_distribution<int> w(0, 30);
  for (int i = 0; i < 40; ++i) {
    std::string text;
    for (int j = 0; j < 20; ++j) text += "w" + std::to_string(w(rng)) + " ";
    pool.push_back(doc("d" + std::to_string(i), text));
  }
  const auto index = Bm25Index::build(pool);
  for (int k : {1, 3, 5}) {
    const auto pairs = top_k_pairs(index, pool, k);
    EXPECT_LE(pairs.size(), static_cast<std::size_t>(k) * pool.size());
    for (const auto& [a, b] : pairs) {
      EXPECT_LT(a, b);
      EXPECT_NE(a, b);
    }
  }
  const auto p3 = top_k_pairs(index, pool, 3), p5 = top_k_pairs(index, pool, 5);
  EXPECT_TRUE(std::includes(p5.begin(), p5.end(), p3.begin(), p3.end()));
}

TEST(TopKPairs, PlantedClustersAreMostlyIntraCluster) {
  testing::TempDir dir;
  const auto manifest = generate_synthetic({}, 7, dir.path());
  const auto split = load_dataset(dir.path(), "train");
  const auto pool = split.pool();
  const auto pairs = top_k_pairs(Bm25Index::build(pool), pool, 5);
  std::size_t intra = 0;
  for (const auto& [a, b] : pairs) intra += manifest.cluster_of.at(a) == manifest.cluster_of.at(b);
  EXPECT_GE(static_cast<double>(intra), 0.9 * static_cast<double>(pairs.size()));
}

TEST(RankCandidates, ExcludesQueryAndOrdersByScoreThenId) {
  const auto index = Bm25Index::build({doc("q", "c"), doc("D1", "a b"), doc("D2", "b c"), doc("D3", "c d c")});
  const auto ranking = rank_candidates(index, doc("q", "c"), 10);
  ASSERT_EQ(ranking.size(), 3u);
  EXPECT_EQ(ranking[0].id, "D3");
  EXPECT_EQ(ranking[1].id, "D2");
  EXPECT_EQ(ranking[2].id, "D1");
}

TEST(HardNegatives, LexicallyClosestNonRelevantDoc) {
  const auto index = Bm25Index::build({doc("rel", "contract breach damages"), doc("close", "contract breach remedy"),
                                       doc("far", "zoning permit appeal")});
  const RelevanceLabels labels = {{"q", {"rel"}}};
  EXPECT_EQ(mine_hard_negatives(index, doc("q", "contract breach"), labels, 1), (std::vector<std::string>{"close"}));
}

TEST(HardNegatives, ShortPoolWarns) {
  const auto index = Bm25Index::build({doc("a", "x"), doc("b", "y")});
  ScopedWarningCapture capture;
  const auto out = mine_hard_negatives(index, doc("q", "x"), {{"q", {"a"}}}, 5);
  EXPECT_EQ(out, (std::vector<std::string>{"b"}));
  EXPECT_TRUE(capture.contains("hard negatives"));
}

TEST(Bm25Run, CoversEveryQueryWithValidRankings) {
  const auto index = Bm25Index::build(toy_corpus());
  const auto run = bm25_run(index, {doc("q1", "c"), doc("q2", "a")});
  EXPECT_EQ(run.query_ids(), (std::vector<std::string>{"q1", "q2"}));
  EXPECT_NO_THROW(run.validate());
  EXPECT_EQ(run.rankings.at("q2").front().id, "D1");
}

TEST(RetrievalRunJsonl, RoundTripsExactly) {
  RetrievalRun run;
  run.rankings["q"] = {{"a", 0.9}, {"b", 0.1 + 0.2}};
  run.rankings["r"] = {};
  const auto back = run_from_jsonl(to_jsonl(run));
  EXPECT_EQ(back, run);
}

}  // namespace
}  // namespace caselink
