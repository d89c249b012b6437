// Copyright (c) 2026, The CaseLink Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "test_util.hpp"

namespace caselink {
namespace {

TEST(Triplets, SubjectVerbObject) {
  EXPECT_EQ(extract_triplets("court dismissed appeal"), (std::vector<Triplet>{{"court", "dismissed", "appeal"}}));
}

TEST(Triplets, StopwordsSplitSpansAndChainsContinue) {
  const auto t = extract_triplets("The trial judge found the contract void. Tenant appealed decision.");
  EXPECT_EQ(t, (std::vector<Triplet>{{"trial judge", "found", "contract void"}, {"tenant", "appealed", "decision"}}));
}

TEST(Triplets, SuffixRuleAndNoCrossSentenceLinks) {
  EXPECT_EQ(extract_triplets("owner transferred land"), (std::vector<Triplet>{{"owner", "transferred", "land"}}));
  EXPECT_TRUE(extract_triplets("court held. appeal").empty());
  EXPECT_TRUE(extract_triplets("dismissed appeal").empty());
}

TEST(TextGraph, EntitiesEdgesAndVirtualNode) {
  const ToyHashEncoder enc(16);
  const std::vector<double> view = enc.encode("", "view text");
  const auto g = build_text_graph(view, {{"a", "r", "b"}, {"b", "r", "c"}, {"a", "s", "a"}}, enc, ViewTag::fact);
  ASSERT_EQ(g.nodes.size(), 4u);
  EXPECT_EQ(g.virtual_node, 3u);
  EXPECT_EQ(g.nodes[3].feature, view);
  EXPECT_EQ(g.edges.size(), 2u);
  EXPECT_EQ(g.virtual_degree(), 3u);
  const auto topo = g.topology();
  EXPECT_EQ(topo.offsets[4] - topo.offsets[3], 4u);  // self + 3 entities
  const auto back = TextGraph::from_json(g.to_json());
  EXPECT_EQ(back.edges, g.edges);
  EXPECT_EQ(back.nodes[1].text, "b");
  EXPECT_THROW(build_text_graph({1.0}, {}, enc, ViewTag::fact), ShapeError);
}

TEST(TextGraph, EmptyTripletsLeaveOnlyVirtualNode) {
  const ToyHashEncoder enc(8);
  const auto g = build_text_graph(enc.encode("", "x"), {}, enc, ViewTag::issue);
  EXPECT_EQ(g.nodes.size(), 1u);
  EXPECT_EQ(g.virtual_degree(), 0u);
}

TEST(CaseGnnForward, ReadoutConcatenatesBothViews) {
  const ToyHashEncoder enc(12);
  const CaseViews views{"c", "court dismissed appeal", "tenant breached lease", "court dismissed appeal"};
  const auto graphs = build_case_graphs(views, encode_views(views, enc), enc);
  const auto model = CaseGnnModel<double>::init(12, 6, 5, 2, 3);
  const auto emb = casegnn_forward(graphs.fact, graphs.issue, model);
  EXPECT_EQ(emb.size(), 10);
  EXPECT_EQ(model.output_dim(), 10);
  const auto back = CaseGnnModel<double>::from_json(nlohmann::json::parse(model.to_json().dump()));
  EXPECT_EQ(casegnn_forward(graphs.fact, graphs.issue, back), emb);
}

TEST(CaseGnnGraphs, ParallelBuildKeepsOrderAndMatchesSerial) {
  const ToyHashEncoder enc(8);
  std::vector<CaseViews> views;
  EmbeddingStore store(24);
  for (int i = 0; i < 17; ++i) {
    CaseViews v{"c" + std::to_string(i), "judge " + std::to_string(i) + " found fault", "", "x"};
    store.insert(v.case_id, encode_views(v, enc));
    views.push_back(v);
  }
  const auto parallel = build_all_case_graphs(views, store, enc, 4);
  const auto serial = build_all_case_graphs(views, store, enc, 1);
  ASSERT_EQ(parallel.size(), 17u);
  for (std::size_t i = 0; i < parallel.size(); ++i) {
    EXPECT_EQ(parallel[i].case_id, views[i].case_id);
    EXPECT_EQ(parallel[i].fact.to_json(), serial[i].fact.to_json());
  }
  EmbeddingStore partial(24);
  EXPECT_THROW(build_all_case_graphs(views, partial, enc, 3), LookupError);
}

struct CaseGnnWorld {
  testing::TempDir dir;
  DatasetSplit split;
  std::vector<CaseTextGraphs> graphs;

  CaseGnnWorld() {
    SynthConfig sc;
    sc.clusters = 3;
    sc.candidates_per_cluster = 8;
    sc.queries_per_cluster = 3;
    sc.relevant_per_query = 3;
    sc.words_per_case = 50;
    sc.splits = {"train"};
    generate_synthetic(sc, 5, dir.path());
    split = load_dataset(dir.path(), "train");
    const ToyHashEncoder enc(24);
    LlmClient llm({});
    std::vector<CaseViews> views;
    EmbeddingStore store(72);
    for (const auto& d : split.pool()) {
      views.push_back(build_views(d, llm));
      store.insert(d.id, encode_views(views.back(), enc));
    }
    graphs = build_all_case_graphs(views, store, enc);
  }
};

TEST(TrainCaseGnn, ProbeLossAfterOneEpochNotAboveInit) {
  CaseGnnWorld w;
  auto c = TrainConfig::casegnn_defaults();
  c.epochs = 1;
  c.hidden_dim = 8;
  c.seed = 2;
  const auto r = train_casegnn(w.split, w.graphs, c);
  ASSERT_EQ(r.probe_loss.size(), 2u);
  EXPECT_LE(r.probe_loss[1], r.probe_loss[0]);
  EXPECT_EQ(r.embeddings.size(), w.split.pool().size());
  EXPECT_EQ(r.embeddings.dim(), 16u);
}

TEST(TrainCaseGnn, DeterministicForFixedSeed) {
  CaseGnnWorld w;
  auto c = TrainConfig::casegnn_defaults();
  c.epochs = 2;
  c.hidden_dim = 6;
  c.lr = 1e-3;
  c.seed = 9;
  const auto a = train_casegnn(w.split, w.graphs, c);
  const auto b = train_casegnn(w.split, w.graphs, c);
  EXPECT_EQ(a.embeddings, b.embeddings);
  EXPECT_EQ(a.probe_loss, b.probe_loss);
}

TEST(TrainCaseGnn, MissingGraphIsLookupError) {
  CaseGnnWorld w;
  w.graphs.pop_back();
  EXPECT_THROW(train_casegnn(w.split, w.graphs, TrainConfig::casegnn_defaults()), LookupError);
}

}  // namespace
}  // namespace caselink
