// Copyright (c) 2026, The CaseLink Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "test_util.hpp"

namespace caselink {
namespace {

using testing::random_matrix;
using testing::random_topology;

TEST(Topology, SelfLoopFirstAndSymmetricNeighborhoods) {
  const auto g = Topology::build(3, {0, 0, 1}, 2, 2, {{0, 1, 0}, {1, 2, 1}, {1, 2, 1}, {2, 2, 0}});
  ASSERT_EQ(g.offsets, (std::vector<std::size_t>{0, 2, 5, 7}));
  for (std::size_t v = 0; v < 3; ++v) {
    EXPECT_EQ(g.sources[g.offsets[v]], v);
    EXPECT_EQ(g.relations[g.offsets[v]], g.self_relation());
  }
  EXPECT_THROW(Topology::build(2, {0, 3}, 2, 1, {}), LookupError);
  EXPECT_THROW(Topology::build(2, {0, 0}, 1, 1, {{0, 1, 4}}), LookupError);
  EXPECT_THROW(Topology::build(2, {0}, 1, 1, {}), ShapeError);
}

TEST(Gat, AttentionIsANeighborhoodDistribution) {
  std::mt19937_64 rng(1);
  const auto g = random_topology(12, 1, 1, 0.3, rng);
  ParamStore<double> p;
  const auto L = add_gat_layer(p, "l", 5, 4, rng);
  GatCache<double> cache;
  gat_forward(random_matrix(12, 5, rng), g, p, L, &cache);
  const auto by_node = attention_by_node(cache.alpha, g);
  for (std::size_t v = 0; v < g.num_nodes; ++v) {
    double sum = 0.0;
    for (double a : by_node[v]) {
      EXPECT_GT(a, 0.0);
      sum += a;
    }
    EXPECT_NEAR(sum, 1.0, 1e-12);
  }
}

TEST(Gat, IsolatedNodeAttendsOnlyToItself) {
  std::mt19937_64 rng(2);
  const auto g = Topology::build(3, {0, 0, 0}, 1, 1, {{0, 1, 0}});
  ParamStore<double> p;
  const auto L = add_gat_layer(p, "l", 3, 2, rng);
  const Matrix<double> x = random_matrix(3, 3, rng);
  const Matrix<double> out = gat_forward(x, g, p, L);
  const Matrix<double> expected = x.row(2) * p[L.weight].transpose();
  EXPECT_LT((out.row(2) - expected).norm(), 1e-12);
}

TEST(Gat, ShapeMismatchIsReported) {
  std::mt19937_64 rng(3);
  const auto g = random_topology(4, 1, 1, 0.5, rng);
  ParamStore<double> p;
  const auto L = add_gat_layer(p, "l", 3, 2, rng);
  EXPECT_THROW(gat_forward(random_matrix(4, 5, rng), g, p, L), ShapeError);
  EXPECT_THROW(gat_forward(random_matrix(5, 3, rng), g, p, L), ShapeError);
}

/// Relabels nodes by `perm` (new index = perm[old]).
Topology permute(const Topology& g, const std::vector<std::size_t>& perm) {
  std::vector<int> types(g.num_nodes);
  std::vector<Topology::Edge> edges;
  for (std::size_t v = 0; v < g.num_nodes; ++v) {
    types[perm[v]] = g.node_type[v];
    for (std::size_t k = g.offsets[v]; k < g.offsets[v + 1]; ++k)
      if (g.relations[k] != g.self_relation()) edges.push_back({perm[g.sources[k]], perm[v], g.relations[k]});
  }
  return Topology::build(g.num_nodes, types, g.num_node_types, g.num_edge_types, edges);
}

class Equivariance : public ::testing::TestWithParam<GraphMode> {};

TEST_P(Equivariance, PermutingNodesPermutesRows) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 5; ++trial) {
    const std::size_t n = 9;
    const auto g = random_topology(n, 2, 3, 0.35, rng);
    StackSpec spec;
    spec.mode = GetParam();
    spec.input_dim = 6;
    spec.hidden_dim = spec.output_dim = 4;
    const auto model = GnnModel<double>::init(spec, 100 + trial);
    const Matrix<double> x = random_matrix(static_cast<Eigen::Index>(n), 6, rng);
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    Matrix<double> px(x.rows(), x.cols());
    for (std::size_t v = 0; v < n; ++v) px.row(static_cast<Eigen::Index>(perm[v])) = x.row(static_cast<Eigen::Index>(v));
    const Matrix<double> out = caselink_forward(model, g, x);
    const Matrix<double> pout = caselink_forward(model, permute(g, perm), px);
    for (std::size_t v = 0; v < n; ++v)
      EXPECT_LT((out.row(static_cast<Eigen::Index>(v)) - pout.row(static_cast<Eigen::Index>(perm[v]))).norm(), 1e-10);
  }
}

INSTANTIATE_TEST_SUITE_P(Modes, Equivariance, ::testing::Values(GraphMode::homogeneous, GraphMode::heterogeneous),
                         [](const auto& info) { return to_string(info.param); });

TEST(Hgt, TiedBanksOnSingleTypedGraphReproduceGat) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 4 + trial % 7;
    const auto g = random_topology(n, 1, 1, 0.4, rng);
    ParamStore<double> gp, hp;
    const auto gat = add_gat_layer(gp, "g", 5, 3, rng);
    const auto hgt = add_hgt_layer(hp, "h", 5, 3, 1, 1, rng);
    tie_hgt_to_gat(hp, hgt, gp, gat);
    const Matrix<double> x = random_matrix(static_cast<Eigen::Index>(n), 5, rng);
    EXPECT_LT((gat_forward(x, g, gp, gat) - hgt_forward(x, g, hp, hgt)).cwiseAbs().maxCoeff(), 1e-6);
  }
}

TEST(Hgt, TiedHeteroModelEqualsHomoModelOnCollapsedGraph) {
  std::mt19937_64 rng(6);
  const auto g = random_topology(10, 2, 3, 0.4, rng);
  StackSpec homo;
  homo.input_dim = 6;
  homo.hidden_dim = homo.output_dim = 4;
  StackSpec hetero = homo;
  hetero.mode = GraphMode::heterogeneous;
  const auto gm = GnnModel<double>::init(homo, 1);
  auto hm = GnnModel<double>::init(hetero, 2);
  for (std::size_t l = 0; l < hm.stack.layers.size(); ++l)
    tie_hgt_to_gat(hm.params, std::get<HgtLayerSpec>(hm.stack.layers[l]), gm.params, std::get<GatLayerSpec>(gm.stack.layers[l]));
  const Matrix<double> x = random_matrix(10, 6, rng);
  EXPECT_LT((caselink_forward(hm, g, x) - caselink_forward(gm, g.collapsed(), x)).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Hgt, DistinctRelationsChangeOutput) {
  std::mt19937_64 rng(7);
  const auto g = Topology::build(3, {0, 1, 0}, 2, 2, {{0, 1, 0}, {1, 2, 1}});
  ParamStore<double> p;
  const auto L = add_hgt_layer(p, "h", 3, 3, 2, 2, rng);
  const Matrix<double> x = random_matrix(3, 3, rng);
  const Matrix<double> before = hgt_forward(x, g, p, L);
  p[L.relation[1]] *= 2.0;
  EXPECT_GT((hgt_forward(x, g, p, L) - before).norm(), 1e-6);
}

TEST(Hgt, UnknownNodeTypeRejected) {
  std::mt19937_64 rng(8);
  const auto g = Topology::build(2, {0, 2}, 3, 1, {{0, 1, 0}});
  ParamStore<double> p;
  const auto L = add_hgt_layer(p, "h", 2, 2, 2, 1, rng);
  EXPECT_THROW(hgt_forward(random_matrix(2, 2, rng), g, p, L), LookupError);
}

TEST(Stack, ResidualConcatenatesInput) {
  std::mt19937_64 rng(9);
  const auto g = random_topology(5, 2, 3, 0.5, rng);
  StackSpec spec;
  spec.mode = GraphMode::heterogeneous;
  spec.input_dim = 3;
  spec.hidden_dim = spec.output_dim = 2;
  const auto model = GnnModel<double>::init(spec, 3);
  const Matrix<double> x = random_matrix(5, 3, rng);
  const Matrix<double> out = caselink_forward(model, g, x);
  ASSERT_EQ(out.cols(), 5);
  EXPECT_EQ(out.rightCols(3), x);
}

TEST(Stack, CheckpointRoundTripReproducesForward) {
  std::mt19937_64 rng(10);
  const auto g = random_topology(6, 2, 3, 0.5, rng);
  for (auto mode : {GraphMode::homogeneous, GraphMode::heterogeneous}) {
    StackSpec spec;
    spec.mode = mode;
    spec.input_dim = 4;
    spec.hidden_dim = spec.output_dim = 3;
    const auto model = GnnModel<double>::init(spec, 4);
    const auto back = GnnModel<double>::from_json(nlohmann::json::parse(model.to_json().dump()));
    const Matrix<double> x = random_matrix(6, 4, rng);
    EXPECT_EQ(caselink_forward(model, g, x), caselink_forward(back, g, x));
  }
}

TEST(Stack, InitIsSeedDeterministic) {
  StackSpec spec;
  spec.input_dim = 4;
  EXPECT_EQ(GnnModel<float>::init(spec, 5).params, GnnModel<float>::init(spec, 5).params);
  EXPECT_FALSE(GnnModel<float>::init(spec, 5).params == GnnModel<float>::init(spec, 6).params);
}

TEST(Adam, StepsAgainstGradientAndAppliesDecay) {
  ParamStore<double> p;
  p.add("w", Matrix<double>::Constant(1, 2, 1.0));
  ParamStore<double> g = p.zeros_like();
  g[0](0, 0) = 1.0;
  g[0](0, 1) = -1.0;
  Adam<double> adam(p, {0.1, 0.0});
  adam.step(p, g);
  EXPECT_NEAR(p[0](0, 0), 0.9, 1e-6);
  EXPECT_NEAR(p[0](0, 1), 1.1, 1e-6);
  ParamStore<double> q;
  q.add("w", Matrix<double>::Constant(1, 1, 1.0));
  Adam<double> decay(q, {0.1, 0.5});
  decay.step(q, q.zeros_like());
  EXPECT_LT(q[0](0, 0), 1.0);
}

TEST(Activations, EluAndLeakyRelu) {
  Matrix<double> m(1, 2);
  m << -1.0, 2.0;
  const Matrix<double> e = elu(m);
  EXPECT_NEAR(e(0, 0), std::exp(-1.0) - 1.0, 1e-15);
  EXPECT_EQ(e(0, 1), 2.0);
  EXPECT_DOUBLE_EQ(leaky_relu(-2.0), -0.4);
  EXPECT_DOUBLE_EQ(leaky_relu(3.0), 3.0);
}

}  // namespace
}  // namespace caselink
