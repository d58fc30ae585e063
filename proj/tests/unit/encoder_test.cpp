#include <gtest/gtest.h>

#include <numeric>

#include "test_util.hpp"

namespace infograph {
namespace {

using testing::make_graph;
using testing::random_graph;
using testing::random_matrix;

GraphBatch batch_of(const std::vector<Graph>& gs) { return make_batch(std::span<const Graph>(gs)); }

void set(Tensor& t, double v) { t.mutable_value().setConstant(v); }

TEST(GinLayer, IsolatedNodeSeesOnlyItself) {
  Rng rng(1);
  Encoder enc(2, 1, 3, rng);
  Graph g = make_graph(2, {}, 2);
  g.node_features << 0.5, -1.0, 2.0, 0.25;
  const auto b = batch_of({g});
  const auto& layer = enc.layers()[0];
  const Matrix out = gin_layer_forward(layer, b, Tensor::constant(g.node_features)).value();
  const Matrix expect = layer.lin2(relu(layer.lin1(Tensor::constant(g.node_features)))).value();
  EXPECT_TRUE(out.isApprox(expect, 1e-15));
}

TEST(GinLayer, ZeroWeightsGiveZeroOutput) {
  Rng rng(2);
  Encoder enc(3, 2, 4, rng);
  for (auto p : enc.parameters()) set(p, 0.0);
  Graph g = random_graph(6, 0.5, 3, rng);
  const auto e = encode(enc, batch_of({g}));
  EXPECT_EQ(e.patch.value(), Matrix::Zero(6, 8));
  EXPECT_EQ(e.global.value(), Matrix::Zero(1, 8));
}

TEST(GinLayer, ThreeNodePathByHand) {
  Rng rng(3);
  Encoder enc(1, 1, 1, rng);
  auto& l = enc.layers()[0];
  set(l.lin1.weight, 2.0);
  set(l.lin1.bias, -7.0);
  set(l.lin2.weight, 0.5);
  set(l.lin2.bias, 1.0);
  Graph g = make_graph(3, {{0, 1}, {1, 2}}, 1);
  g.node_features << 1.0, 2.0, 3.0;
  const Matrix out = gin_layer_forward(l, batch_of({g}), Tensor::constant(g.node_features)).value();
  // aggregated: 1+2=3, 2+1+3=6, 3+2=5 -> relu(2x-7) = 0, 5, 3 -> 0.5*r + 1
  EXPECT_DOUBLE_EQ(out(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(out(1, 0), 3.5);
  EXPECT_DOUBLE_EQ(out(2, 0), 2.5);
}

TEST(GinLayer, WidthMismatchIsShapeError) {
  Rng rng(4);
  Encoder enc(3, 2, 4, rng);
  Graph g = make_graph(2, {{0, 1}}, 2);
  EXPECT_THROW(encode(enc, batch_of({g})), ShapeError);
  EXPECT_THROW(gin_layer_forward(enc.layers()[1], batch_of({make_graph(2, {{0, 1}}, 3)}),
                                 Tensor::constant(Matrix::Zero(2, 3))),
               ShapeError);
}

TEST(Encoder, ShapesAndConsistency) {
  Rng rng(5);
  Encoder enc(4, 3, 5, rng);
  EXPECT_EQ(enc.embedding_dim(), 15);
  EXPECT_EQ(enc.parameters().size(), 12u);
  std::vector<Graph> gs = {random_graph(5, 0.4, 4, rng), random_graph(3, 0.6, 4, rng), random_graph(7, 0.3, 4, rng)};
  const auto b = batch_of(gs);
  const auto e = encode(enc, b);
  ASSERT_EQ(e.layer_patches.size(), 3u);
  ASSERT_EQ(e.layer_globals.size(), 3u);
  EXPECT_EQ(e.patch.rows(), 15);
  EXPECT_EQ(e.patch.cols(), 15);
  EXPECT_EQ(e.global.rows(), 3);
  for (int k = 0; k < 3; ++k) {
    EXPECT_EQ(Matrix(e.patch.value().middleCols(5 * k, 5)), e.layer_patches[static_cast<std::size_t>(k)].value());
    EXPECT_EQ(Matrix(e.global.value().middleCols(5 * k, 5)), e.layer_globals[static_cast<std::size_t>(k)].value());
  }
  EXPECT_EQ(segment_sum(e.patch, b.node2graph, b.num_graphs).value(), e.global.value());
}

TEST(Encoder, ParameterOrderIsStable) {
  Rng a(6), b(6);
  Encoder e1(3, 2, 4, a), e2(3, 2, 4, b);
  const auto p1 = e1.parameters(), p2 = e2.parameters();
  ASSERT_EQ(p1.size(), p2.size());
  for (std::size_t i = 0; i < p1.size(); ++i) {
    EXPECT_EQ(p1[i].name(), p2[i].name());
    EXPECT_EQ(p1[i].value(), p2[i].value());
  }
  EXPECT_EQ(p1.front().name(), "encoder.layer0.lin1.weight");
  EXPECT_EQ(p1.back().name(), "encoder.layer1.lin2.bias");
}

TEST(Encoder, SingleNodeGlobalEqualsPatch) {
  Rng rng(7);
  Encoder enc(2, 3, 4, rng);
  Graph g = make_graph(1, {}, 2);
  g.node_features << 0.3, -0.8;
  const auto e = encode(enc, batch_of({g}));
  EXPECT_EQ(e.global.value(), e.patch.value());
}

Graph permuted(const Graph& g, const std::vector<int>& pi) {
  Graph out;
  out.num_nodes = g.num_nodes;
  out.node_features = Matrix(g.num_nodes, g.node_features.cols());
  for (int v = 0; v < g.num_nodes; ++v) out.node_features.row(pi[static_cast<std::size_t>(v)]) = g.node_features.row(v);
  for (auto it = g.edges.rbegin(); it != g.edges.rend(); ++it) {
    const int u = pi[static_cast<std::size_t>(it->first)], v = pi[static_cast<std::size_t>(it->second)];
    out.edges.emplace_back(std::min(u, v), std::max(u, v));
  }
  return out;
}

TEST(Encoder, PermutationInvariance) {
  Rng rng(8);
  Encoder enc(3, 3, 6, rng);
  for (int trial = 0; trial < 5; ++trial) {
    Graph g = random_graph(9, 0.35, 3, rng);
    std::vector<int> pi(9);
    std::iota(pi.begin(), pi.end(), 0);
    rng.shuffle(std::span<int>(pi));
    const auto e1 = encode(enc, batch_of({g}));
    const auto e2 = encode(enc, batch_of({permuted(g, pi)}));
    EXPECT_LE((e1.global.value() - e2.global.value()).cwiseAbs().maxCoeff(), 1e-9);
    for (int v = 0; v < 9; ++v) {
      EXPECT_LE((e1.patch.value().row(v) - e2.patch.value().row(pi[static_cast<std::size_t>(v)])).cwiseAbs().maxCoeff(), 1e-9);
    }
  }
}

TEST(Encoder, BatchingIndependence) {
  Rng rng(9);
  Encoder enc(3, 3, 6, rng);
  std::vector<Graph> gs = {random_graph(6, 0.4, 3, rng), random_graph(8, 0.3, 3, rng), random_graph(4, 0.7, 3, rng)};
  const auto together = encode(enc, batch_of(gs));
  int offset = 0;
  for (std::size_t j = 0; j < gs.size(); ++j) {
    const auto alone = encode(enc, batch_of({gs[j]}));
    EXPECT_LE((together.global.value().row(static_cast<Eigen::Index>(j)) - alone.global.value().row(0)).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_LE((together.patch.value().middleRows(offset, gs[j].num_nodes) - alone.patch.value()).cwiseAbs().maxCoeff(), 1e-9);
    offset += gs[j].num_nodes;
  }
}

TEST(Encoder, KHopLocality) {
  Rng rng(10);
  // Path 0-1-2-...-7. With K=2, node 0 depends on nodes 0..2 only.
  std::vector<std::pair<int, int>> path;
  for (int v = 0; v < 7; ++v) path.emplace_back(v, v + 1);
  Graph g = make_graph(8, path, 3);
  g.node_features = random_matrix(8, 3, rng);
  Encoder enc(3, 2, 5, rng);
  const auto base = encode(enc, batch_of({g}));
  Graph far = g;
  far.node_features.row(3) += Eigen::RowVector3d(1.0, -2.0, 0.5);
  const auto moved = encode(enc, batch_of({far}));
  EXPECT_EQ(Matrix(base.patch.value().row(0)), Matrix(moved.patch.value().row(0)));
  Graph near = g;
  near.node_features.row(2) += Eigen::RowVector3d(1.0, -2.0, 0.5);
  EXPECT_NE(Matrix(base.patch.value().row(0)), Matrix(encode(enc, batch_of({near})).patch.value().row(0)));
}

}  // namespace
}  // namespace infograph
