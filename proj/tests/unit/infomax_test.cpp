#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "test_util.hpp"

namespace infograph {
namespace {

using testing::check_gradients;
using testing::make_graph;
using testing::QuietLogs;
using testing::random_graph;
using testing::random_matrix;

GraphBatch batch_of(const std::vector<Graph>& gs) { return make_batch(std::span<const Graph>(gs)); }

double sp(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

// Direct transcription of the estimator, one scalar at a time.
double jsd_oracle(const Matrix& s, const std::vector<int>& node2graph, const std::vector<int>& sizes) {
  const int n = static_cast<int>(node2graph.size());
  const int b = static_cast<int>(sizes.size());
  double total = 0;
  for (int g = 0; g < b; ++g) {
    double pos = 0, neg = 0;
    int npos = 0, nneg = 0;
    for (int i = 0; i < n; ++i) {
      if (node2graph[static_cast<std::size_t>(i)] == g) {
        pos += sp(-s(i, g));
        ++npos;
      } else {
        neg += sp(s(i, g));
        ++nneg;
      }
    }
    total += pos / npos + (nneg ? neg / nneg : 0.0);
  }
  return total / b;
}

TEST(ScorePairs, FourteenPairsForSevenNodes) {
  Rng rng(1);
  Encoder enc(2, 2, 3, rng);
  Discriminator disc(6, rng);
  std::vector<Graph> gs = {random_graph(3, 0.7, 2, rng), random_graph(4, 0.5, 2, rng)};
  const auto e = encode(enc, batch_of(gs));
  const auto s = score_pairs(disc, e.patch, e.global);
  EXPECT_EQ(s.rows(), 7);
  EXPECT_EQ(s.cols(), 2);
  EXPECT_EQ(s.value().size(), 14);
}

TEST(ScorePairs, ZeroProjectionsGiveZeroScores) {
  Rng rng(2);
  Discriminator disc(4, rng);
  for (auto p : disc.parameters()) p.mutable_value().setZero();
  const auto s = score_pairs(disc, Tensor::constant(random_matrix(5, 4, rng)), Tensor::constant(random_matrix(2, 4, rng)));
  EXPECT_EQ(s.value(), Matrix::Zero(5, 2));
}

TEST(ScorePairs, MatchesPairwiseLoop) {
  Rng rng(3);
  Discriminator disc(5, rng);
  const Matrix patch = random_matrix(9, 5, rng);
  const Matrix global = random_matrix(3, 5, rng);
  const Matrix s = score_pairs(disc, Tensor::constant(patch), Tensor::constant(global)).value();
  for (int i = 0; i < 9; ++i) {
    const Matrix li = disc.local_proj(Tensor::constant(patch.row(i))).value();
    for (int g = 0; g < 3; ++g) {
      const Matrix gg = disc.global_proj(Tensor::constant(global.row(g))).value();
      double dot = 0;
      for (int c = 0; c < 5; ++c) dot += li(0, c) * gg(0, c);
      EXPECT_NEAR(s(i, g), dot, 1e-12);
    }
  }
}

TEST(ScorePairs, WidthMismatch) {
  Rng rng(4);
  Discriminator disc(4, rng);
  EXPECT_THROW(score_pairs(disc, Tensor::constant(Matrix::Zero(3, 4)), Tensor::constant(Matrix::Zero(1, 5))), ShapeError);
}

TEST(Projection, ReluAfterEachLayerPlusShortcut) {
  Rng rng(5);
  Projection p(3, rng, "p");
  const Matrix x = random_matrix(4, 3, rng);
  auto lin = [](const Linear& l, const Matrix& m) -> Matrix {
    return (m * l.weight.value()).rowwise() + Eigen::RowVectorXd(l.bias.value().row(0));
  };
  auto r = [](const Matrix& m) -> Matrix { return m.cwiseMax(0.0); };
  const Matrix expect = r(lin(p.l3, r(lin(p.l2, r(lin(p.l1, x)))))) + lin(p.shortcut, x);
  EXPECT_TRUE(p(Tensor::constant(x)).value().isApprox(expect, 1e-14));
}

TEST(Jsd, AllZeroScoresGiveTwoLn2) {
  for (std::vector<int> sizes : {std::vector<int>{3, 4}, std::vector<int>{1, 2, 5}, std::vector<int>{2, 2, 2, 2}}) {
    std::vector<int> n2g;
    for (std::size_t g = 0; g < sizes.size(); ++g) n2g.insert(n2g.end(), static_cast<std::size_t>(sizes[g]), static_cast<int>(g));
    const auto l = jsd_mi_loss(Tensor::constant(Matrix::Zero(static_cast<Eigen::Index>(n2g.size()), static_cast<Eigen::Index>(sizes.size()))), n2g, sizes);
    EXPECT_DOUBLE_EQ(l.item(), 2 * std::log(2.0));
    EXPECT_NEAR(l.item(), 1.386294, 1e-6);
  }
}

TEST(Jsd, LimitingOptimumIsZero) {
  std::vector<int> n2g = {0, 0, 0, 1, 1, 1, 1}, sizes = {3, 4};
  Matrix s(7, 2);
  for (int i = 0; i < 7; ++i) {
    for (int g = 0; g < 2; ++g) s(i, g) = n2g[static_cast<std::size_t>(i)] == g ? 60.0 : -60.0;
  }
  const double l = jsd_mi_loss(Tensor::constant(s), n2g, sizes).item();
  EXPECT_GE(l, 0.0);
  EXPECT_LT(l, 1e-20);
}

TEST(Jsd, MatchesTripleLoopOracle) {
  Rng rng(6);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<int> n2g = {0, 0, 0, 1, 1, 1, 1}, sizes = {3, 4};
    const Matrix s = random_matrix(7, 2, rng, 5.0);
    EXPECT_NEAR(jsd_mi_loss(Tensor::constant(s), n2g, sizes).item(), jsd_oracle(s, n2g, sizes), 1e-12);
  }
  std::vector<int> n2g = {0, 1, 1, 2, 2, 2, 3, 3, 3, 3}, sizes = {1, 2, 3, 4};
  const Matrix s = random_matrix(10, 4, rng, 8.0);
  EXPECT_NEAR(jsd_mi_loss(Tensor::constant(s), n2g, sizes).item(), jsd_oracle(s, n2g, sizes), 1e-12);
}

TEST(Jsd, SingleGraphHasNoNegatives) {
  std::vector<std::string> warnings;
  ScopedLogSink sink([&](LogLevel level, const std::string& m) {
    if (level == LogLevel::Warning) warnings.push_back(m);
  });
  std::vector<int> n2g = {0, 0, 0}, sizes = {3};
  Matrix s(3, 1);
  s << 0.5, -1.0, 2.0;
  const double l = jsd_mi_loss(Tensor::constant(s), n2g, sizes).item();
  EXPECT_NEAR(l, (sp(-0.5) + sp(1.0) + sp(-2.0)) / 3.0, 1e-14);
  EXPECT_EQ(warnings.size(), 1u);
}

TEST(Jsd, PairAccounting) {
  std::vector<int> n2g = {0, 0, 0, 1, 1, 1, 1}, sizes = {3, 4};
  const auto w = jsd_pair_weights(n2g, sizes);
  EXPECT_EQ(w.positive_pairs, 7u);
  EXPECT_EQ(w.negative_pairs, 7u);
  EXPECT_EQ((w.positive.array() > 0).count(), 7);
  EXPECT_EQ((w.negative.array() > 0).count(), 7);
  std::vector<int> n2g3 = {0, 1, 1, 2, 2, 2}, sizes3 = {1, 2, 3};
  const auto w3 = jsd_pair_weights(n2g3, sizes3);
  EXPECT_EQ(w3.positive_pairs, 6u);
  EXPECT_EQ(w3.negative_pairs, 3u * 6u - 6u);
  // Each column's positive weights and negative weights each sum to one.
  for (int g = 0; g < 3; ++g) {
    EXPECT_NEAR(w3.positive.col(g).sum(), 1.0, 1e-15);
    EXPECT_NEAR(w3.negative.col(g).sum(), 1.0, 1e-15);
  }
}

TEST(Jsd, ShapeErrors) {
  std::vector<int> n2g = {0, 1}, sizes = {1, 1};
  EXPECT_THROW(jsd_mi_loss(Tensor::constant(Matrix::Zero(3, 2)), n2g, sizes), ShapeError);
  EXPECT_THROW(jsd_mi_loss(Tensor::constant(Matrix::Zero(2, 3)), n2g, sizes), ShapeError);
}

struct Toy;
std::vector<Tensor> all_params(const Toy& t);

struct Toy {
  Encoder enc;
  Discriminator disc;
  GraphBatch batch;
};

Toy toy(std::uint64_t seed, int hidden = 3) {
  Rng rng(seed);
  Toy t{Encoder(2, 2, hidden, rng), Discriminator(2 * hidden, rng), {}};
  std::vector<Graph> gs = {random_graph(3, 0.8, 2, rng), random_graph(4, 0.6, 2, rng)};
  t.batch = batch_of(gs);
  testing::randomize_biases(all_params(t), rng);
  return t;
}

std::vector<Tensor> all_params(const Toy& t) {
  auto ps = t.enc.parameters();
  for (auto& p : t.disc.parameters()) ps.push_back(p);
  return ps;
}

class UnsupGradient : public ::testing::TestWithParam<int> {};

TEST_P(UnsupGradient, MatchesCentralDifferences) {
  Toy t = toy(100 + static_cast<std::uint64_t>(GetParam()));
  auto check = check_gradients([&] { return unsup_loss(t.enc, t.disc, t.batch); }, all_params(t));
  EXPECT_GT(check.entries, 100u);
  EXPECT_LT(check.max_rel_error, 1e-4);
}

INSTANTIATE_TEST_SUITE_P(Seeds, UnsupGradient, ::testing::Range(0, 6));

TEST(UnsupLoss, DuplicateGraphKeepsPositiveTerm) {
  Rng rng(7);
  Encoder enc(2, 2, 3, rng);
  Discriminator disc(6, rng);
  Graph a = random_graph(4, 0.6, 2, rng), b = random_graph(5, 0.5, 2, rng);
  auto positive_of_first = [&](const std::vector<Graph>& gs) {
    const auto batch = batch_of(gs);
    const auto e = encode(enc, batch);
    const Matrix s = score_pairs(disc, e.patch, e.global).value();
    double pos = 0;
    for (int i = 0; i < gs[0].num_nodes; ++i) pos += sp(-s(i, 0));
    return pos / gs[0].num_nodes;
  };
  EXPECT_NEAR(positive_of_first({a, b}), positive_of_first({a, b, a}), 1e-12);
}

TEST(UnsupLoss, GraphOrderPermutesColumns) {
  Rng rng(8);
  Encoder enc(2, 2, 3, rng);
  Discriminator disc(6, rng);
  Graph a = random_graph(4, 0.6, 2, rng), b = random_graph(5, 0.5, 2, rng), c = random_graph(3, 0.9, 2, rng);
  const auto ab = batch_of({a, b, c});
  const auto ba = batch_of({c, a, b});
  const auto e1 = encode(enc, ab);
  const auto e2 = encode(enc, ba);
  const Matrix s1 = score_pairs(disc, e1.patch, e1.global).value();
  const Matrix s2 = score_pairs(disc, e2.patch, e2.global).value();
  // Graph a: rows 0..3 / col 0 in ab, rows 3..6 / col 1 in ba.
  EXPECT_LE((s1.block(0, 0, 4, 1) - s2.block(3, 1, 4, 1)).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_LE((s1.block(4, 2, 5, 1) - s2.block(7, 0, 5, 1)).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_NEAR(unsup_loss(enc, disc, ab).item(), unsup_loss(enc, disc, ba).item(), 1e-10);
}

TEST(UnsupLoss, OneAdamStepDecreasesLoss) {
  Toy t = toy(9, 8);
  auto ps = all_params(t);
  AdamState st;
  zero_grads(ps);
  auto before = unsup_loss(t.enc, t.disc, t.batch);
  before.backward();
  adam_step(ps, st, 1e-3);
  EXPECT_LT(unsup_loss(t.enc, t.disc, t.batch).item(), before.item());
}

TEST(UnsupLoss, FiniteForLargeScores) {
  Toy t = toy(10);
  for (auto p : t.disc.parameters()) p.mutable_value() *= 40.0;
  const double l = unsup_loss(t.enc, t.disc, t.batch).item();
  EXPECT_TRUE(std::isfinite(l));
}

}  // namespace
}  // namespace infograph
