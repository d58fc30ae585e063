#include <gtest/gtest.h>

#include <array>
#include <cmath>

#include "test_util.hpp"

namespace infograph {
namespace {

using testing::check_gradients;
using testing::QuietLogs;
using testing::random_graph;

struct Fixture {
  SemiModel model;
  GraphBatch labeled;
  GraphBatch unlabeled;
};

Fixture fixture(std::uint64_t seed, double lambda, int hidden = 3, SemiOptions base = {}) {
  Rng rng(seed);
  base.lambda = lambda;
  Fixture f{SemiModel(2, 2, hidden, 1, base, rng), {}, {}};
  testing::randomize_biases(f.model.parameters(), rng);
  std::vector<Graph> lab = {random_graph(3, 0.8, 2, rng), random_graph(4, 0.6, 2, rng)};
  for (auto& g : lab) g.targets = {rng.uniform(-1, 1)};
  std::vector<Graph> unl = {random_graph(4, 0.6, 2, rng), random_graph(3, 0.9, 2, rng)};
  f.labeled = make_batch(std::span<const Graph>(lab));
  f.unlabeled = make_batch(std::span<const Graph>(unl));
  return f;
}

std::vector<Tensor> concat(std::vector<Tensor> a, const std::vector<Tensor>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

TEST(SupervisedLoss, Examples) {
  Fixture f = fixture(1, 0.0);
  const Matrix pred = predict(f.model, f.labeled).value();
  GraphBatch exact = f.labeled;
  exact.targets = pred;
  EXPECT_EQ(supervised_loss(f.model, exact).item(), 0.0);

  Rng rng(2);
  SemiModel zero(2, 1, 2, 1, {}, rng);
  for (auto p : zero.student_parameters()) p.mutable_value().setZero();
  std::vector<Graph> one = {random_graph(3, 0.5, 2, rng)};
  one[0].targets = {2.0};
  EXPECT_EQ(supervised_loss(zero, make_batch(std::span<const Graph>(one))).item(), 4.0);
}

TEST(SupervisedLoss, MatchesLoopOracle) {
  Rng rng(3);
  SemiModel m(2, 2, 3, 3, {}, rng);
  std::vector<Graph> gs;
  for (int i = 0; i < 5; ++i) {
    gs.push_back(random_graph(4, 0.5, 2, rng));
    gs.back().targets = {rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2)};
  }
  const auto b = make_batch(std::span<const Graph>(gs));
  const Matrix pred = predict(m, b).value();
  double total = 0;
  for (int g = 0; g < 5; ++g) {
    for (int t = 0; t < 3; ++t) {
      const double d = pred(g, t) - gs[static_cast<std::size_t>(g)].targets[static_cast<std::size_t>(t)];
      total += d * d;
    }
  }
  EXPECT_NEAR(supervised_loss(m, b).item(), total / 15.0, 1e-12);
}

TEST(SupervisedLoss, MissingTargetsIsArgumentError) {
  Fixture f = fixture(4, 0.0);
  EXPECT_THROW(supervised_loss(f.model, f.unlabeled), ArgumentError);
}

TEST(CombinedLoss, LambdaZeroEqualsSupervisedAndIgnoresUnlabeled) {
  QuietLogs quiet;
  Fixture f = fixture(5, 0.0);
  const auto terms = combined_loss(f.model, &f.labeled, &f.unlabeled);
  EXPECT_EQ(terms.total.item(), supervised_loss(f.model, f.labeled).item());
  auto ps = f.model.parameters();
  zero_grads(ps);
  terms.total.backward();
  const auto with_unl = snapshot(std::span<const Tensor>(ps));
  // Gradients of the supervised term alone.
  std::vector<Matrix> grads;
  for (auto& p : ps) grads.push_back(p.grad());
  zero_grads(ps);
  supervised_loss(f.model, f.labeled).backward();
  for (std::size_t i = 0; i < ps.size(); ++i) EXPECT_EQ(ps[i].grad(), grads[i]) << ps[i].name();
  (void)with_unl;
}

TEST(CombinedLoss, LambdaOneNoLabeledEqualsUnsup) {
  Fixture f = fixture(6, 1.0);
  const auto terms = combined_loss(f.model, nullptr, &f.unlabeled);
  EXPECT_EQ(terms.total.item(), unsup_loss(f.model.sup_encoder, f.model.patch_disc, f.unlabeled).item());
}

TEST(CombinedLoss, GradientMatchesFiniteDifferences) {
  Fixture f = fixture(7, 0.5);
  auto ps = concat(f.model.student_parameters(), f.model.patch_disc.parameters());
  auto check = check_gradients([&] { return combined_loss(f.model, &f.labeled, &f.unlabeled).total; }, ps);
  EXPECT_LT(check.max_rel_error, 1e-4);
}

TEST(StarLoss, GradientMatchesFiniteDifferencesPerLayer) {
  for (int layer = 0; layer < 2; ++layer) {
    for (bool weighted : {true, false}) {
      SemiOptions o;
      o.size_weighted_transfer = weighted;
      Fixture f = fixture(8 + static_cast<std::uint64_t>(layer), 0.7, 3, o);
      Rng rng(0);
      auto check = check_gradients([&] { return infograph_star_loss(f.model, &f.labeled, &f.unlabeled, rng, layer).total; },
                                   f.model.parameters());
      EXPECT_LT(check.max_rel_error, 1e-4) << "layer " << layer << " weighted " << weighted;
    }
  }
}

TEST(StarLoss, LambdaZeroDecouplesEncoders) {
  Fixture f = fixture(10, 0.0);
  Rng rng(1);
  auto ps = f.model.parameters();
  zero_grads(ps);
  infograph_star_loss(f.model, &f.labeled, &f.unlabeled, rng).total.backward();
  std::vector<Matrix> full;
  for (auto& p : ps) full.push_back(p.grad());

  // Term 1 alone: teacher side must get nothing from it.
  zero_grads(ps);
  supervised_loss(f.model, f.labeled).backward();
  for (auto& p : f.model.teacher_parameters()) EXPECT_TRUE(p.grad().isZero(0.0)) << p.name();
  const auto student = f.model.student_parameters();
  std::vector<Matrix> sup_grads;
  for (auto& p : student) sup_grads.push_back(p.grad());

  // Term 2 alone: student side must get nothing from it.
  zero_grads(ps);
  const auto all = merge_batches(f.labeled, f.unlabeled);
  unsup_loss(f.model.unsup_encoder, f.model.patch_disc, all).backward();
  for (auto& p : student) EXPECT_TRUE(p.grad().isZero(0.0)) << p.name();

  // Full loss at lambda 0 = exactly term1 grads on the student, zero on layer discs.
  for (std::size_t i = 0; i < student.size(); ++i) EXPECT_EQ(full[i], sup_grads[i]) << student[i].name();
  const std::size_t transfer_begin = ps.size() - f.model.transfer_parameters().size();
  for (std::size_t i = transfer_begin; i < ps.size(); ++i) EXPECT_TRUE(full[i].isZero(0.0)) << ps[i].name();
}

TEST(StarLoss, TransferPairCountsAndZeroScores) {
  Fixture f = fixture(11, 1.0);
  const auto all = merge_batches(f.labeled, f.unlabeled);
  std::vector<int> identity = {0, 1, 2, 3}, ones = {1, 1, 1, 1};
  const auto w = jsd_pair_weights(identity, ones);
  EXPECT_EQ(w.positive_pairs, 4u);
  EXPECT_EQ(w.negative_pairs, 12u);

  for (auto& d : f.model.layer_discs) {
    for (auto p : d.parameters()) p.mutable_value().setZero();
  }
  const auto s = encode(f.model.sup_encoder, all);
  const auto t = encode(f.model.unsup_encoder, all);
  double expect = 0;
  for (int size : all.graph_sizes) expect += 2 * std::log(2.0) / size;
  expect /= all.num_graphs;
  EXPECT_NEAR(transfer_loss(f.model, 1, s, t, all).item(), expect, 1e-14);
  f.model.options.size_weighted_transfer = false;
  EXPECT_NEAR(transfer_loss(f.model, 1, s, t, all).item(), 2 * std::log(2.0), 1e-14);
  EXPECT_THROW(transfer_loss(f.model, 2, s, t, all), IndexError);
}

TEST(StarLoss, LayerDrawFrequency) {
  Rng rng = Rng::substream(3, "layer");
  std::array<int, 3> counts{};
  for (int i = 0; i < 10000; ++i) ++counts[rng.below(3)];
  for (int c : counts) EXPECT_NEAR(c / 10000.0, 1.0 / 3.0, 0.02);
}

TEST(StarLoss, DrawsLayerFromRng) {
  Rng model_rng(12);
  SemiOptions o;
  o.lambda = 1.0;
  SemiModel m(2, 3, 3, 1, o, model_rng);
  Fixture f = fixture(12, 1.0);
  Rng a(5), b(5);
  const auto x = infograph_star_loss(m, &f.labeled, &f.unlabeled, a);
  const std::size_t layer = b.below(3);
  Rng unused(0);
  const auto y = infograph_star_loss(m, &f.labeled, &f.unlabeled, unused, static_cast<int>(layer));
  EXPECT_EQ(x.total.item(), y.total.item());
  EXPECT_TRUE(a == b);
}

TEST(StarLoss, AllLayersSumsEachLayer) {
  SemiOptions o;
  o.transfer_layers = TransferLayers::All;
  Fixture f = fixture(13, 1.0, 3, o);
  Rng rng(0);
  const double all = infograph_star_loss(f.model, &f.labeled, &f.unlabeled, rng).transfer;
  double sum_layers = 0;
  for (int k = 0; k < 2; ++k) sum_layers += infograph_star_loss(f.model, &f.labeled, &f.unlabeled, rng, k).transfer;
  EXPECT_NEAR(all, sum_layers, 1e-12);
}

TEST(StarLoss, Deterministic) {
  Fixture f = fixture(14, 1e-3);
  Fixture g = fixture(14, 1e-3);
  Rng a(9), b(9);
  for (int i = 0; i < 5; ++i) {
    EXPECT_EQ(infograph_star_loss(f.model, &f.labeled, &f.unlabeled, a).total.item(),
              infograph_star_loss(g.model, &g.labeled, &g.unlabeled, b).total.item());
  }
  EXPECT_EQ(combined_loss(f.model, &f.labeled, &f.unlabeled).total.item(),
            combined_loss(g.model, &g.labeled, &g.unlabeled).total.item());
}

TEST(StarLoss, SingleGraphWarns) {
  int warnings = 0;
  ScopedLogSink sink([&](LogLevel l, const std::string&) { warnings += l == LogLevel::Warning; });
  Fixture f = fixture(15, 1.0);
  std::vector<Graph> one = {random_graph(3, 0.9, 2, *std::make_unique<Rng>(1))};
  one[0].targets = {0.5};
  const auto b = make_batch(std::span<const Graph>(one));
  Rng rng(0);
  EXPECT_TRUE(std::isfinite(infograph_star_loss(f.model, &b, nullptr, rng).total.item()));
  EXPECT_GE(warnings, 1);
}

TEST(ErrorRatio, Examples) {
  EXPECT_DOUBLE_EQ(error_ratio(0.3201, 0.3201), 1.0);
  EXPECT_EQ(format_ratio(error_ratio(0.3201, 0.3201)), "1.00");
  EXPECT_EQ(format_ratio(error_ratio(0.99 * 0.3201, 0.3201)), "**0.99**");
  EXPECT_EQ(error_ratio(0.0, 0.7), 0.0);
  EXPECT_THROW(error_ratio(0.1, 0.0), ArgumentError);
  EXPECT_THROW(error_ratio(0.1, -1.0), ArgumentError);
}

TEST(SemiModel, InitializationOrderAndIndependence) {
  Rng a(20), b(20);
  SemiModel m1(3, 2, 4, 1, {}, a), m2(3, 2, 4, 1, {}, b);
  const auto p1 = m1.parameters(), p2 = m2.parameters();
  for (std::size_t i = 0; i < p1.size(); ++i) EXPECT_EQ(p1[i].value(), p2[i].value());
  EXPECT_NE(m1.sup_encoder.parameters()[0].value(), m1.unsup_encoder.parameters()[0].value());
  EXPECT_EQ(m1.layer_discs.size(), 2u);
  EXPECT_EQ(m1.layer_discs[0].width(), 4);
  EXPECT_EQ(m1.patch_disc.width(), 8);
  Rng c(0);
  EXPECT_THROW(SemiModel(3, 2, 4, 1, SemiOptions{-1.0}, c), ArgumentError);
}

}  // namespace
}  // namespace infograph
