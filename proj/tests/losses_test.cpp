#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "test_util.hpp"
#include "vosmem/losses.hpp"

namespace vosmem {
namespace {

TEST(BalancedBce, HandDerivedTwoByTwo) {
  ProbabilityMap p(2, 2, 0.5);
  BinaryMask t(2, 2, 0);
  t(0, 1) = 1;
  std::vector<ProbabilityMap> ps{p};
  std::vector<BinaryMask> ts{t};
  EXPECT_NEAR(balanced_bce(ps, ts), 1.5 * std::log(2.0), 1e-9);
}

TEST(BalancedBce, DegenerateAndPerfectFrames) {
  // No foreground: beta = 1 removes the background term.
  std::vector<ProbabilityMap> ps{ProbabilityMap(3, 3, 0.3)};
  std::vector<BinaryMask> ts{BinaryMask(3, 3, 0)};
  EXPECT_EQ(balanced_bce(ps, ts), 0.0);

  BinaryMask t(4, 4, 0);
  t(1, 1) = t(2, 2) = 1;
  ProbabilityMap perfect(4, 4, 0.0);
  perfect(1, 1) = perfect(2, 2) = 1.0;
  std::vector<ProbabilityMap> pp{perfect, perfect};
  std::vector<BinaryMask> tt{t, t};
  EXPECT_LE(balanced_bce(pp, tt), 2 * 16 * -std::log(1 - 1e-7) + 1e-12);
  EXPECT_GE(balanced_bce(pp, tt), 0.0);
}

TEST(BalancedBce, HalfBalancedFrameIsHalfPlainBce) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.05, 0.95);
  BinaryMask t(4, 4, 0);
  for (int x = 0; x < 4; ++x) t(0, x) = t(1, x) = 1;
  ProbabilityMap p(4, 4);
  double plain = 0.0;
  for (std::size_t i = 0; i < p.area(); ++i) {
    p[i] = u(rng);
    plain += t[i] ? -std::log(p[i]) : -std::log(1 - p[i]);
  }
  std::vector<ProbabilityMap> ps{p};
  std::vector<BinaryMask> ts{t};
  EXPECT_NEAR(balanced_bce(ps, ts), 0.5 * plain, 1e-12);
}

TEST(BalancedBce, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(0.05, 0.95);
  const auto t = testing::random_mask(5, 6, rng);
  std::vector<double> p(30);
  for (auto& v : p) v = u(rng);
  std::vector<double> g(30, 0.0);
  balanced_bce_frame<double>(p, t.values(), 1e-7, g.data(), 1.0);
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double h = 1e-6;
    auto a = p, b = p;
    a[i] += h;
    b[i] -= h;
    const double fd = (balanced_bce_frame<double>(a, t.values(), 1e-7) - balanced_bce_frame<double>(b, t.values(), 1e-7)) /
                      (2 * h);
    EXPECT_NEAR(g[i], fd, 1e-5 * std::max(1.0, std::abs(fd)));
  }
}

TEST(BalancedBce, SizeMismatchIsDataError) {
  std::vector<ProbabilityMap> ps{ProbabilityMap(2, 2, 0.5)};
  std::vector<BinaryMask> ts{BinaryMask(2, 3)};
  EXPECT_THROW(balanced_bce(ps, ts), DataError);
}

TEST(DistanceCe, UniformLogitsGiveLogK) {
  for (int k : {4, 6, 22, 42}) {
    std::vector<Tensor<double>> logits{Tensor<double>(k, 3, 5, 0.7)};
    std::vector<DistanceClassMap> targets{{Grid<int>(3, 5), DistanceConfig{(k - 2) / 2, 1}}};
    for (std::size_t i = 0; i < targets[0].classes.area(); ++i) targets[0].classes[i] = static_cast<int>(i) % k;
    EXPECT_NEAR(distance_ce(logits, targets), std::log(static_cast<double>(k)), 1e-9);
  }
}

TEST(DistanceCe, ScalarExample) {
  Tensor<double> l(3, 1, 1);
  l[0] = 1.0;
  const Grid<int> target(1, 1, 2);
  EXPECT_NEAR(cross_entropy_frame<double>(l, target), 1.0 + std::log(1.0 + 2.0 * std::exp(-1.0)), 1e-12);
}

TEST(DistanceCe, ConfidentCorrectLogitsApproachZero) {
  Tensor<double> l(4, 2, 2, -30.0);
  Grid<int> target(2, 2);
  for (int i = 0; i < 4; ++i) {
    target[i] = i;
    l[static_cast<std::size_t>(i) * 4 + i] = 30.0;
  }
  EXPECT_LT(cross_entropy_frame<double>(l, target), 1e-20);
}

TEST(DistanceCe, Errors) {
  Tensor<double> l(3, 2, 2);
  EXPECT_THROW(cross_entropy_frame<double>(l, Grid<int>(2, 2, 3)), DataError);
  EXPECT_THROW(cross_entropy_frame<double>(l, Grid<int>(2, 3, 0)), DataError);
  std::vector<Tensor<double>> logits{l};
  std::vector<DistanceClassMap> targets{{Grid<int>(2, 2), DistanceConfig{20, 10}}};
  EXPECT_THROW(distance_ce(logits, targets), ConfigError);
}

TEST(DistanceCe, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(1);
  auto l = testing::random_tensor<double>({5, 3, 4}, rng, -2, 2);
  Grid<int> target(3, 4);
  for (std::size_t i = 0; i < target.area(); ++i) target[i] = static_cast<int>(rng() % 5);
  Tensor<double> g(l.shape());
  cross_entropy_frame<double>(l, target, g.data(), 0.5);
  for (std::size_t i = 0; i < l.size(); ++i) {
    const double h = 1e-6;
    auto a = l, b = l;
    a[i] += h;
    b[i] -= h;
    const double fd = 0.5 * (cross_entropy_frame<double>(a, target) - cross_entropy_frame<double>(b, target)) / (2 * h);
    EXPECT_NEAR(g[i], fd, 1e-7);
  }
}

struct LossFixture : ::testing::Test {
  void SetUp() override {
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> u(0.01, 0.99);
    for (int t = 0; t < 3; ++t) {
      targets.push_back(testing::random_mask(12, 10, rng, false));
      ProbabilityMap p(12, 10);
      for (auto& v : p.values()) v = u(rng);
      probs.push_back(p);
      logits.push_back(testing::random_tensor<double>({config.distance.class_count(), 12, 10}, rng, -3, 3));
    }
  }
  LossConfig config{0.8, {20, 10}};
  std::vector<ProbabilityMap> probs;
  std::vector<BinaryMask> targets;
  std::vector<Tensor<double>> logits;
};

TEST_F(LossFixture, LambdaEndpointsReduceToComponentsExactly) {
  config.lambda = 1.0;
  auto r = total_loss(probs, logits, targets, config);
  EXPECT_EQ(r.total, r.seg);
  config.lambda = 0.0;
  r = total_loss(probs, logits, targets, config);
  EXPECT_EQ(r.total, r.dist);
}

TEST_F(LossFixture, ComponentsMatchStandaloneFunctions) {
  const auto r = total_loss(probs, logits, targets, config);
  EXPECT_NEAR(r.seg, balanced_bce(probs, targets), 1e-9);
  std::vector<DistanceClassMap> classes;
  for (const auto& t : targets) classes.push_back(encode_distance_classes(t, config.distance));
  EXPECT_NEAR(r.dist, distance_ce(logits, classes), 1e-12);
  EXPECT_NEAR(r.total, 0.8 * r.seg + 0.2 * r.dist, 1e-12);
  EXPECT_GE(r.seg, 0.0);
  EXPECT_GE(r.dist, 0.0);
}

TEST_F(LossFixture, AffineInLambda) {
  LossBreakdown prev{};
  for (int i = 0; i <= 10; ++i) {
    config.lambda = i / 10.0;
    const auto r = total_loss(probs, logits, targets, config);
    EXPECT_NEAR(r.total, r.dist + config.lambda * (r.seg - r.dist), 1e-9);
    if (i > 0) EXPECT_NEAR(r.total - prev.total, 0.1 * (r.seg - r.dist), 1e-9);
    prev = r;
  }
}

TEST_F(LossFixture, GraphVersionAgreesWithDirectVersion) {
  std::vector<autograd::Var<double>> sp, dl;
  for (std::size_t t = 0; t < probs.size(); ++t) {
    Tensor<double> p(1, 12, 10);
    std::copy(probs[t].values().begin(), probs[t].values().end(), p.data());
    sp.push_back(autograd::parameter(p));
    dl.push_back(autograd::parameter(logits[t]));
  }
  for (auto red : {Reduction::kSum, Reduction::kMean}) {
    config.seg_reduction = red;
    config.dist_reduction = red;
    const auto direct = total_loss(probs, logits, targets, config);
    const auto graph = total_loss_graph<double>(sp, dl, targets, config);
    EXPECT_NEAR(graph.values.total, direct.total, 1e-9);
    EXPECT_NEAR(graph.total->value[0], direct.total, 1e-9);
    EXPECT_NEAR(graph.values.seg, direct.seg, 1e-9);
    EXPECT_NEAR(graph.values.dist, direct.dist, 1e-12);
  }
}

TEST_F(LossFixture, GraphGradientMatchesFiniteDifferences) {
  config.seg_reduction = Reduction::kSum;
  std::vector<autograd::Var<double>> sp, dl;
  for (std::size_t t = 0; t < probs.size(); ++t) {
    Tensor<double> p(1, 12, 10);
    std::copy(probs[t].values().begin(), probs[t].values().end(), p.data());
    sp.push_back(autograd::parameter(p));
    dl.push_back(autograd::parameter(logits[t]));
  }
  const auto g = total_loss_graph<double>(sp, dl, targets, config);
  autograd::backward(g.total);
  auto eval = [&] { return total_loss(probs, logits, targets, config).total; };
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t t = rng() % probs.size();
    const double h = 1e-6;
    if (trial % 2 == 0) {
      const std::size_t i = rng() % probs[t].area();
      const double keep = probs[t][i];
      probs[t][i] = keep + h;
      const double up = eval();
      probs[t][i] = keep - h;
      const double down = eval();
      probs[t][i] = keep;
      const double fd = (up - down) / (2 * h);
      EXPECT_NEAR(sp[t]->grad[i], fd, 1e-5 * std::max(1.0, std::abs(fd)));
    } else {
      const std::size_t i = rng() % logits[t].size();
      const double keep = logits[t][i];
      logits[t][i] = keep + h;
      const double up = eval();
      logits[t][i] = keep - h;
      const double down = eval();
      logits[t][i] = keep;
      const double fd = (up - down) / (2 * h);
      EXPECT_NEAR(dl[t]->grad[i], fd, 1e-5 * std::max(1.0, std::abs(fd)));
    }
  }
}

TEST(LossConfig, Validation) {
  LossConfig c;
  EXPECT_NO_THROW(c.validate());
  c.lambda = 1.5;
  EXPECT_THROW(c.validate(), ConfigError);
  c.lambda = 0.5;
  c.epsilon = 0.0;
  EXPECT_THROW(c.validate(), ConfigError);
}

}  // namespace
}  // namespace vosmem
