#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "test_util.hpp"
#include "vosmem/metrics.hpp"

namespace vosmem {
namespace {

using testing::random_mask;

BinaryMask square(int h, int w, int y0, int x0, int side) {
  BinaryMask m(h, w, 0);
  for (int y = y0; y < y0 + side; ++y) {
    for (int x = x0; x < x0 + side; ++x) m(y, x) = 1;
  }
  return m;
}

TEST(RegionSimilarity, Examples) {
  const auto a = square(8, 8, 1, 1, 3);
  EXPECT_EQ(region_similarity(a, a), 1.0);
  EXPECT_EQ(region_similarity(a, square(8, 8, 5, 5, 2)), 0.0);
  EXPECT_EQ(region_similarity(BinaryMask(3, 3), BinaryMask(3, 3)), 1.0);

  BinaryMask left(4, 4, 0), top(4, 4, 0);
  for (int y = 0; y < 4; ++y) {
    for (int x = 0; x < 4; ++x) {
      left(y, x) = x < 2;
      top(y, x) = y < 2;
    }
  }
  EXPECT_DOUBLE_EQ(region_similarity(left, top), 4.0 / 12.0);
  EXPECT_THROW(region_similarity(left, BinaryMask(4, 5)), DataError);
}

TEST(ContourAccuracy, Examples) {
  const auto gt = square(8, 8, 2, 2, 3);
  EXPECT_EQ(contour_accuracy(gt, gt, 0), 1.0);
  EXPECT_EQ(contour_accuracy(BinaryMask(8, 8), gt, 2), 0.0);
  EXPECT_EQ(contour_accuracy(BinaryMask(8, 8), BinaryMask(8, 8), 2), 1.0);
  const auto shifted = square(8, 8, 2, 3, 3);
  EXPECT_DOUBLE_EQ(contour_accuracy(shifted, gt, 1), oracle::boundary_f(shifted, gt, 1));
  EXPECT_EQ(contour_accuracy(shifted, gt, 1), 1.0);
  EXPECT_LT(contour_accuracy(shifted, gt, 0), 1.0);
  EXPECT_THROW(contour_accuracy(gt, gt, -1), ConfigError);
}

TEST(Metrics, MatchOraclesOnRandomPairs) {
  std::mt19937_64 rng(2024);
  for (int i = 0; i < 60; ++i) {
    const int h = 1 + static_cast<int>(rng() % 30), w = 1 + static_cast<int>(rng() % 30);
    const auto a = random_mask(h, w, rng), b = random_mask(h, w, rng);
    const double tol = static_cast<double>(rng() % 4);
    EXPECT_NEAR(region_similarity(a, b), oracle::jaccard(a, b), 1e-12);
    EXPECT_NEAR(contour_accuracy(a, b, tol), oracle::boundary_f(a, b, tol), 1e-12);
  }
}

TEST(Metrics, SymmetricAndFlipInvariant) {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 30; ++i) {
    const auto a = random_mask(20, 17, rng), b = random_mask(20, 17, rng);
    EXPECT_EQ(region_similarity(a, b), region_similarity(b, a));
    EXPECT_DOUBLE_EQ(contour_accuracy(a, b, 2), contour_accuracy(b, a, 2));
    EXPECT_DOUBLE_EQ(region_similarity(flip_horizontal(a), flip_horizontal(b)), region_similarity(a, b));
    EXPECT_DOUBLE_EQ(contour_accuracy(flip_horizontal(a), flip_horizontal(b), 2), contour_accuracy(a, b, 2));
  }
}

TEST(Metrics, RemovingCorrectForegroundNeverRaisesJ) {
  std::mt19937_64 rng(9);
  for (int i = 0; i < 20; ++i) {
    const auto gt = random_mask(16, 16, rng, false);
    auto pred = random_mask(16, 16, rng, false);
    double prev = region_similarity(pred, gt);
    for (std::size_t p = 0; p < pred.area(); ++p) {
      if (pred[p] && gt[p]) {
        pred[p] = 0;
        const double now = region_similarity(pred, gt);
        EXPECT_LE(now, prev);
        prev = now;
      }
    }
  }
}

TEST(Metrics, DefaultTolerance) {
  EXPECT_EQ(default_contour_tolerance({64, 96}), 1.0);
  EXPECT_EQ(default_contour_tolerance({480, 854}), 8.0);
}

TEST(EvaluateSequence, Aggregation) {
  const auto a = square(10, 10, 1, 1, 4), b = square(10, 10, 6, 6, 3);
  std::vector<BinaryMask> gts{a, a, a}, same{a, a, a};
  auto s = evaluate_sequence(same, gts);
  EXPECT_EQ(s.overall, 1.0);

  std::vector<BinaryMask> g2{a, a}, p2{b, b};
  s = evaluate_sequence(p2, g2);
  EXPECT_EQ(s.overall, 0.0);

  std::vector<BinaryMask> mixed{b, a, b};
  s = evaluate_sequence(mixed, gts, true, 1.0);
  const double j = (1.0 + oracle::jaccard(b, a)) / 2.0;
  const double f = (1.0 + oracle::boundary_f(b, a, 1.0)) / 2.0;
  EXPECT_DOUBLE_EQ(s.j_mean, j);
  EXPECT_DOUBLE_EQ(s.f_mean, f);
  EXPECT_EQ(s.overall, (s.j_mean + s.f_mean) / 2.0);

  s = evaluate_sequence(mixed, gts, false, 1.0);
  EXPECT_DOUBLE_EQ(s.j_mean, (1.0 + 2.0 * oracle::jaccard(b, a)) / 3.0);

  std::vector<BinaryMask> short1{a};
  EXPECT_THROW(evaluate_sequence(short1, short1), DataError);
  EXPECT_THROW(evaluate_sequence(g2, gts), DataError);
}

}  // namespace
}  // namespace vosmem
