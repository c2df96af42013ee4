#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "test_util.hpp"
#include "vosmem/mask_ops.hpp"

namespace vosmem {
namespace {

using testing::random_mask;

TEST(DistanceConfig, ClassCounts) {
  EXPECT_EQ((DistanceConfig{20, 1}).class_count(), 42);
  EXPECT_EQ((DistanceConfig{20, 10}).class_count(), 6);
  EXPECT_EQ((DistanceConfig{10, 1}).class_count(), 22);
  EXPECT_EQ((DistanceConfig{7, 3}).class_count(), 6);
}

TEST(DistanceConfig, Validation) {
  EXPECT_NO_THROW((DistanceConfig{1, 1}).validate());
  EXPECT_THROW((DistanceConfig{0, 1}).validate(), ConfigError);
  EXPECT_THROW((DistanceConfig{5, 0}).validate(), ConfigError);
  EXPECT_THROW((DistanceConfig{5, 6}).validate(), ConfigError);
}

TEST(Boundary, EmptyMaskHasNoBoundary) { EXPECT_TRUE(boundary_pixels(BinaryMask(6, 7, 0)).empty()); }

TEST(Boundary, FullMaskHasNoBoundary) { EXPECT_TRUE(boundary_pixels(BinaryMask(6, 7, 1)).empty()); }

TEST(Boundary, SinglePixel) {
  BinaryMask m(3, 3, 0);
  m(1, 1) = 1;
  EXPECT_EQ(boundary_pixels(m), (std::vector<Pixel>{{1, 1}}));
}

TEST(Boundary, SquarePerimeter) {
  BinaryMask m(5, 5, 0);
  for (int y = 1; y <= 3; ++y) {
    for (int x = 1; x <= 3; ++x) m(y, x) = 1;
  }
  const auto b = boundary_pixels(m);
  EXPECT_EQ(b.size(), 8u);
  EXPECT_EQ(std::count(b.begin(), b.end(), Pixel{2, 2}), 0);
}

TEST(Boundary, ImageEdgeIsNotBoundary) {
  BinaryMask m(4, 4, 0);
  for (int y = 0; y < 4; ++y) m(y, 0) = m(y, 1) = 1;
  // Column 0 touches only the image border and column 1; column 1 touches background.
  const auto b = boundary_pixels(m);
  for (const auto& p : b) EXPECT_EQ(p.x, 1);
  EXPECT_EQ(b.size(), 4u);
}

TEST(Boundary, MatchesOracle) {
  std::mt19937_64 rng(21);
  for (int i = 0; i < 50; ++i) {
    const auto m = random_mask(1 + static_cast<int>(rng() % 20), 1 + static_cast<int>(rng() % 20), rng);
    const auto b = boundary_pixels(m);
    const auto o = oracle::boundary(m);
    EXPECT_EQ(std::set<Pixel>(b.begin(), b.end()), o);
  }
}

TEST(SquaredDistanceTransform, MatchesBruteForce) {
  std::mt19937_64 rng(8);
  for (int i = 0; i < 40; ++i) {
    const int h = 1 + static_cast<int>(rng() % 24), w = 1 + static_cast<int>(rng() % 24);
    const auto f = random_mask(h, w, rng);
    const auto d = squared_distance_transform(f);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        double best = kNoFeature;
        for (int qy = 0; qy < h; ++qy) {
          for (int qx = 0; qx < w; ++qx) {
            if (f(qy, qx)) best = std::min(best, static_cast<double>((qy - y) * (qy - y) + (qx - x) * (qx - x)));
          }
        }
        ASSERT_EQ(d(y, x), best) << "at " << y << "," << x;
      }
    }
  }
}

TEST(SignedDistance, ConstantFieldsForDegenerateMasks) {
  const auto empty = signed_distance(BinaryMask(5, 6, 0), 20);
  for (double v : empty.values.values()) EXPECT_EQ(v, -20.0);
  const auto full = signed_distance(BinaryMask(5, 6, 1), 20);
  for (double v : full.values.values()) EXPECT_EQ(v, 20.0);
}

TEST(SignedDistance, SinglePixelExample) {
  BinaryMask m(7, 7, 0);
  m(3, 3) = 1;
  const auto f = signed_distance(m, 3).values;
  EXPECT_EQ(f(3, 3), 0.0);
  EXPECT_EQ(f(2, 3), -1.0);
  EXPECT_EQ(f(3, 4), -1.0);
  EXPECT_DOUBLE_EQ(f(2, 2), -std::sqrt(2.0));
  EXPECT_EQ(f(0, 0), -3.0);
  EXPECT_EQ(f(3, 0), -3.0);
  for (double v : f.values()) EXPECT_LE(std::abs(v), 3.0);
}

TEST(SignedDistance, RejectsBadRadius) { EXPECT_THROW(signed_distance(BinaryMask(2, 2), 0), ConfigError); }

TEST(Quantize, SaturationAndMismatch) {
  const DistanceConfig cfg{20, 10};
  SignedDistanceField neg{Grid<double>(3, 3, -20.0), 20}, pos{Grid<double>(3, 3, 20.0), 20};
  const auto low = quantize(neg, cfg), high = quantize(pos, cfg);
  for (int c : low.classes.values()) EXPECT_EQ(c, 0);
  for (int c : high.classes.values()) EXPECT_EQ(c, 2 * cfg.bins() + 1);
  SignedDistanceField other{Grid<double>(3, 3, 0.0), 10};
  EXPECT_THROW(quantize(other, cfg), ConfigError);
}

TEST(Quantize, BinEdgesAreHalfOpen) {
  const DistanceConfig cfg{20, 10};  // b = 2, K = 6
  EXPECT_EQ(distance_class(0.0, cfg), 3);
  EXPECT_EQ(distance_class(9.999, cfg), 3);
  EXPECT_EQ(distance_class(10.0, cfg), 4);
  EXPECT_EQ(distance_class(19.999, cfg), 4);
  EXPECT_EQ(distance_class(20.0, cfg), 5);
  EXPECT_EQ(distance_class(-0.5, cfg), 2);
  EXPECT_EQ(distance_class(-10.0, cfg), 1);
  EXPECT_EQ(distance_class(-20.0, cfg), 0);
  // R not a multiple of s: the remainder joins the last bin.
  const DistanceConfig odd{7, 3};  // b = 2
  EXPECT_EQ(distance_class(6.5, odd), 4);
  EXPECT_EQ(distance_class(-6.5, odd), 1);
  EXPECT_EQ(distance_class(7.0, odd), 5);
}

TEST(Quantize, MonotoneInSignedDistance) {
  for (const DistanceConfig cfg : {DistanceConfig{20, 1}, DistanceConfig{20, 10}, DistanceConfig{10, 1},
                                   DistanceConfig{7, 3}}) {
    int prev = distance_class(-100.0, cfg);
    for (double d = -25.0; d <= 25.0; d += 0.0625) {
      const int c = distance_class(d, cfg);
      EXPECT_GE(c, prev);
      EXPECT_GE(c, 0);
      EXPECT_LT(c, cfg.class_count());
      prev = c;
    }
  }
}

class EncodeOracle : public ::testing::TestWithParam<DistanceConfig> {};

INSTANTIATE_TEST_SUITE_P(Configs, EncodeOracle,
                         ::testing::Values(DistanceConfig{20, 1}, DistanceConfig{20, 10}, DistanceConfig{10, 1},
                                           DistanceConfig{3, 2}, DistanceConfig{1, 1}));

TEST_P(EncodeOracle, MatchesAllPairsBruteForce) {
  const auto cfg = GetParam();
  std::mt19937_64 rng(cfg.border_pixels * 31 + cfg.bin_size);
  for (int i = 0; i < 25; ++i) {
    const auto m = random_mask(1 + static_cast<int>(rng() % 32), 1 + static_cast<int>(rng() % 32), rng);
    EXPECT_EQ(encode_distance_classes(m, cfg).classes, oracle::distance_classes(m, cfg.border_pixels, cfg.bin_size));
  }
}

TEST_P(EncodeOracle, RoundTrip) {
  const auto cfg = GetParam();
  std::mt19937_64 rng(cfg.bin_size * 7 + 1);
  for (int i = 0; i < 100; ++i) {
    const auto m = random_mask(1 + static_cast<int>(rng() % 40), 1 + static_cast<int>(rng() % 40), rng);
    EXPECT_EQ(decode_to_binary(encode_distance_classes(m, cfg)), m);
  }
}

TEST_P(EncodeOracle, FlipEquivariant) {
  const auto cfg = GetParam();
  std::mt19937_64 rng(17);
  for (int i = 0; i < 20; ++i) {
    const auto m = random_mask(1 + static_cast<int>(rng() % 30), 1 + static_cast<int>(rng() % 30), rng);
    EXPECT_EQ(encode_distance_classes(flip_horizontal(m), cfg).classes,
              flip_horizontal(encode_distance_classes(m, cfg).classes));
  }
}

TEST(Encode, SmallObjectHasNoInsideSaturation) {
  BinaryMask m(64, 64, 0);
  for (int y = 20; y < 30; ++y) {
    for (int x = 20; x < 30; ++x) m(y, x) = 1;
  }
  const DistanceConfig cfg{20, 1};
  const auto c = encode_distance_classes(m, cfg).classes;
  EXPECT_EQ(std::count(c.values().begin(), c.values().end(), cfg.class_count() - 1), 0);
}

TEST(Decode, AllClassZeroIsBackgroundAndRangeChecked) {
  DistanceClassMap map{Grid<int>(4, 4, 0), {20, 10}};
  EXPECT_EQ(count_foreground(decode_to_binary(map)), 0u);
  map.classes(1, 1) = 6;
  EXPECT_THROW(decode_to_binary(map), DataError);
  map.classes(1, 1) = -1;
  EXPECT_THROW(decode_to_binary(map), DataError);
}

TEST(Merge, Examples) {
  const GridSize size{2, 3};
  std::vector<ProbabilityMap> one{ProbabilityMap(size, 0.9)};
  const auto all_one = merge_objects(one, size);
  for (int v : all_one.values()) EXPECT_EQ(v, 1);

  std::vector<ProbabilityMap> two{ProbabilityMap(size, 0.4), ProbabilityMap(size, 0.4)};
  const auto none = merge_objects(two, size);
  for (int v : none.values()) EXPECT_EQ(v, 0);
  two[0](0, 0) = 0.7;
  two[1](0, 0) = 0.6;
  two[1](1, 2) = 0.8;
  two[0](1, 1) = two[1](1, 1) = 0.55;
  const auto l = merge_objects(two, size);
  EXPECT_EQ(l(0, 0), 1);
  EXPECT_EQ(l(1, 2), 2);
  EXPECT_EQ(l(1, 1), 1);  // tie goes to the lower index

  const auto empty = merge_objects({}, size);
  for (int v : empty.values()) EXPECT_EQ(v, 0);
  std::vector<ProbabilityMap> bad{ProbabilityMap(2, 2, 0.5)};
  EXPECT_THROW(merge_objects(bad, size), DataError);
}

TEST(Merge, PermutingObjectsPermutesLabels) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0, 1);
  const GridSize size{5, 6};
  std::vector<ProbabilityMap> maps(3, ProbabilityMap(size));
  for (auto& m : maps) {
    for (auto& v : m.values()) v = u(rng);
  }
  const auto base = merge_objects(maps, size);
  const std::vector<int> perm{2, 0, 1};
  std::vector<ProbabilityMap> permuted;
  for (int p : perm) permuted.push_back(maps[p]);
  const auto out = merge_objects(permuted, size);
  for (std::size_t i = 0; i < out.area(); ++i) {
    if (base[i] == 0) {
      EXPECT_EQ(out[i], 0);
    } else {
      EXPECT_EQ(perm[out[i] - 1], base[i] - 1);
    }
  }
}

}  // namespace
}  // namespace vosmem
