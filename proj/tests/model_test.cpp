#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <limits>

#include "gradcheck.hpp"
#include "test_util.hpp"
#include "vosmem/model.hpp"

namespace vosmem {
namespace {

ModelConfig small_config(int skip_levels = 2) {
  ModelConfig c = gradcheck::tiny_config(64);
  c.input_width = 96;
  c.skip_memory_levels = skip_levels;
  return c;
}

SequenceSample small_sequence(int length, std::uint64_t seed = 1) {
  GeneratorConfig g;
  g.min_length = g.max_length = length;
  g.min_objects = g.max_objects = 2;
  g.seed = seed;
  return generate_sequence(g);
}

template <typename T>
void zero_all(Network<T>& net) {
  for (auto& p : net.parameters()) p.var->value.fill(T{0});
}

TEST(ModelConfig, Validation) {
  ModelConfig c = small_config();
  EXPECT_NO_THROW(c.validate());
  c.input_height = 48;
  EXPECT_THROW(c.validate(), ConfigError);
  c = small_config();
  c.skip_memory_levels = 3;
  EXPECT_THROW(c.validate(), ConfigError);
  c = small_config();
  c.rnn_kernel_sizes = {3, 4, 5};
  EXPECT_THROW(c.validate(), ConfigError);
  c = small_config();
  c.decoder_channels.pop_back();
  EXPECT_THROW(c.validate(), ConfigError);
  EXPECT_THROW(Network<float>(c, 0), ConfigError);
}

TEST(ModelConfig, FullSizeDefaultsAndScaling) {
  const ModelConfig c;
  EXPECT_EQ(c.bottleneck_channels, 512);
  EXPECT_EQ(c.rnn_kernel_sizes, (std::vector<int>{3, 3, 5}));
  EXPECT_EQ(c.skip_memory_channels, (std::vector<int>{512, 256}));
  EXPECT_EQ(c.decoder_channels, (std::vector<int>{512, 256, 128, 64, 64}));
  EXPECT_EQ(c.distance_class_count, 42);
  ModelConfig s = c;
  s.scale_factor = 0.0625;
  EXPECT_EQ(s.encoder_width(0), 4);
  EXPECT_EQ(s.memory_width(2), 16);
  s.scale_factor = 0.001;
  EXPECT_EQ(s.decoder_width(4), 1);
}

TEST(ModelConfig, JsonRoundTrip) {
  ModelConfig c = small_config(1);
  c.scale_factor = 0.25;
  c.distance_merge = DistanceMerge::kNone;
  const nlohmann::json j = c;
  EXPECT_EQ(j.get<ModelConfig>(), c);
}

TEST(Network, ShapeTrace) {
  const auto c = small_config();
  Network<float> net(c, 3);
  const auto s = small_sequence(3);
  const auto states = net.initialize_states(s.frames[0], object_mask(s.masks[0], s.object_ids[0]));
  ASSERT_EQ(states.size(), 3u);
  EXPECT_EQ(states[0].h->value.shape(), (Shape{c.memory_width(0), 2, 3}));
  EXPECT_EQ(states[1].h->value.shape(), (Shape{c.memory_width(1), 4, 6}));
  EXPECT_EQ(states[2].c->value.shape(), (Shape{c.memory_width(2), 8, 12}));

  const auto pyr = net.encode(s.frames[1]);
  EXPECT_EQ(pyr.bottleneck->value.shape(), (Shape{c.encoder_width(4), 2, 3}));
  ASSERT_EQ(pyr.skips.size(), 4u);
  EXPECT_EQ(pyr.skips[0]->value.shape(), (Shape{c.encoder_width(3), 4, 6}));
  EXPECT_EQ(pyr.skips[3]->value.shape(), (Shape{c.encoder_width(0), 32, 48}));

  const auto preds = net.forward_sequence(s.frames, object_mask(s.masks[0], s.object_ids[0]));
  ASSERT_EQ(preds.size(), 2u);
  for (const auto& p : preds) {
    EXPECT_EQ(p.seg_prob->value.shape(), (Shape{1, 64, 96}));
    EXPECT_EQ(p.dist_logits->value.shape(), (Shape{c.distance_class_count, 64, 96}));
    for (float v : p.seg_prob->value.values()) {
      EXPECT_GT(v, 0.0f);
      EXPECT_LT(v, 1.0f);
    }
    for (int y = 0; y < 64; y += 7) {
      for (int x = 0; x < 96; x += 11) {
        double sum = 0;
        for (int k = 0; k < c.distance_class_count; ++k) sum += p.dist_prob->value.at(k, y, x);
        EXPECT_NEAR(sum, 1.0, 1e-6);
      }
    }
  }
}

TEST(Network, TwoFramesGiveOnePrediction) {
  Network<float> net(small_config(0), 1);
  const auto s = small_sequence(2);
  EXPECT_EQ(net.forward_sequence(s.frames, object_mask(s.masks[0], s.object_ids[0])).size(), 1u);
  const std::vector<RgbImage> one{s.frames[0]};
  EXPECT_THROW(net.forward_sequence(one, object_mask(s.masks[0], 1)), DataError);
}

TEST(Network, RejectsWrongInputSizes) {
  Network<float> net(small_config(), 1);
  EXPECT_THROW(net.encode(RgbImage(32, 96)), ConfigError);
  const auto s = small_sequence(2);
  EXPECT_THROW(net.initialize_states(s.frames[0], BinaryMask(64, 64)), ConfigError);
}

TEST(Network, ZeroWeightsGiveZeroStatesAndFeatures) {
  Network<double> net(small_config(), 5);
  zero_all(net);
  const auto states = net.initialize_states(RgbImage(64, 96), BinaryMask(64, 96));
  for (const auto& s : states) {
    for (double v : s.h->value.values()) EXPECT_EQ(v, 0.0);
    for (double v : s.c->value.values()) EXPECT_EQ(v, 0.0);
  }
  const auto pyr = net.encode(RgbImage(64, 96));
  for (double v : pyr.bottleneck->value.values()) EXPECT_EQ(v, 0.0);
  // Zero input, state and weights: gates at one half, candidate zero.
  const auto next = net.conv_lstm_step(states[0], pyr.bottleneck, 0);
  for (double v : next.h->value.values()) EXPECT_EQ(v, 0.0);
  for (double v : next.c->value.values()) EXPECT_EQ(v, 0.0);
}

TEST(Network, ScalarConvLstmMatchesClosedForm) {
  ModelConfig c = small_config(0);
  c.input_height = c.input_width = 32;
  c.encoder_channels = {1, 1, 1, 1, 1};
  c.bottleneck_channels = 1;
  Network<double> net(c, 0);
  // Gate rows i, f, o, g; columns (input, h) at the centre tap of a 3x3 kernel.
  const double wx[4] = {0.5, -0.3, 0.8, 1.2};
  const double wh[4] = {-0.7, 0.4, 0.2, -0.9};
  const double b[4] = {0.1, 1.0, -0.2, 0.05};
  auto w = net.parameter("memory.0.weight");
  auto bias = net.parameter("memory.0.bias");
  w->value.fill(0.0);
  for (int g = 0; g < 4; ++g) {
    w->value[g * 18 + 4] = wx[g];
    w->value[g * 18 + 9 + 4] = wh[g];
    bias->value[g] = b[g];
  }
  const double x = 0.6, h0 = -0.25, c0 = 0.4;
  ConvLstmState<double> st{autograd::constant(Tensor<double>(1, 1, 1, h0)),
                           autograd::constant(Tensor<double>(1, 1, 1, c0))};
  const auto next = net.conv_lstm_step(st, autograd::constant(Tensor<double>(1, 1, 1, x)), 0);
  auto sig = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
  const double i = sig(wx[0] * x + wh[0] * h0 + b[0]);
  const double f = sig(wx[1] * x + wh[1] * h0 + b[1]);
  const double o = sig(wx[2] * x + wh[2] * h0 + b[2]);
  const double g = std::tanh(wx[3] * x + wh[3] * h0 + b[3]);
  const double c1 = f * c0 + i * g;
  EXPECT_NEAR(next.c->value[0], c1, 1e-14);
  EXPECT_NEAR(next.h->value[0], o * std::tanh(c1), 1e-14);
}

TEST(Network, HiddenStatesStayBounded) {
  Network<float> net(small_config(), 9);
  std::mt19937_64 rng(2);
  const auto states = net.initialize_states(small_sequence(2).frames[0], BinaryMask(64, 96, 1));
  for (int level = 0; level < 3; ++level) {
    ConvLstmState<float> st = states[level];
    const int width = net.config().encoder_width(4 - level);
    for (int step = 0; step < 4; ++step) {
      const auto input = autograd::constant(
          testing::random_tensor<float>({width, st.h->value.height(), st.h->value.width()}, rng, -50, 50));
      st = net.conv_lstm_step(st, input, level);
      for (float v : st.h->value.values()) EXPECT_LE(std::abs(v), 1.0f);
    }
  }
}

TEST(Network, DeterministicForSeedAndReplay) {
  const auto c = small_config();
  Network<float> a(c, 11), b(c, 11), d(c, 12);
  ASSERT_EQ(a.parameters().size(), b.parameters().size());
  bool any_diff = false;
  for (std::size_t i = 0; i < a.parameters().size(); ++i) {
    EXPECT_EQ(a.parameters()[i].var->value, b.parameters()[i].var->value);
    any_diff = any_diff || a.parameters()[i].var->value != d.parameters()[i].var->value;
  }
  EXPECT_TRUE(any_diff);
  const auto s = small_sequence(3);
  const auto m = object_mask(s.masks[0], s.object_ids[0]);
  const auto p1 = a.forward_sequence(s.frames, m), p2 = a.forward_sequence(s.frames, m);
  for (std::size_t t = 0; t < p1.size(); ++t) {
    EXPECT_EQ(p1[t].seg_prob->value, p2[t].seg_prob->value);
    EXPECT_EQ(p1[t].dist_logits->value, p2[t].dist_logits->value);
  }
}

TEST(Network, LaterPredictionsDependOnEarlierFrames) {
  Network<float> net(small_config(), 4);
  auto s = small_sequence(3);
  const auto m = object_mask(s.masks[0], s.object_ids[0]);
  const auto before = net.forward_sequence(s.frames, m);
  for (auto& v : s.frames[1].bytes()) v = static_cast<std::uint8_t>(255 - v);
  const auto after = net.forward_sequence(s.frames, m);
  EXPECT_NE(before[1].seg_prob->value, after[1].seg_prob->value);
}

TEST(Network, FirstMaskInfluencesPredictions) {
  Network<float> net(small_config(), 4);
  const auto s = small_sequence(2);
  const auto a = net.forward_sequence(s.frames, BinaryMask(64, 96, 0));
  const auto b = net.forward_sequence(s.frames, object_mask(s.masks[0], s.object_ids[0]));
  EXPECT_NE(a[0].seg_prob->value, b[0].seg_prob->value);
}

// Silencing a skip-memory branch through its merge weight reproduces the
// network built without that branch, bit for bit.
class SkipContinuity : public ::testing::TestWithParam<int> {};
INSTANTIATE_TEST_SUITE_P(Levels, SkipContinuity, ::testing::Values(1, 2));

TEST_P(SkipContinuity, ZeroMergeWeightMatchesSmallerModel) {
  const int levels = GetParam();
  Network<float> with(small_config(levels), 21), without(small_config(levels - 1), 22);
  with.copy_matching_from(without);
  auto logits = with.parameter("merge." + std::to_string(levels - 1) + ".branch_logits");
  logits->value[2] = -std::numeric_limits<float>::infinity();
  const auto s = small_sequence(3);
  const auto m = object_mask(s.masks[0], s.object_ids[0]);
  const auto a = with.forward_sequence(s.frames, m), b = without.forward_sequence(s.frames, m);
  for (std::size_t t = 0; t < a.size(); ++t) {
    EXPECT_EQ(a[t].seg_prob->value, b[t].seg_prob->value);
    EXPECT_EQ(a[t].dist_logits->value, b[t].dist_logits->value);
  }
}

TEST(Network, ParameterFileRoundTrip) {
  testing::TempDir dir("params");
  Network<float> a(small_config(), 1), b(small_config(), 2);
  a.save_parameters(dir / "p.bin");
  b.load_parameters(dir / "p.bin");
  for (std::size_t i = 0; i < a.parameters().size(); ++i) {
    EXPECT_EQ(a.parameters()[i].var->value, b.parameters()[i].var->value);
  }
  Network<float> other(small_config(1), 1);
  EXPECT_THROW(other.load_parameters(dir / "p.bin"), ConfigError);
  EXPECT_THROW(b.load_parameters(dir / "missing.bin"), ConfigError);
  std::ofstream(dir / "junk.bin") << "not a parameter file";
  EXPECT_THROW(b.load_parameters(dir / "junk.bin"), DataError);
}

TEST(Network, UnknownParameterName) {
  Network<float> net(small_config(), 1);
  EXPECT_THROW(net.parameter("nope"), ConfigError);
  EXPECT_GT(net.parameter_count(), 1000u);
}

TEST(GradientCheck, SampledElementsMatchFiniteDifferences) {
  gradcheck::Options o;
  o.per_tensor = 4;
  const auto results = gradcheck::run(o);
  EXPECT_GT(results.size(), 50u);
  for (const auto& r : results) {
    EXPECT_GT(r.checked, 0u) << r.name;
    EXPECT_LE(r.max_relative_error, 1e-4) << r.name;
  }
}

}  // namespace
}  // namespace vosmem
