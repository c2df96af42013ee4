#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vosmem/autograd.hpp"
#include "vosmem/grid.hpp"

namespace vosmem {

/// How distance-class probabilities feed the segmentation head.
enum class DistanceMerge {
  kConcat,  // concatenate with the last decoder feature, then 1x1 conv
  kNone,    // segmentation head sees only the decoder feature
};

/// Architecture hyper-parameters. Nominal widths are multiplied by
/// `scale_factor` (and rounded, minimum 1) to obtain the built widths.
struct ModelConfig {
  int input_height = 256;
  int input_width = 448;
  std::vector<int> encoder_channels{64, 128, 256, 512, 512};
  int bottleneck_channels = 512;
  /// Number of memory-equipped skip connections: 0, 1 (at 1/16) or 2 (also at 1/8).
  int skip_memory_levels = 2;
  /// Kernel sizes of the bottleneck memory and the two skip memories.
  std::vector<int> rnn_kernel_sizes{3, 3, 5};
  std::vector<int> skip_memory_channels{512, 256};
  std::vector<int> decoder_channels{512, 256, 128, 64, 64};
  int distance_class_count = 42;
  double scale_factor = 1.0;
  int encoder_kernel = 3;
  int decoder_kernel = 5;
  DistanceMerge distance_merge = DistanceMerge::kConcat;

  void validate() const;
  int scaled(int nominal) const;

  int encoder_width(int stage) const { return scaled(encoder_channels.at(stage)); }
  int decoder_width(int stage) const { return scaled(decoder_channels.at(stage)); }
  /// Hidden width of memory level 0 (bottleneck) or 1..2 (skip memories).
  int memory_width(int level) const;
  int memory_kernel(int level) const { return rnn_kernel_sizes.at(level); }
  int memory_levels() const { return 1 + skip_memory_levels; }

  bool operator==(const ModelConfig&) const = default;
};

void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);

/// Hidden and cell state of one convolutional LSTM.
template <typename T>
struct ConvLstmState {
  autograd::Var<T> h;
  autograd::Var<T> c;
};

/// Encoder outputs: the 1/32 bottleneck feature and the skip features at
/// 1/16, 1/8, 1/4 and 1/2 resolution (in that order).
template <typename T>
struct FeaturePyramid {
  autograd::Var<T> bottleneck;
  std::vector<autograd::Var<T>> skips;
};

template <typename T>
struct FramePrediction {
  autograd::Var<T> seg_prob;     // (1, H, W), sigmoid output
  autograd::Var<T> dist_logits;  // (K, H, W)
  autograd::Var<T> dist_prob;    // (K, H, W), softmax over K

  ProbabilityMap probability_map() const;
};

template <typename T>
struct NamedParameter {
  std::string name;
  autograd::Var<T> var;
};

/// The recurrent encoder-decoder: an initializer that turns (frame 0, mask 0)
/// into memory states, a shared frame encoder, a convolutional LSTM at the
/// bottleneck plus optional skip memories, and a decoder with a distance
/// classification head feeding the segmentation head.
template <typename T>
class Network {
 public:
  Network(ModelConfig config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }

  std::vector<ConvLstmState<T>> initialize_states(const RgbImage& first_frame, const BinaryMask& first_mask) const;
  FeaturePyramid<T> encode(const RgbImage& frame) const;
  ConvLstmState<T> conv_lstm_step(const ConvLstmState<T>& state, const autograd::Var<T>& input, int level) const;
  FramePrediction<T> decode(const autograd::Var<T>& bottleneck_h, std::span<const autograd::Var<T>> skips,
                            std::span<const autograd::Var<T>> memory_h) const;

  /// Predictions for frames 1..T-1 given all frames and the mask of frame 0.
  std::vector<FramePrediction<T>> forward_sequence(std::span<const RgbImage> frames,
                                                   const BinaryMask& first_mask) const;

  std::vector<NamedParameter<T>>& parameters() { return params_; }
  const std::vector<NamedParameter<T>>& parameters() const { return params_; }
  autograd::Var<T> parameter(const std::string& name) const;
  std::size_t parameter_count() const;
  void zero_grad();

  /// Binary parameter store: magic, count, then (name, shape, float64 data)
  /// records. Loading requires identical names and shapes.
  void save_parameters(const std::filesystem::path& path) const;
  void load_parameters(const std::filesystem::path& path);

  /// Copy values from another network wherever names match; for matching
  /// names with different shapes, copies the overlapping leading block of
  /// each output row.
  template <typename U>
  void copy_matching_from(const Network<U>& other);

 private:
  struct Conv {
    autograd::Var<T> weight;
    autograd::Var<T> bias;
    int kernel = 1;
  };

  Conv make_conv(std::mt19937_64& rng, const std::string& name, int in, int out, int kernel,
                 double bias_init = 0.0);
  autograd::Var<T> apply(const Conv& conv, const autograd::Var<T>& x) const;
  FeaturePyramid<T> run_encoder(const std::vector<Conv>& stages, const autograd::Var<T>& input) const;
  autograd::Var<T> image_input(const RgbImage& frame) const;

  ModelConfig config_;
  std::vector<NamedParameter<T>> params_;

  std::vector<Conv> encoder_;
  std::vector<Conv> initializer_;
  Conv init_h_, init_c_;
  std::vector<Conv> init_up_;
  std::vector<Conv> init_level_h_, init_level_c_;
  std::vector<Conv> memory_;
  std::vector<Conv> decoder_;
  std::vector<Conv> merge_;
  std::vector<autograd::Var<T>> merge_logits_;
  Conv dist_head_, seg_head_;
};

template <typename T>
template <typename U>
void Network<T>::copy_matching_from(const Network<U>& other) {
  for (auto& mine : params_) {
    for (const auto& theirs : other.parameters()) {
      if (theirs.name != mine.name) continue;
      auto& dst = mine.var->value;
      const auto& src = theirs.var->value;
      if (dst.shape() == src.shape()) {
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = static_cast<T>(src[i]);
      } else if (dst.channels() == src.channels()) {
        const std::size_t row = std::min<std::size_t>(dst.height(), src.height());
        for (int c = 0; c < dst.channels(); ++c) {
          for (std::size_t r = 0; r < row; ++r) dst.at(c, r, 0) = static_cast<T>(src.at(c, r, 0));
        }
      }
    }
  }
}

/// Image in [0, 255] mapped to (3, H, W) values in [-0.5, 0.5].
template <typename T>
Tensor<T> image_tensor(const RgbImage& image);

}  // namespace vosmem
