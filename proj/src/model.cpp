#include "vosmem/model.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

namespace vosmem {

using autograd::Var;

namespace {

constexpr int kStages = 5;
constexpr int kSkipLevels = 4;
constexpr char kParamMagic[8] = {'V', 'O', 'S', 'M', 'P', 'R', 'M', '1'};

bool odd_positive(int k) { return k >= 1 && k % 2 == 1; }

}  // namespace

int ModelConfig::scaled(int nominal) const {
  return std::max(1, static_cast<int>(std::lround(nominal * scale_factor)));
}

int ModelConfig::memory_width(int level) const {
  return level == 0 ? scaled(bottleneck_channels) : scaled(skip_memory_channels.at(level - 1));
}

void ModelConfig::validate() const {
  const int stride = 1 << kStages;
  if (input_height <= 0 || input_width <= 0 || input_height % stride != 0 || input_width % stride != 0) {
    throw ConfigError("input size " + std::to_string(input_height) + "x" + std::to_string(input_width) +
                      " must be positive multiples of 32");
  }
  if (encoder_channels.size() != kStages) throw ConfigError("encoder_channels needs exactly 5 widths");
  if (decoder_channels.size() != kStages) throw ConfigError("decoder_channels needs exactly 5 widths");
  if (skip_memory_levels < 0 || skip_memory_levels > 2) throw ConfigError("skip_memory_levels must be 0, 1 or 2");
  if (rnn_kernel_sizes.size() != 3) throw ConfigError("rnn_kernel_sizes needs 3 entries (bottleneck, level 1, level 2)");
  if (skip_memory_channels.size() != 2) throw ConfigError("skip_memory_channels needs 2 entries");
  for (int k : rnn_kernel_sizes) {
    if (!odd_positive(k)) throw ConfigError("rnn kernel sizes must be odd");
  }
  if (!odd_positive(encoder_kernel) || !odd_positive(decoder_kernel)) throw ConfigError("conv kernels must be odd");
  for (int c : encoder_channels) {
    if (c <= 0) throw ConfigError("encoder widths must be positive");
  }
  for (int c : decoder_channels) {
    if (c <= 0) throw ConfigError("decoder widths must be positive");
  }
  if (bottleneck_channels <= 0) throw ConfigError("bottleneck_channels must be positive");
  if (distance_class_count < 2) throw ConfigError("distance_class_count must be >= 2");
  if (!(scale_factor > 0.0)) throw ConfigError("scale_factor must be positive");
}

void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = nlohmann::json{{"input_height", c.input_height},
                     {"input_width", c.input_width},
                     {"encoder_channels", c.encoder_channels},
                     {"bottleneck_channels", c.bottleneck_channels},
                     {"skip_memory_levels", c.skip_memory_levels},
                     {"rnn_kernel_sizes", c.rnn_kernel_sizes},
                     {"skip_memory_channels", c.skip_memory_channels},
                     {"decoder_channels", c.decoder_channels},
                     {"distance_class_count", c.distance_class_count},
                     {"scale_factor", c.scale_factor},
                     {"encoder_kernel", c.encoder_kernel},
                     {"decoder_kernel", c.decoder_kernel},
                     {"distance_merge", c.distance_merge == DistanceMerge::kConcat ? "concat" : "none"}};
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
  c.input_height = j.value("input_height", c.input_height);
  c.input_width = j.value("input_width", c.input_width);
  c.encoder_channels = j.value("encoder_channels", c.encoder_channels);
  c.bottleneck_channels = j.value("bottleneck_channels", c.bottleneck_channels);
  c.skip_memory_levels = j.value("skip_memory_levels", c.skip_memory_levels);
  c.rnn_kernel_sizes = j.value("rnn_kernel_sizes", c.rnn_kernel_sizes);
  c.skip_memory_channels = j.value("skip_memory_channels", c.skip_memory_channels);
  c.decoder_channels = j.value("decoder_channels", c.decoder_channels);
  c.distance_class_count = j.value("distance_class_count", c.distance_class_count);
  c.scale_factor = j.value("scale_factor", c.scale_factor);
  c.encoder_kernel = j.value("encoder_kernel", c.encoder_kernel);
  c.decoder_kernel = j.value("decoder_kernel", c.decoder_kernel);
  const std::string merge = j.value("distance_merge", std::string("concat"));
  if (merge == "concat") {
    c.distance_merge = DistanceMerge::kConcat;
  } else if (merge == "none") {
    c.distance_merge = DistanceMerge::kNone;
  } else {
    throw ConfigError("distance_merge must be 'concat' or 'none', got '" + merge + "'");
  }
}

template <typename T>
Tensor<T> image_tensor(const RgbImage& image) {
  Tensor<T> t(3, image.height(), image.width());
  for (int y = 0; y < image.height(); ++y) {
    for (int x = 0; x < image.width(); ++x) {
      for (int c = 0; c < 3; ++c) t.at(c, y, x) = static_cast<T>(image.at(y, x, c) / 255.0 - 0.5);
    }
  }
  return t;
}

template <typename T>
ProbabilityMap FramePrediction<T>::probability_map() const {
  const auto& v = seg_prob->value;
  ProbabilityMap map(v.height(), v.width());
  for (std::size_t i = 0; i < map.area(); ++i) map[i] = static_cast<double>(v[i]);
  return map;
}

template <typename T>
Network<T>::Network(ModelConfig config, std::uint64_t seed) : config_(std::move(config)) {
  config_.validate();
  std::mt19937_64 rng(seed);
  const auto& c = config_;

  int in = 3;
  for (int s = 0; s < kStages; ++s) {
    encoder_.push_back(make_conv(rng, "encoder." + std::to_string(s), in, c.encoder_width(s), c.encoder_kernel));
    in = c.encoder_width(s);
  }
  in = 4;
  for (int s = 0; s < kStages; ++s) {
    initializer_.push_back(
        make_conv(rng, "initializer." + std::to_string(s), in, c.encoder_width(s), c.encoder_kernel));
    in = c.encoder_width(s);
  }
  const int init_feat = c.encoder_width(kStages - 1);
  init_h_ = make_conv(rng, "init_state.0.h", init_feat, c.memory_width(0), 1);
  init_c_ = make_conv(rng, "init_state.0.c", init_feat, c.memory_width(0), 1);
  in = init_feat;
  for (int level = 1; level <= c.skip_memory_levels; ++level) {
    const std::string tag = std::to_string(level);
    init_up_.push_back(make_conv(rng, "init_up." + tag, in, c.memory_width(level), c.decoder_kernel));
    init_level_h_.push_back(make_conv(rng, "init_state." + tag + ".h", c.memory_width(level), c.memory_width(level), 1));
    init_level_c_.push_back(make_conv(rng, "init_state." + tag + ".c", c.memory_width(level), c.memory_width(level), 1));
    in = c.memory_width(level);
  }

  for (int level = 0; level < c.memory_levels(); ++level) {
    // Level 0 reads the bottleneck feature, level l >= 1 the encoder output
    // at 1/2^(5-l).
    const int input_width = c.encoder_width(kStages - 1 - level);
    const int hidden = c.memory_width(level);
    Conv gates = make_conv(rng, "memory." + std::to_string(level), input_width + hidden, 4 * hidden,
                           c.memory_kernel(level));
    // Forget-gate bias starts at 1.
    for (int ch = hidden; ch < 2 * hidden; ++ch) gates.bias->value[ch] = T{1};
    memory_.push_back(gates);
  }

  in = c.memory_width(0);
  for (int s = 0; s < kStages; ++s) {
    decoder_.push_back(make_conv(rng, "decoder." + std::to_string(s), in, c.decoder_width(s), c.decoder_kernel));
    in = c.decoder_width(s);
    if (s < kSkipLevels) {
      const int level = s + 1;
      const bool with_memory = level <= c.skip_memory_levels;
      const int skip_width = c.encoder_width(kStages - 2 - s);
      const int merged_in = c.decoder_width(s) + skip_width + (with_memory ? c.memory_width(level) : 0);
      merge_.push_back(make_conv(rng, "merge." + std::to_string(s), merged_in, c.decoder_width(s), 1));
      const int branches = with_memory ? 3 : 2;
      auto logits = autograd::parameter<T>(Tensor<T>(1, branches, 1));
      params_.push_back({"merge." + std::to_string(s) + ".branch_logits", logits});
      merge_logits_.push_back(logits);
    }
  }
  const int last = c.decoder_width(kStages - 1);
  dist_head_ = make_conv(rng, "dist_head", last, c.distance_class_count, 1);
  const int seg_in = last + (c.distance_merge == DistanceMerge::kConcat ? c.distance_class_count : 0);
  seg_head_ = make_conv(rng, "seg_head", seg_in, 1, 1);
}

template <typename T>
typename Network<T>::Conv Network<T>::make_conv(std::mt19937_64& rng, const std::string& name, int in, int out,
                                                int kernel, double bias_init) {
  // Xavier/Glorot uniform.
  const double fan_in = static_cast<double>(in) * kernel * kernel;
  const double fan_out = static_cast<double>(out) * kernel * kernel;
  const double limit = std::sqrt(6.0 / (fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  Tensor<T> w(out, in * kernel * kernel, 1);
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = static_cast<T>(dist(rng));
  Conv conv{autograd::parameter<T>(std::move(w)), autograd::parameter<T>(Tensor<T>(out, 1, 1, static_cast<T>(bias_init))),
            kernel};
  params_.push_back({name + ".weight", conv.weight});
  params_.push_back({name + ".bias", conv.bias});
  return conv;
}

template <typename T>
Var<T> Network<T>::apply(const Conv& conv, const Var<T>& x) const {
  return autograd::conv2d<T>(x, conv.weight, conv.bias, conv.kernel);
}

template <typename T>
Var<T> Network<T>::image_input(const RgbImage& frame) const {
  if (frame.height() != config_.input_height || frame.width() != config_.input_width) {
    throw ConfigError("frame size " + std::to_string(frame.height()) + "x" + std::to_string(frame.width()) +
                      " does not match configured input " + std::to_string(config_.input_height) + "x" +
                      std::to_string(config_.input_width));
  }
  return autograd::constant<T>(image_tensor<T>(frame));
}

template <typename T>
FeaturePyramid<T> Network<T>::run_encoder(const std::vector<Conv>& stages, const Var<T>& input) const {
  std::vector<Var<T>> outputs;
  Var<T> x = input;
  for (const auto& stage : stages) {
    x = autograd::maxpool2<T>(autograd::relu<T>(apply(stage, x)));
    outputs.push_back(x);
  }
  FeaturePyramid<T> pyramid;
  pyramid.bottleneck = outputs.back();
  for (int k = kStages - 2; k >= 0; --k) pyramid.skips.push_back(outputs[k]);
  return pyramid;
}

template <typename T>
FeaturePyramid<T> Network<T>::encode(const RgbImage& frame) const {
  return run_encoder(encoder_, image_input(frame));
}

template <typename T>
std::vector<ConvLstmState<T>> Network<T>::initialize_states(const RgbImage& first_frame,
                                                            const BinaryMask& first_mask) const {
  if (first_mask.size() != first_frame.size()) {
    throw ConfigError("first mask " + std::to_string(first_mask.height()) + "x" + std::to_string(first_mask.width()) +
                      " does not match frame " + std::to_string(first_frame.height()) + "x" +
                      std::to_string(first_frame.width()));
  }
  Var<T> rgb = image_input(first_frame);
  Tensor<T> input(4, first_frame.height(), first_frame.width());
  std::copy(rgb->value.data(), rgb->value.data() + rgb->value.size(), input.data());
  T* mask_plane = input.channel(3);
  for (std::size_t i = 0; i < first_mask.area(); ++i) mask_plane[i] = first_mask[i] ? T{1} : T{0};

  const Var<T> features = run_encoder(initializer_, autograd::constant<T>(std::move(input))).bottleneck;
  std::vector<ConvLstmState<T>> states;
  states.push_back({autograd::tanh<T>(apply(init_h_, features)), apply(init_c_, features)});
  Var<T> g = features;
  for (int level = 1; level <= config_.skip_memory_levels; ++level) {
    g = autograd::relu<T>(apply(init_up_[level - 1], autograd::upsample2<T>(g)));
    states.push_back({autograd::tanh<T>(apply(init_level_h_[level - 1], g)), apply(init_level_c_[level - 1], g)});
  }
  return states;
}

template <typename T>
ConvLstmState<T> Network<T>::conv_lstm_step(const ConvLstmState<T>& state, const Var<T>& input, int level) const {
  if (level < 0 || level >= config_.memory_levels()) throw ConfigError("memory level out of range");
  const int hidden = config_.memory_width(level);
  const auto& hs = state.h->value.shape();
  if (state.c->value.shape() != hs || hs.channels != hidden || input->value.height() != hs.height ||
      input->value.width() != hs.width || input->value.channels() != config_.encoder_width(kStages - 1 - level)) {
    throw ConfigError("conv_lstm_step: input " + input->value.shape().str() + " / state " + hs.str() +
                      " inconsistent with memory level " + std::to_string(level));
  }
  const std::vector<Var<T>> parts{input, state.h};
  const Var<T> gates = apply(memory_[level], autograd::concat<T>(parts));
  const Var<T> i = autograd::sigmoid<T>(autograd::slice_channels<T>(gates, 0, hidden));
  const Var<T> f = autograd::sigmoid<T>(autograd::slice_channels<T>(gates, hidden, hidden));
  const Var<T> o = autograd::sigmoid<T>(autograd::slice_channels<T>(gates, 2 * hidden, hidden));
  const Var<T> g = autograd::tanh<T>(autograd::slice_channels<T>(gates, 3 * hidden, hidden));
  const Var<T> c = autograd::add<T>(autograd::mul<T>(f, state.c), autograd::mul<T>(i, g));
  const Var<T> h = autograd::mul<T>(o, autograd::tanh<T>(c));
  return {h, c};
}

template <typename T>
FramePrediction<T> Network<T>::decode(const Var<T>& bottleneck_h, std::span<const Var<T>> skips,
                                      std::span<const Var<T>> memory_h) const {
  if (skips.size() != kSkipLevels) throw ConfigError("decode: expected 4 skip features");
  if (memory_h.size() != static_cast<std::size_t>(config_.skip_memory_levels)) {
    throw ConfigError("decode: got " + std::to_string(memory_h.size()) + " skip-memory states, config has " +
                      std::to_string(config_.skip_memory_levels));
  }
  Var<T> x = bottleneck_h;
  for (int s = 0; s < kStages; ++s) {
    x = autograd::relu<T>(apply(decoder_[s], autograd::upsample2<T>(x)));
    if (s < kSkipLevels) {
      // Branch order: decoder, plain skip, skip memory. The memory branch is
      // last so that its channels come last in the 1x1 merge.
      const Var<T> weights = autograd::softmax_all<T>(merge_logits_[s]);
      std::vector<Var<T>> branches{autograd::scale_by<T>(x, weights, 0), autograd::scale_by<T>(skips[s], weights, 1)};
      if (s < config_.skip_memory_levels) branches.push_back(autograd::scale_by<T>(memory_h[s], weights, 2));
      x = autograd::relu<T>(apply(merge_[s], autograd::concat<T>(branches)));
    }
  }
  FramePrediction<T> out;
  out.dist_logits = apply(dist_head_, x);
  out.dist_prob = autograd::softmax_channels<T>(out.dist_logits);
  Var<T> seg_in = x;
  if (config_.distance_merge == DistanceMerge::kConcat) {
    const std::vector<Var<T>> parts{x, out.dist_prob};
    seg_in = autograd::concat<T>(parts);
  }
  out.seg_prob = autograd::sigmoid<T>(apply(seg_head_, seg_in));
  return out;
}

template <typename T>
std::vector<FramePrediction<T>> Network<T>::forward_sequence(std::span<const RgbImage> frames,
                                                             const BinaryMask& first_mask) const {
  if (frames.size() < 2) throw DataError("forward_sequence needs at least two frames");
  std::vector<ConvLstmState<T>> states = initialize_states(frames[0], first_mask);
  std::vector<FramePrediction<T>> predictions;
  for (std::size_t t = 1; t < frames.size(); ++t) {
    const FeaturePyramid<T> features = encode(frames[t]);
    states[0] = conv_lstm_step(states[0], features.bottleneck, 0);
    std::vector<Var<T>> memory_h;
    for (int level = 1; level <= config_.skip_memory_levels; ++level) {
      states[level] = conv_lstm_step(states[level], features.skips[level - 1], level);
      memory_h.push_back(states[level].h);
    }
    predictions.push_back(decode(states[0].h, features.skips, memory_h));
  }
  return predictions;
}

template <typename T>
Var<T> Network<T>::parameter(const std::string& name) const {
  for (const auto& p : params_) {
    if (p.name == name) return p.var;
  }
  throw ConfigError("no parameter named '" + name + "'");
}

template <typename T>
std::size_t Network<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.var->value.size();
  return n;
}

template <typename T>
void Network<T>::zero_grad() {
  for (auto& p : params_) p.var->grad = Tensor<T>();
}

namespace {

template <typename V>
void write_pod(std::ostream& out, V v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(V));
}

template <typename V>
V read_pod(std::istream& in) {
  V v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(V));
  if (!in) throw DataError("truncated parameter file");
  return v;
}

}  // namespace

template <typename T>
void Network<T>::save_parameters(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(kParamMagic, sizeof(kParamMagic));
  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(params_.size()));
  for (const auto& p : params_) {
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(p.name.size()));
    out.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    const Shape& s = p.var->value.shape();
    write_pod<std::int32_t>(out, s.channels);
    write_pod<std::int32_t>(out, s.height);
    write_pod<std::int32_t>(out, s.width);
    for (std::size_t i = 0; i < p.var->value.size(); ++i) write_pod<double>(out, static_cast<double>(p.var->value[i]));
  }
  if (!out) throw DataError("failed writing " + path.string());
}

template <typename T>
void Network<T>::load_parameters(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open parameter file " + path.string());
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kParamMagic, sizeof(magic)) != 0) throw DataError(path.string() + ": bad magic");
  const auto count = read_pod<std::uint32_t>(in);
  if (count != params_.size()) {
    throw ConfigError("parameter file holds " + std::to_string(count) + " tensors, model has " +
                      std::to_string(params_.size()));
  }
  for (auto& p : params_) {
    const auto len = read_pod<std::uint32_t>(in);
    std::string name(len, '\0');
    in.read(name.data(), len);
    Shape s;
    s.channels = read_pod<std::int32_t>(in);
    s.height = read_pod<std::int32_t>(in);
    s.width = read_pod<std::int32_t>(in);
    if (name != p.name || s != p.var->value.shape()) {
      throw ConfigError("parameter '" + name + "' " + s.str() + " does not match model '" + p.name + "' " +
                        p.var->value.shape().str());
    }
    for (std::size_t i = 0; i < p.var->value.size(); ++i) p.var->value[i] = static_cast<T>(read_pod<double>(in));
  }
}

template Tensor<float> image_tensor<float>(const RgbImage&);
template Tensor<double> image_tensor<double>(const RgbImage&);
template struct FramePrediction<float>;
template struct FramePrediction<double>;
template class Network<float>;
template class Network<double>;

}  // namespace vosmem
