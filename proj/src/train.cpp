#include "vosmem/train.hpp"

#include <cmath>
#include <cstring>
#include <numeric>
#include <sstream>

#include "vosmem/error.hpp"

namespace vosmem {

namespace fs = std::filesystem;

namespace {

const char* reduction_name(Reduction r) { return r == Reduction::kSum ? "sum" : "mean"; }

Reduction parse_reduction(const std::string& s) {
  if (s == "sum") return Reduction::kSum;
  if (s == "mean") return Reduction::kMean;
  throw ConfigError("unknown reduction '" + s + "' (expected sum or mean)");
}

constexpr char kMomentMagic[8] = {'V', 'O', 'S', 'M', 'A', 'D', 'A', 'M'};

template <typename V>
void write_pod(std::ostream& out, V v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(V));
}

template <typename V>
V read_pod(std::istream& in) {
  V v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(V));
  if (!in) throw DataError("truncated optimizer state");
  return v;
}

nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + " is not valid JSON: " + e.what());
  }
}

void write_json(const fs::path& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << j.dump(2) << "\n";
}

}  // namespace

void to_json(nlohmann::json& j, const LossConfig& c) {
  j = nlohmann::json{{"lambda", c.lambda},
                     {"border_pixels", c.distance.border_pixels},
                     {"bin_size", c.distance.bin_size},
                     {"seg_reduction", reduction_name(c.seg_reduction)},
                     {"dist_reduction", reduction_name(c.dist_reduction)},
                     {"epsilon", c.epsilon}};
}

void from_json(const nlohmann::json& j, LossConfig& c) {
  c.lambda = j.value("lambda", c.lambda);
  c.distance.border_pixels = j.value("border_pixels", c.distance.border_pixels);
  c.distance.bin_size = j.value("bin_size", c.distance.bin_size);
  if (j.contains("seg_reduction")) c.seg_reduction = parse_reduction(j.at("seg_reduction").get<std::string>());
  if (j.contains("dist_reduction")) c.dist_reduction = parse_reduction(j.at("dist_reduction").get<std::string>());
  c.epsilon = j.value("epsilon", c.epsilon);
}

void to_json(nlohmann::json& j, const AugmentParams& p) {
  j = nlohmann::json{{"flip_probability", p.flip_probability},
                     {"max_rotation_degrees", p.max_rotation_degrees},
                     {"min_scale", p.min_scale},
                     {"max_scale", p.max_scale},
                     {"max_translation", p.max_translation}};
}

void from_json(const nlohmann::json& j, AugmentParams& p) {
  p.flip_probability = j.value("flip_probability", p.flip_probability);
  p.max_rotation_degrees = j.value("max_rotation_degrees", p.max_rotation_degrees);
  p.min_scale = j.value("min_scale", p.min_scale);
  p.max_scale = j.value("max_scale", p.max_scale);
  p.max_translation = j.value("max_translation", p.max_translation);
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0)) throw ConfigError("learning_rate must be positive");
  if (!(decay_factor > 0 && decay_factor <= 1)) throw ConfigError("decay_factor must lie in (0, 1]");
  if (decay_every_epochs < 1) throw ConfigError("decay_every_epochs must be positive");
  if (plateau_window < 1) throw ConfigError("plateau_window must be positive");
  if (!(plateau_threshold >= 0)) throw ConfigError("plateau_threshold must be non-negative");
  if (batch_size < 1) throw ConfigError("batch_size must be positive");
  if (min_length < 2 || max_length < min_length) throw ConfigError("sequence length range must satisfy 2 <= min <= max");
  if (max_iterations < 0) throw ConfigError("max_iterations must be non-negative");
  if (checkpoint_every < 0) throw ConfigError("checkpoint_every must be non-negative");
  if (!(grad_clip >= 0)) throw ConfigError("grad_clip must be non-negative");
  if (!(adam_beta1 >= 0 && adam_beta1 < 1 && adam_beta2 >= 0 && adam_beta2 < 1 && adam_epsilon > 0)) {
    throw ConfigError("Adam hyper-parameters out of range");
  }
  if (augment_params.min_scale <= 0 || augment_params.max_scale < augment_params.min_scale) {
    throw ConfigError("augmentation scale range invalid");
  }
  loss.validate();
  model.validate();
  if (model.distance_class_count != loss.distance.class_count()) {
    throw ConfigError("model predicts " + std::to_string(model.distance_class_count) +
                      " distance classes but border_pixels/bin_size give " +
                      std::to_string(loss.distance.class_count()));
  }
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = nlohmann::json{{"learning_rate", c.learning_rate},
                     {"decay_factor", c.decay_factor},
                     {"decay_every_epochs", c.decay_every_epochs},
                     {"plateau_window", c.plateau_window},
                     {"plateau_threshold", c.plateau_threshold},
                     {"batch_size", c.batch_size},
                     {"min_length", c.min_length},
                     {"max_length", c.max_length},
                     {"max_iterations", c.max_iterations},
                     {"seed", c.seed},
                     {"checkpoint_every", c.checkpoint_every},
                     {"grad_clip", c.grad_clip},
                     {"augment", c.augment},
                     {"augment_params", c.augment_params},
                     {"adam_beta1", c.adam_beta1},
                     {"adam_beta2", c.adam_beta2},
                     {"adam_epsilon", c.adam_epsilon},
                     {"loss", c.loss},
                     {"model", c.model}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.decay_factor = j.value("decay_factor", c.decay_factor);
  c.decay_every_epochs = j.value("decay_every_epochs", c.decay_every_epochs);
  c.plateau_window = j.value("plateau_window", c.plateau_window);
  c.plateau_threshold = j.value("plateau_threshold", c.plateau_threshold);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.min_length = j.value("min_length", c.min_length);
  c.max_length = j.value("max_length", c.max_length);
  c.max_iterations = j.value("max_iterations", c.max_iterations);
  c.seed = j.value("seed", c.seed);
  c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
  c.grad_clip = j.value("grad_clip", c.grad_clip);
  c.augment = j.value("augment", c.augment);
  if (j.contains("augment_params")) c.augment_params = j.at("augment_params").get<AugmentParams>();
  c.adam_beta1 = j.value("adam_beta1", c.adam_beta1);
  c.adam_beta2 = j.value("adam_beta2", c.adam_beta2);
  c.adam_epsilon = j.value("adam_epsilon", c.adam_epsilon);
  if (j.contains("loss")) c.loss = j.at("loss").get<LossConfig>();
  if (j.contains("model")) c.model = j.at("model").get<ModelConfig>();
}

void to_json(nlohmann::json& j, const IterationLog& l) {
  j = nlohmann::json{{"iteration", l.iteration},     {"loss", l.loss},
                     {"seg", l.seg},                 {"dist", l.dist},
                     {"lr", l.learning_rate},        {"grad_norm", l.grad_norm},
                     {"sequence_length", l.sequence_length}};
}

void Adam::step(std::vector<NamedParameter<float>>& params, double learning_rate, double grad_scale) {
  if (m_.empty()) {
    for (const auto& p : params) {
      m_.emplace_back(p.var->value.shape());
      v_.emplace_back(p.var->value.shape());
    }
  }
  ++steps_;
  const double correction1 = 1.0 - std::pow(beta1_, static_cast<double>(steps_));
  const double correction2 = 1.0 - std::pow(beta2_, static_cast<double>(steps_));
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& node = *params[k].var;
    const bool has = node.has_grad();
    auto& m = m_[k];
    auto& v = v_[k];
    for (std::size_t i = 0; i < node.value.size(); ++i) {
      const double g = has ? grad_scale * static_cast<double>(node.grad[i]) : 0.0;
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * g;
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * g * g;
      const double update = learning_rate * (m[i] / correction1) / (std::sqrt(v[i] / correction2) + epsilon_);
      node.value[i] = static_cast<float>(static_cast<double>(node.value[i]) - update);
    }
  }
}

void Adam::save(const fs::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(kMomentMagic, sizeof(kMomentMagic));
  write_pod<std::int64_t>(out, steps_);
  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(m_.size()));
  for (std::size_t k = 0; k < m_.size(); ++k) {
    write_pod<std::uint64_t>(out, m_[k].size());
    for (std::size_t i = 0; i < m_[k].size(); ++i) write_pod<double>(out, m_[k][i]);
    for (std::size_t i = 0; i < v_[k].size(); ++i) write_pod<double>(out, v_[k][i]);
  }
  if (!out) throw DataError("failed writing " + path.string());
}

void Adam::load(const fs::path& path, const std::vector<NamedParameter<float>>& params) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open optimizer state " + path.string());
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMomentMagic, sizeof(magic)) != 0) throw DataError(path.string() + ": bad magic");
  steps_ = read_pod<std::int64_t>(in);
  const auto count = read_pod<std::uint32_t>(in);
  m_.clear();
  v_.clear();
  if (count == 0) return;
  if (count != params.size()) throw ConfigError("optimizer state does not match the model's parameter list");
  for (const auto& p : params) {
    const auto n = read_pod<std::uint64_t>(in);
    if (n != p.var->value.size()) throw ConfigError("optimizer moment size mismatch for '" + p.name + "'");
    Tensor<double> m(p.var->value.shape());
    Tensor<double> v(p.var->value.shape());
    for (std::size_t i = 0; i < n; ++i) m[i] = read_pod<double>(in);
    for (std::size_t i = 0; i < n; ++i) v[i] = read_pod<double>(in);
    m_.push_back(std::move(m));
    v_.push_back(std::move(v));
  }
}

void write_directory_atomically(const fs::path& dir, const std::function<void(const fs::path&)>& fill) {
  const fs::path tmp = dir.string() + ".tmp";
  const fs::path old = dir.string() + ".old";
  fs::remove_all(tmp);
  fs::create_directories(tmp);
  fill(tmp);
  fs::remove_all(old);
  if (fs::exists(dir)) fs::rename(dir, old);
  fs::rename(tmp, dir);
  fs::remove_all(old);
}

Trainer::Trainer(TrainConfig config, std::vector<SequenceSample> dataset, fs::path out_dir)
    : config_(std::move(config)),
      dataset_(std::move(dataset)),
      out_dir_(std::move(out_dir)),
      net_((config_.validate(), config_.model), config_.seed),
      adam_(config_.adam_beta1, config_.adam_beta2, config_.adam_epsilon),
      rng_(config_.seed ^ 0x9e3779b97f4a7c15ull) {
  if (dataset_.empty()) throw DataError("training dataset is empty");
  const GridSize expected{config_.model.input_height, config_.model.input_width};
  for (const auto& s : dataset_) {
    if (s.size() != expected) {
      throw ConfigError("sequence '" + s.name + "' is " + std::to_string(s.size().height) + "x" +
                        std::to_string(s.size().width) + ", model expects " + std::to_string(expected.height) + "x" +
                        std::to_string(expected.width));
    }
  }
  if (!out_dir_.empty()) fs::create_directories(out_dir_);
}

int Trainer::iterations_per_epoch() const {
  const int n = static_cast<int>(dataset_.size());
  return (n + config_.batch_size - 1) / config_.batch_size;
}

double Trainer::learning_rate() const {
  if (!plateau_iteration_) return config_.learning_rate;
  const int period = config_.decay_every_epochs * iterations_per_epoch();
  const int decays = (iteration_ - *plateau_iteration_) / period;
  return config_.learning_rate * std::pow(config_.decay_factor, decays);
}

void Trainer::update_schedule(double loss) {
  const auto window = static_cast<std::size_t>(config_.plateau_window);
  recent_losses_.push_back(loss);
  while (recent_losses_.size() > 2 * window) recent_losses_.pop_front();
  if (plateau_iteration_ || recent_losses_.size() < 2 * window) return;
  const double previous = std::accumulate(recent_losses_.begin(), recent_losses_.begin() + window, 0.0) / window;
  const double latest = std::accumulate(recent_losses_.begin() + window, recent_losses_.end(), 0.0) / window;
  if (previous - latest < config_.plateau_threshold * std::abs(previous)) plateau_iteration_ = iteration_;
}

void Trainer::write_log(const IterationLog& log) {
  if (out_dir_.empty()) return;
  std::ofstream out(out_dir_ / "train_log.jsonl", std::ios::app);
  out << nlohmann::json(log).dump() << "\n";
}

IterationLog Trainer::step() {
  const double lr = learning_rate();
  const auto batch =
      sample_batch(dataset_, config_.batch_size, {config_.min_length, config_.max_length}, rng_);

  net_.zero_grad();
  IterationLog log;
  log.iteration = iteration_ + 1;
  log.learning_rate = lr;
  log.sequence_length = static_cast<int>(batch.front().length());
  const double inv_batch = 1.0 / static_cast<double>(batch.size());

  for (const auto& clip : batch) {
    const int id = clip.object_ids.front();
    SequenceSample sample = clip;
    if (config_.augment) {
      SequenceSample warped = augment(clip, config_.augment_params, rng_);
      // Keep the original clip when the warp pushes the object out of frame 0.
      if (count_foreground(object_mask(warped.masks.front(), id)) > 0) sample = std::move(warped);
    }
    std::vector<BinaryMask> targets;
    for (std::size_t t = 1; t < sample.length(); ++t) targets.push_back(object_mask(sample.masks[t], id));

    const auto predictions = net_.forward_sequence(sample.frames, object_mask(sample.masks.front(), id));
    std::vector<autograd::Var<float>> seg;
    std::vector<autograd::Var<float>> dist;
    for (const auto& p : predictions) {
      seg.push_back(p.seg_prob);
      dist.push_back(p.dist_logits);
    }
    const GraphLoss<float> loss = total_loss_graph<float>(seg, dist, targets, config_.loss);
    log.loss += loss.values.total * inv_batch;
    log.seg += loss.values.seg * inv_batch;
    log.dist += loss.values.dist * inv_batch;
    if (!std::isfinite(loss.values.total)) break;
    autograd::backward<float>(loss.total);
  }

  if (!std::isfinite(log.loss)) {
    if (!out_dir_.empty()) {
      write_directory_atomically(out_dir_ / "diagnostic", [&](const fs::path& dir) {
        save_checkpoint(dir);
        write_json(dir / "failure.json", {{"iteration", log.iteration}, {"batch", [&] {
                                             nlohmann::json b = nlohmann::json::array();
                                             for (const auto& c : batch) b.push_back(c.metadata);
                                             return b;
                                           }()},
                                          {"loss", log.loss}, {"seg", log.seg}, {"dist", log.dist}});
      });
    }
    throw TrainingDiverged("non-finite loss at iteration " + std::to_string(log.iteration) +
                           (out_dir_.empty() ? std::string() : "; diagnostic checkpoint in " +
                                                                   (out_dir_ / "diagnostic").string()));
  }

  double norm_sq = 0.0;
  for (const auto& p : net_.parameters()) {
    if (!p.var->has_grad()) continue;
    for (std::size_t i = 0; i < p.var->grad.size(); ++i) {
      const double g = static_cast<double>(p.var->grad[i]) * inv_batch;
      norm_sq += g * g;
    }
  }
  log.grad_norm = std::sqrt(norm_sq);
  double scale = inv_batch;
  if (config_.grad_clip > 0 && log.grad_norm > config_.grad_clip) scale *= config_.grad_clip / log.grad_norm;
  adam_.step(net_.parameters(), lr, scale);

  ++iteration_;
  update_schedule(log.loss);
  write_log(log);
  if (config_.checkpoint_every > 0 && iteration_ % config_.checkpoint_every == 0 && !out_dir_.empty()) {
    write_directory_atomically(out_dir_ / "checkpoint", [&](const fs::path& dir) { save_checkpoint(dir); });
  }
  return log;
}

std::vector<IterationLog> Trainer::run(const std::function<void(const IterationLog&)>& on_iteration) {
  std::vector<IterationLog> logs;
  while (iteration_ < config_.max_iterations) {
    logs.push_back(step());
    if (on_iteration) on_iteration(logs.back());
  }
  if (!out_dir_.empty()) {
    write_directory_atomically(out_dir_ / "checkpoint", [&](const fs::path& dir) { save_checkpoint(dir); });
  }
  return logs;
}

void Trainer::save_checkpoint(const fs::path& dir) const {
  fs::create_directories(dir);
  write_json(dir / "manifest.json", {{"format", "vosmem-checkpoint"},
                                     {"version", 1},
                                     {"iteration", iteration_},
                                     {"model", config_.model},
                                     {"train", config_}});
  net_.save_parameters(dir / "params.bin");
  adam_.save(dir / "optimizer.bin");
  std::ostringstream rng_state;
  rng_state << rng_;
  nlohmann::json state{{"iteration", iteration_},
                       {"rng", rng_state.str()},
                       {"recent_losses", std::vector<double>(recent_losses_.begin(), recent_losses_.end())},
                       {"plateau_iteration", plateau_iteration_ ? nlohmann::json(*plateau_iteration_) : nlohmann::json()}};
  write_json(dir / "state.json", state);
}

Trainer Trainer::resume(const fs::path& checkpoint, std::vector<SequenceSample> dataset, fs::path out_dir,
                        std::optional<int> max_iterations) {
  const nlohmann::json manifest = read_json(checkpoint / "manifest.json");
  if (!manifest.contains("train")) throw ConfigError(checkpoint.string() + " is not a training checkpoint");
  TrainConfig config = manifest.at("train").get<TrainConfig>();
  if (manifest.at("model").get<ModelConfig>() != config.model) {
    throw ConfigError("checkpoint manifest model section disagrees with its training config");
  }
  if (max_iterations) config.max_iterations = *max_iterations;
  Trainer trainer(std::move(config), std::move(dataset), std::move(out_dir));
  trainer.net_.load_parameters(checkpoint / "params.bin");
  trainer.adam_.load(checkpoint / "optimizer.bin", trainer.net_.parameters());
  const nlohmann::json state = read_json(checkpoint / "state.json");
  trainer.iteration_ = state.at("iteration").get<int>();
  std::istringstream rng_state(state.at("rng").get<std::string>());
  rng_state >> trainer.rng_;
  if (!rng_state) throw DataError("corrupt RNG state in " + checkpoint.string());
  for (double v : state.at("recent_losses")) trainer.recent_losses_.push_back(v);
  if (!state.at("plateau_iteration").is_null()) trainer.plateau_iteration_ = state.at("plateau_iteration").get<int>();
  return trainer;
}

}  // namespace vosmem
