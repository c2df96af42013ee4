#pragma once

#include <cstdint>
#include <deque>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <random>
#include <stdexcept>
#include <vector>

#include <nlohmann/json.hpp>

#include "vosmem/data.hpp"
#include "vosmem/losses.hpp"
#include "vosmem/model.hpp"

namespace vosmem {

struct TrainConfig {
  double learning_rate = 1e-5;
  double decay_factor = 0.99;
  int decay_every_epochs = 4;
  /// Decay starts once the mean loss of the latest `plateau_window`
  /// iterations improves on the window before it by less than
  /// `plateau_threshold` (relative).
  int plateau_window = 100;
  double plateau_threshold = 0.01;
  int batch_size = 4;
  int min_length = 5;
  int max_length = 12;
  int max_iterations = 1000;
  std::uint64_t seed = 0;
  /// Write the latest checkpoint every this many iterations (0: only at the end).
  int checkpoint_every = 0;
  /// Global gradient-norm clip; 0 disables it.
  double grad_clip = 0.0;
  bool augment = true;
  AugmentParams augment_params;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  LossConfig loss;
  ModelConfig model;

  void validate() const;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);
void to_json(nlohmann::json& j, const LossConfig& c);
void from_json(const nlohmann::json& j, LossConfig& c);
void to_json(nlohmann::json& j, const AugmentParams& p);
void from_json(const nlohmann::json& j, AugmentParams& p);

/// Raised when the loss stops being finite; a diagnostic checkpoint has
/// been written by then.
class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct IterationLog {
  int iteration = 0;  // 1-based
  double loss = 0.0;  // batch mean of the weighted total
  double seg = 0.0;
  double dist = 0.0;
  double learning_rate = 0.0;
  double grad_norm = 0.0;
  int sequence_length = 0;
};

void to_json(nlohmann::json& j, const IterationLog& l);

/// Adam over a network's parameters; moments are kept in double.
class Adam {
 public:
  Adam(double beta1, double beta2, double epsilon) : beta1_(beta1), beta2_(beta2), epsilon_(epsilon) {}

  /// Applies one update with gradients scaled by `grad_scale`.
  void step(std::vector<NamedParameter<float>>& params, double learning_rate, double grad_scale = 1.0);

  long long steps() const { return steps_; }
  void save(const std::filesystem::path& path) const;
  void load(const std::filesystem::path& path, const std::vector<NamedParameter<float>>& params);

 private:
  double beta1_, beta2_, epsilon_;
  long long steps_ = 0;
  std::vector<Tensor<double>> m_, v_;
};

/// Checkpoint directory layout:
///   manifest.json  model and training configs, iteration
///   params.bin     network parameters
///   optimizer.bin  Adam moments
///   state.json     step counters, schedule state, RNG stream
/// Directories are written under a temporary name and renamed into place.
class Trainer {
 public:
  /// `out_dir` receives train_log.jsonl and checkpoint/; empty keeps
  /// everything in memory.
  Trainer(TrainConfig config, std::vector<SequenceSample> dataset, std::filesystem::path out_dir = {});

  /// Restores network, optimizer, schedule and RNG from a checkpoint, then
  /// continues appending to `out_dir`'s log.
  static Trainer resume(const std::filesystem::path& checkpoint, std::vector<SequenceSample> dataset,
                        std::filesystem::path out_dir = {}, std::optional<int> max_iterations = std::nullopt);

  IterationLog step();
  /// Steps until max_iterations, then writes the final checkpoint.
  std::vector<IterationLog> run(const std::function<void(const IterationLog&)>& on_iteration = {});

  void save_checkpoint(const std::filesystem::path& dir) const;

  const TrainConfig& config() const { return config_; }
  const Network<float>& network() const { return net_; }
  Network<float>& network() { return net_; }
  int iteration() const { return iteration_; }
  double learning_rate() const;
  std::optional<int> plateau_iteration() const { return plateau_iteration_; }
  int iterations_per_epoch() const;

 private:
  void update_schedule(double loss);
  void write_log(const IterationLog& log);

  TrainConfig config_;
  std::vector<SequenceSample> dataset_;
  std::filesystem::path out_dir_;
  Network<float> net_;
  Adam adam_;
  std::mt19937_64 rng_;
  int iteration_ = 0;
  std::optional<int> plateau_iteration_;
  std::deque<double> recent_losses_;
};

/// Writes `dir` atomically: `fill` populates a sibling temporary directory
/// which then replaces `dir`.
void write_directory_atomically(const std::filesystem::path& dir,
                                const std::function<void(const std::filesystem::path&)>& fill);

}  // namespace vosmem
