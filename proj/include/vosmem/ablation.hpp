#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vosmem/data.hpp"
#include "vosmem/metrics.hpp"
#include "vosmem/train.hpp"

namespace vosmem {

struct AblationCell {
  int skip_memory_levels = 0;
  bool multitask = false;  // off means lambda = 1
  DistanceConfig distance;

  bool operator==(const AblationCell&) const = default;
};

struct AblationConfig {
  /// Template for every run; the cell overrides skip_memory_levels, lambda,
  /// the distance config and the class count, the seed list overrides seed.
  TrainConfig train;
  double multitask_lambda = 0.8;
  std::vector<std::uint64_t> seeds{0, 1, 2};
  std::vector<int> skip_memory_levels{0, 1, 2};
  std::vector<bool> multitask{false, true};
  std::vector<DistanceConfig> distances{{20, 10}, {20, 1}, {10, 1}};
  GeneratorConfig train_data;
  int train_sequences = 8;
  GeneratorConfig test_data;
  int test_sequences = 20;

  void validate() const;
  /// Cells in report order: skip levels outermost, then multitask, then distance.
  std::vector<AblationCell> cells() const;
};

void to_json(nlohmann::json& j, const AblationConfig& c);
void from_json(const nlohmann::json& j, AblationConfig& c);

struct CellResult {
  AblationCell cell;
  std::vector<SequenceScore> per_seed;
  SequenceScore mean;
  SequenceScore spread;  // sample standard deviation over seeds
};

struct AblationReport {
  std::vector<std::uint64_t> seeds;
  std::vector<CellResult> cells;

  const CellResult& find(const AblationCell& cell) const;
  /// Fixed-width text table, one row per cell, "mean ± spread" entries.
  std::string table() const;
};

void to_json(nlohmann::json& j, const AblationReport& r);
void from_json(const nlohmann::json& j, AblationReport& r);

/// `count` sequences from `base`, sequence i seeded with base.seed + i.
std::vector<SequenceSample> generate_dataset(const GeneratorConfig& base, int count, const std::string& prefix);

/// Mean and sample standard deviation of each score component.
std::pair<SequenceScore, SequenceScore> mean_and_spread(const std::vector<SequenceScore>& scores);

using AblationProgress = std::function<void(const AblationCell&, std::uint64_t seed, const SequenceScore&)>;

/// Trains one network per (cell, seed) on the training split and evaluates
/// it on the held-out split.
AblationReport run_ablation(const AblationConfig& config, const AblationProgress& progress = {});

}  // namespace vosmem
