#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vosmem/data.hpp"
#include "vosmem/metrics.hpp"
#include "vosmem/model.hpp"

namespace vosmem {

/// Per-object sigmoid outputs for frames 1..T-1 of `sample`, with the
/// object's frame-0 mask as the one-shot annotation. The sample must already
/// be at the model's input size.
std::vector<ProbabilityMap> predict_object(const Network<float>& net, const SequenceSample& sample, int object_id);

struct SequencePrediction {
  std::vector<int> object_ids;
  /// probabilities[o][t] belongs to object_ids[o] at frame t + 1.
  std::vector<std::vector<ProbabilityMap>> probabilities;
  /// Merged label maps for frames 1..T-1.
  std::vector<LabelMap> labels;
};

/// Tracks every object of frame 0 independently, then merges per frame.
SequencePrediction segment_sequence(const Network<float>& net, const SequenceSample& sample, double threshold = 0.5);

struct ObjectReport {
  std::string sequence;
  int object_id = 0;
  SequenceScore score;
  int frames = 0;
};

struct EvalReport {
  std::vector<ObjectReport> objects;
  SequenceScore mean;  // over objects
};

void to_json(nlohmann::json& j, const EvalReport& r);
void from_json(const nlohmann::json& j, EvalReport& r);

/// Scores predicted label maps against ground truth, object by object.
/// `predicted[t]` pairs with `truth.masks[first_frame + t]`; frame 0 of the
/// ground truth is never scored.
std::vector<ObjectReport> evaluate_labels(const std::vector<LabelMap>& predicted, const SequenceSample& truth,
                                          std::size_t first_frame = 1);

EvalReport summarize(std::vector<ObjectReport> objects);

/// Runs segment_sequence on every sample and scores the result.
EvalReport evaluate_network(const Network<float>& net, const std::vector<SequenceSample>& dataset,
                            double threshold = 0.5);

/// Mean training-style J: per (sequence, object) the thresholded single-object
/// prediction against that object's masks, frames 1..T-1.
double mean_object_j(const Network<float>& net, const std::vector<SequenceSample>& dataset);

/// Reads manifest.json + params.bin from a checkpoint directory.
Network<float> load_checkpoint(const std::filesystem::path& dir);

}  // namespace vosmem
