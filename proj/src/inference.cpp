#include "vosmem/inference.hpp"

#include <fstream>

#include "vosmem/error.hpp"
#include "vosmem/mask_ops.hpp"

namespace vosmem {

std::vector<ProbabilityMap> predict_object(const Network<float>& net, const SequenceSample& sample, int object_id) {
  if (sample.length() < 2) throw DataError("sequence '" + sample.name + "' needs at least two frames");
  const BinaryMask first = object_mask(sample.masks.front(), object_id);
  if (count_foreground(first) == 0) {
    throw DataError("object " + std::to_string(object_id) + " is absent from frame 0 of '" + sample.name + "'");
  }
  autograd::NoGradGuard no_grad;
  const auto predictions = net.forward_sequence(sample.frames, first);
  std::vector<ProbabilityMap> out;
  out.reserve(predictions.size());
  for (const auto& p : predictions) out.push_back(p.probability_map());
  return out;
}

SequencePrediction segment_sequence(const Network<float>& net, const SequenceSample& sample, double threshold) {
  SequencePrediction out;
  out.object_ids = object_ids(sample.masks.front());
  if (out.object_ids.empty()) throw DataError("sequence '" + sample.name + "' has no object in frame 0");
  for (int id : out.object_ids) out.probabilities.push_back(predict_object(net, sample, id));

  const std::size_t frames = sample.length() - 1;
  for (std::size_t t = 0; t < frames; ++t) {
    std::vector<ProbabilityMap> per_object;
    for (const auto& obj : out.probabilities) per_object.push_back(obj[t]);
    const LabelMap merged = merge_objects(per_object, sample.size(), threshold);
    // merge_objects numbers objects 1..n in input order; restore the real ids.
    LabelMap labels(sample.size());
    for (std::size_t i = 0; i < merged.area(); ++i) {
      labels[i] = merged[i] == 0 ? 0 : out.object_ids[static_cast<std::size_t>(merged[i] - 1)];
    }
    out.labels.push_back(std::move(labels));
  }
  return out;
}

void to_json(nlohmann::json& j, const EvalReport& r) {
  nlohmann::json objects = nlohmann::json::array();
  for (const auto& o : r.objects) {
    objects.push_back({{"sequence", o.sequence},
                       {"object_id", o.object_id},
                       {"frames", o.frames},
                       {"J", o.score.j_mean},
                       {"F", o.score.f_mean},
                       {"overall", o.score.overall}});
  }
  j = nlohmann::json{{"objects", objects},
                     {"mean", {{"J", r.mean.j_mean}, {"F", r.mean.f_mean}, {"overall", r.mean.overall}}}};
}

void from_json(const nlohmann::json& j, EvalReport& r) {
  r.objects.clear();
  for (const auto& o : j.at("objects")) {
    ObjectReport rep;
    rep.sequence = o.at("sequence").get<std::string>();
    rep.object_id = o.at("object_id").get<int>();
    rep.frames = o.at("frames").get<int>();
    rep.score = {o.at("J").get<double>(), o.at("F").get<double>(), o.at("overall").get<double>()};
    r.objects.push_back(rep);
  }
  const auto& m = j.at("mean");
  r.mean = {m.at("J").get<double>(), m.at("F").get<double>(), m.at("overall").get<double>()};
}

std::vector<ObjectReport> evaluate_labels(const std::vector<LabelMap>& predicted, const SequenceSample& truth,
                                          std::size_t first_frame) {
  if (first_frame == 0) first_frame = 1;
  if (first_frame + predicted.size() > truth.length()) {
    throw DataError("sequence '" + truth.name + "': " + std::to_string(predicted.size()) +
                    " predicted frames exceed the ground truth");
  }
  if (predicted.empty()) throw DataError("sequence '" + truth.name + "': no predicted frames to score");
  const double tolerance = default_contour_tolerance(truth.size());
  std::vector<ObjectReport> out;
  for (int id : object_ids(truth.masks.front())) {
    std::vector<BinaryMask> preds;
    std::vector<BinaryMask> gts;
    for (std::size_t t = 0; t < predicted.size(); ++t) {
      require_same_size(predicted[t].size(), truth.size(), "evaluate_labels");
      preds.push_back(object_mask(predicted[t], id));
      gts.push_back(object_mask(truth.masks[first_frame + t], id));
    }
    ObjectReport rep;
    rep.sequence = truth.name;
    rep.object_id = id;
    rep.frames = static_cast<int>(preds.size());
    rep.score = evaluate_sequence(preds, gts, /*skip_first=*/false, tolerance);
    out.push_back(rep);
  }
  return out;
}

EvalReport summarize(std::vector<ObjectReport> objects) {
  EvalReport r;
  r.objects = std::move(objects);
  if (r.objects.empty()) return r;
  for (const auto& o : r.objects) {
    r.mean.j_mean += o.score.j_mean;
    r.mean.f_mean += o.score.f_mean;
  }
  r.mean.j_mean /= static_cast<double>(r.objects.size());
  r.mean.f_mean /= static_cast<double>(r.objects.size());
  r.mean.overall = (r.mean.j_mean + r.mean.f_mean) / 2.0;
  return r;
}

EvalReport evaluate_network(const Network<float>& net, const std::vector<SequenceSample>& dataset, double threshold) {
  std::vector<ObjectReport> all;
  for (const auto& sample : dataset) {
    const SequencePrediction pred = segment_sequence(net, sample, threshold);
    auto reports = evaluate_labels(pred.labels, sample);
    all.insert(all.end(), reports.begin(), reports.end());
  }
  return summarize(std::move(all));
}

double mean_object_j(const Network<float>& net, const std::vector<SequenceSample>& dataset) {
  double sum = 0.0;
  std::size_t count = 0;
  for (const auto& sample : dataset) {
    for (int id : object_ids(sample.masks.front())) {
      const auto probs = predict_object(net, sample, id);
      double j = 0.0;
      for (std::size_t t = 0; t < probs.size(); ++t) {
        BinaryMask pred(sample.size());
        for (std::size_t i = 0; i < pred.area(); ++i) pred[i] = probs[t][i] >= 0.5 ? 1 : 0;
        j += region_similarity(pred, object_mask(sample.masks[t + 1], id));
      }
      sum += j / static_cast<double>(probs.size());
      ++count;
    }
  }
  return count ? sum / static_cast<double>(count) : 0.0;
}

Network<float> load_checkpoint(const std::filesystem::path& dir) {
  const auto manifest_path = dir / "manifest.json";
  std::ifstream in(manifest_path);
  if (!in) throw ConfigError("checkpoint manifest " + manifest_path.string() + " not found");
  nlohmann::json manifest;
  try {
    in >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("checkpoint manifest " + manifest_path.string() + " is not valid JSON: " + e.what());
  }
  if (!manifest.contains("model")) throw ConfigError(manifest_path.string() + " has no model section");
  ModelConfig config = manifest.at("model").get<ModelConfig>();
  Network<float> net(config, 0);
  net.load_parameters(dir / "params.bin");
  return net;
}

}  // namespace vosmem
