#include "vosmem/ablation.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "vosmem/error.hpp"
#include "vosmem/inference.hpp"

namespace vosmem {

namespace {

nlohmann::json score_json(const SequenceScore& s) { return {{"J", s.j_mean}, {"F", s.f_mean}, {"overall", s.overall}}; }

SequenceScore score_from_json(const nlohmann::json& j) {
  return {j.at("J").get<double>(), j.at("F").get<double>(), j.at("overall").get<double>()};
}

std::string pm(double mean, double spread) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3f ± %.3f", mean, spread);
  return buf;
}

}  // namespace

void AblationConfig::validate() const {
  if (seeds.empty()) throw ConfigError("ablation needs at least one seed");
  if (skip_memory_levels.empty() || multitask.empty() || distances.empty()) {
    throw ConfigError("every ablation axis needs at least one value");
  }
  for (int s : skip_memory_levels) {
    if (s < 0 || s > 2) throw ConfigError("skip_memory_levels values must be 0, 1 or 2");
  }
  for (const auto& d : distances) d.validate();
  if (!(multitask_lambda >= 0 && multitask_lambda < 1)) throw ConfigError("multitask_lambda must lie in [0, 1)");
  if (train_sequences < 1 || test_sequences < 1) throw ConfigError("ablation datasets must be non-empty");
  train_data.validate();
  test_data.validate();
  for (const auto& cell : cells()) {
    TrainConfig t = train;
    t.model.skip_memory_levels = cell.skip_memory_levels;
    t.loss.distance = cell.distance;
    t.model.distance_class_count = cell.distance.class_count();
    t.validate();
  }
}

std::vector<AblationCell> AblationConfig::cells() const {
  std::vector<AblationCell> out;
  for (int s : skip_memory_levels) {
    for (bool m : multitask) {
      for (const auto& d : distances) out.push_back({s, m, d});
    }
  }
  return out;
}

void to_json(nlohmann::json& j, const AblationConfig& c) {
  nlohmann::json distances = nlohmann::json::array();
  for (const auto& d : c.distances) distances.push_back({d.border_pixels, d.bin_size});
  j = nlohmann::json{{"train", c.train},
                     {"multitask_lambda", c.multitask_lambda},
                     {"seeds", c.seeds},
                     {"skip_memory_levels", c.skip_memory_levels},
                     {"multitask", c.multitask},
                     {"distances", distances},
                     {"train_data", c.train_data},
                     {"train_sequences", c.train_sequences},
                     {"test_data", c.test_data},
                     {"test_sequences", c.test_sequences}};
}

void from_json(const nlohmann::json& j, AblationConfig& c) {
  if (j.contains("train")) c.train = j.at("train").get<TrainConfig>();
  c.multitask_lambda = j.value("multitask_lambda", c.multitask_lambda);
  c.seeds = j.value("seeds", c.seeds);
  c.skip_memory_levels = j.value("skip_memory_levels", c.skip_memory_levels);
  c.multitask = j.value("multitask", c.multitask);
  if (j.contains("distances")) {
    c.distances.clear();
    for (const auto& d : j.at("distances")) c.distances.push_back({d.at(0).get<int>(), d.at(1).get<int>()});
  }
  if (j.contains("train_data")) c.train_data = j.at("train_data").get<GeneratorConfig>();
  c.train_sequences = j.value("train_sequences", c.train_sequences);
  if (j.contains("test_data")) c.test_data = j.at("test_data").get<GeneratorConfig>();
  c.test_sequences = j.value("test_sequences", c.test_sequences);
}

const CellResult& AblationReport::find(const AblationCell& cell) const {
  for (const auto& c : cells) {
    if (c.cell == cell) return c;
  }
  throw ConfigError("ablation report has no such cell");
}

std::string AblationReport::table() const {
  std::ostringstream out;
  char line[256];
  std::snprintf(line, sizeof(line), "%-9s %-10s %-7s %-4s %-4s %-16s %-16s %-16s\n", "skip_mem", "multitask", "border",
                "bin", "K", "J", "F", "overall");
  out << line;
  for (const auto& c : cells) {
    std::snprintf(line, sizeof(line), "%-9d %-10s %-7d %-4d %-4d %-17s %-17s %-17s\n", c.cell.skip_memory_levels,
                  c.cell.multitask ? "on" : "off", c.cell.distance.border_pixels, c.cell.distance.bin_size,
                  c.cell.distance.class_count(), pm(c.mean.j_mean, c.spread.j_mean).c_str(),
                  pm(c.mean.f_mean, c.spread.f_mean).c_str(), pm(c.mean.overall, c.spread.overall).c_str());
    out << line;
  }
  return out.str();
}

void to_json(nlohmann::json& j, const AblationReport& r) {
  nlohmann::json cells = nlohmann::json::array();
  for (const auto& c : r.cells) {
    nlohmann::json per_seed = nlohmann::json::array();
    for (const auto& s : c.per_seed) per_seed.push_back(score_json(s));
    cells.push_back({{"skip_memory_levels", c.cell.skip_memory_levels},
                     {"multitask", c.cell.multitask},
                     {"border_pixels", c.cell.distance.border_pixels},
                     {"bin_size", c.cell.distance.bin_size},
                     {"classes", c.cell.distance.class_count()},
                     {"per_seed", per_seed},
                     {"mean", score_json(c.mean)},
                     {"spread", score_json(c.spread)}});
  }
  j = nlohmann::json{{"seeds", r.seeds}, {"cells", cells}};
}

void from_json(const nlohmann::json& j, AblationReport& r) {
  r.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
  r.cells.clear();
  for (const auto& c : j.at("cells")) {
    CellResult cell;
    cell.cell.skip_memory_levels = c.at("skip_memory_levels").get<int>();
    cell.cell.multitask = c.at("multitask").get<bool>();
    cell.cell.distance = {c.at("border_pixels").get<int>(), c.at("bin_size").get<int>()};
    for (const auto& s : c.at("per_seed")) cell.per_seed.push_back(score_from_json(s));
    cell.mean = score_from_json(c.at("mean"));
    cell.spread = score_from_json(c.at("spread"));
    r.cells.push_back(std::move(cell));
  }
}

std::vector<SequenceSample> generate_dataset(const GeneratorConfig& base, int count, const std::string& prefix) {
  std::vector<SequenceSample> out;
  for (int i = 0; i < count; ++i) {
    GeneratorConfig g = base;
    g.seed = base.seed + static_cast<std::uint64_t>(i);
    SequenceSample s = generate_sequence(g);
    s.name = prefix + std::to_string(i);
    out.push_back(std::move(s));
  }
  return out;
}

std::pair<SequenceScore, SequenceScore> mean_and_spread(const std::vector<SequenceScore>& scores) {
  SequenceScore mean;
  SequenceScore spread;
  if (scores.empty()) return {mean, spread};
  const double n = static_cast<double>(scores.size());
  for (const auto& s : scores) {
    mean.j_mean += s.j_mean / n;
    mean.f_mean += s.f_mean / n;
    mean.overall += s.overall / n;
  }
  if (scores.size() > 1) {
    for (const auto& s : scores) {
      spread.j_mean += (s.j_mean - mean.j_mean) * (s.j_mean - mean.j_mean);
      spread.f_mean += (s.f_mean - mean.f_mean) * (s.f_mean - mean.f_mean);
      spread.overall += (s.overall - mean.overall) * (s.overall - mean.overall);
    }
    spread.j_mean = std::sqrt(spread.j_mean / (n - 1));
    spread.f_mean = std::sqrt(spread.f_mean / (n - 1));
    spread.overall = std::sqrt(spread.overall / (n - 1));
  }
  return {mean, spread};
}

AblationReport run_ablation(const AblationConfig& config, const AblationProgress& progress) {
  config.validate();
  const auto train_set = generate_dataset(config.train_data, config.train_sequences, "train_");
  const auto test_set = generate_dataset(config.test_data, config.test_sequences, "test_");
  const GridSize size{config.train.model.input_height, config.train.model.input_width};
  auto fit = [&](std::vector<SequenceSample> v) {
    for (auto& s : v) s = resize_sample(s, size);
    return v;
  };
  const auto train_fit = fit(train_set);
  const auto test_fit = fit(test_set);

  AblationReport report;
  report.seeds = config.seeds;
  for (const auto& cell : config.cells()) {
    CellResult result;
    result.cell = cell;
    for (std::uint64_t seed : config.seeds) {
      TrainConfig t = config.train;
      t.seed = seed;
      t.model.skip_memory_levels = cell.skip_memory_levels;
      t.loss.lambda = cell.multitask ? config.multitask_lambda : 1.0;
      t.loss.distance = cell.distance;
      t.model.distance_class_count = cell.distance.class_count();
      Trainer trainer(t, train_fit);
      trainer.run();
      const SequenceScore score = evaluate_network(trainer.network(), test_fit).mean;
      result.per_seed.push_back(score);
      if (progress) progress(cell, seed, score);
    }
    std::tie(result.mean, result.spread) = mean_and_spread(result.per_seed);
    report.cells.push_back(std::move(result));
  }
  return report;
}

}  // namespace vosmem
