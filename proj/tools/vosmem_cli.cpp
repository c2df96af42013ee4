// Command-line front end: generate | train | infer | eval | encode | visualize | ablate.
//
// Every subcommand accepts --config <file.json>; explicit flags override the
// values read from that file. Failures print {"error": ..., "kind": ...} on
// stderr and exit with 2 (configuration), 3 (data), 4 (diverged training) or
// 1 (anything else).

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vosmem/ablation.hpp"
#include "vosmem/data.hpp"
#include "vosmem/error.hpp"
#include "vosmem/image_io.hpp"
#include "vosmem/inference.hpp"
#include "vosmem/mask_ops.hpp"
#include "vosmem/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace vosmem;

namespace {

/// Flags are parsed into shadow values and copied onto the configuration
/// only when given, so that the JSON file supplies everything else.
class Overrides {
 public:
  template <typename T>
  CLI::Option* add(CLI::App* app, const std::string& name, T& target, const std::string& help) {
    auto value = std::make_shared<T>();
    CLI::Option* opt = app->add_option(name, *value, help);
    apply_.push_back([opt, value, &target] {
      if (opt->count() > 0) target = *value;
    });
    return opt;
  }

  void add_flag(CLI::App* app, const std::string& name, bool& target, const std::string& help) {
    auto value = std::make_shared<bool>(false);
    CLI::Option* opt = app->add_flag(name, *value, help);
    apply_.push_back([opt, value, &target] {
      if (opt->count() > 0) target = *value;
    });
  }

  void apply() const {
    for (const auto& f : apply_) f();
  }

 private:
  std::vector<std::function<void()>> apply_;
};

json read_config(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  try {
    json j = json::parse(in);
    if (!j.is_object()) throw ConfigError("config file " + path + " must hold a JSON object");
    return j;
  } catch (const json::exception& e) {
    throw ConfigError("config file " + path + ": " + e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
}

std::vector<fs::path> sorted_pngs(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw DataError(dir.string() + " is not a directory");
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.path().extension() == ".png") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

std::vector<fs::path> sorted_dirs(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw DataError(dir.string() + " is not a directory");
  std::vector<fs::path> dirs;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_directory()) dirs.push_back(e.path());
  }
  std::sort(dirs.begin(), dirs.end());
  return dirs;
}

ProbabilityMap resize_probability(const ProbabilityMap& p, GridSize size) {
  if (p.size() == size) return p;
  ProbabilityMap out(size);
  for (int y = 0; y < size.height; ++y) {
    const int sy = std::min(p.height() - 1, static_cast<int>((y + 0.5) * p.height() / size.height));
    for (int x = 0; x < size.width; ++x) {
      const int sx = std::min(p.width() - 1, static_cast<int>((x + 0.5) * p.width() / size.width));
      out(y, x) = p(sy, sx);
    }
  }
  return out;
}

// ---------------------------------------------------------------- generate

struct GenerateArgs {
  std::string config;
  std::string out;
  GeneratorConfig generator;
  int count = 4;
  int length = 0;
  std::string prefix = "seq_";
};

int run_generate(GenerateArgs& a, const Overrides& flags) {
  const json cfg = read_config(a.config);
  a.generator = cfg.get<GeneratorConfig>();
  a.count = cfg.value("count", a.count);
  a.prefix = cfg.value("prefix", a.prefix);
  flags.apply();
  if (a.length > 0) a.generator.min_length = a.generator.max_length = a.length;
  if (a.count < 1) throw ConfigError("--count must be positive");
  a.generator.validate();

  const auto samples = generate_dataset(a.generator, a.count, a.prefix);
  json sequences = json::array();
  for (const auto& s : samples) {
    sequences.push_back({{"name", s.name}, {"frames", s.length()}, {"objects", s.object_ids}, {"metadata", s.metadata}});
  }
  const json manifest{{"generator", a.generator}, {"count", a.count}, {"prefix", a.prefix}, {"sequences", sequences}};
  write_dataset(a.out, samples, manifest);
  std::cout << json{{"out", a.out}, {"sequences", a.count}}.dump() << "\n";
  return 0;
}

// ------------------------------------------------------------------- train

struct TrainArgs {
  std::string config;
  std::string data;
  std::string out;
  std::string resume;
  TrainConfig train;
  bool no_augment = false;
  int progress_every = 50;
  CLI::Option* max_iterations = nullptr;
};

std::vector<SequenceSample> load_for_model(const std::string& root, const ModelConfig& model) {
  LoadOptions options;
  options.resize = GridSize{model.input_height, model.input_width};
  auto data = load_dataset(root, options);
  if (data.empty()) throw DataError("no usable sequences under " + root);
  return data;
}

int run_train(TrainArgs& a, const Overrides& flags, bool classes_given) {
  const json cfg = read_config(a.config);
  a.train = cfg.get<TrainConfig>();
  flags.apply();
  if (a.no_augment) a.train.augment = false;
  if (!classes_given && !(cfg.contains("model") && cfg.at("model").contains("distance_class_count"))) {
    a.train.model.distance_class_count = a.train.loss.distance.class_count();
  }

  std::unique_ptr<Trainer> trainer;
  if (!a.resume.empty()) {
    const json manifest = read_config((fs::path(a.resume) / "manifest.json").string());
    const TrainConfig saved = manifest.at("train").get<TrainConfig>();
    auto data = load_for_model(a.data, saved.model);
    std::optional<int> until;
    if (a.max_iterations->count() > 0 || cfg.contains("max_iterations")) until = a.train.max_iterations;
    trainer = std::make_unique<Trainer>(Trainer::resume(a.resume, std::move(data), a.out, until));
  } else {
    a.train.validate();
    auto data = load_for_model(a.data, a.train.model);
    fs::create_directories(a.out);
    fs::remove(fs::path(a.out) / "train_log.jsonl");
    trainer = std::make_unique<Trainer>(a.train, std::move(data), a.out);
  }
  const auto logs = trainer->run([&](const IterationLog& log) {
    if (a.progress_every > 0 && log.iteration % a.progress_every == 0) {
      std::cerr << "iteration " << log.iteration << " loss " << log.loss << " lr " << log.learning_rate << "\n";
    }
  });
  json summary{{"iterations", trainer->iteration()},
               {"checkpoint", (fs::path(a.out) / "checkpoint").string()},
               {"learning_rate", trainer->learning_rate()}};
  if (!logs.empty()) summary["final_loss"] = logs.back().loss;
  std::cout << summary.dump() << "\n";
  return 0;
}

// ------------------------------------------------------------------- infer

struct InferArgs {
  std::string config;
  std::string checkpoint;
  std::string data;
  std::string sequence;
  std::string mask;
  std::string out;
  double threshold = 0.5;
  bool heatmaps = false;
};

void infer_one(const Network<float>& net, const SequenceSample& original, const fs::path& out, double threshold,
               bool heatmaps, const std::vector<std::string>& frame_names) {
  const GridSize model_size{net.config().input_height, net.config().input_width};
  const SequenceSample sample = resize_sample(original, model_size);
  const SequencePrediction pred = segment_sequence(net, sample, threshold);
  const fs::path dir = out / original.name;
  for (std::size_t t = 0; t < pred.labels.size(); ++t) {
    io::write_labels(dir / (frame_names[t + 1] + ".png"), resize_nearest(pred.labels[t], original.size()));
    if (!heatmaps) continue;
    for (std::size_t o = 0; o < pred.object_ids.size(); ++o) {
      const ProbabilityMap p = resize_probability(pred.probabilities[o][t], original.size());
      io::write_rgb(dir / "heatmaps" / std::to_string(pred.object_ids[o]) / (frame_names[t + 1] + ".png"),
                    io::render_heatmap(p));
    }
  }
}

int run_infer(InferArgs& a, const Overrides& flags) {
  const json cfg = read_config(a.config);
  a.checkpoint = cfg.value("checkpoint", a.checkpoint);
  a.data = cfg.value("data", a.data);
  a.sequence = cfg.value("sequence", a.sequence);
  a.mask = cfg.value("mask", a.mask);
  a.out = cfg.value("out", a.out);
  a.threshold = cfg.value("threshold", a.threshold);
  a.heatmaps = cfg.value("heatmaps", a.heatmaps);
  flags.apply();
  if (a.checkpoint.empty()) throw ConfigError("--checkpoint is required");
  if (a.out.empty()) throw ConfigError("--out is required");
  if (!(a.threshold > 0 && a.threshold < 1)) throw ConfigError("--threshold must lie in (0, 1)");
  if (a.data.empty() == a.sequence.empty()) throw ConfigError("give either --data or --sequence with --mask");

  const Network<float> net = load_checkpoint(a.checkpoint);
  json written = json::array();
  if (!a.data.empty()) {
    const auto dataset = load_dataset(a.data);
    if (dataset.empty()) throw DataError("no usable sequences under " + a.data);
    for (const auto& s : dataset) {
      std::vector<std::string> names;
      for (const auto& f : sorted_pngs(fs::path(a.data) / "frames" / s.name)) names.push_back(f.stem().string());
      infer_one(net, s, a.out, a.threshold, a.heatmaps, names);
      written.push_back({{"sequence", s.name}, {"frames", s.length() - 1}});
    }
  } else {
    if (a.mask.empty()) throw ConfigError("--sequence needs --mask");
    SequenceSample s;
    s.name = fs::path(a.sequence).filename().string();
    std::vector<std::string> names;
    for (const auto& f : sorted_pngs(a.sequence)) {
      s.frames.push_back(io::read_rgb(f));
      names.push_back(f.stem().string());
    }
    if (s.frames.size() < 2) throw DataError(a.sequence + " holds fewer than two frames");
    const LabelMap first = io::read_labels(a.mask);
    require_same_size(first.size(), s.frames.front().size(), "first-frame mask");
    if (object_ids(first).empty()) throw DataError(a.mask + " contains no object");
    for (std::size_t t = 0; t < s.frames.size(); ++t) s.masks.push_back(t == 0 ? first : LabelMap(first.size()));
    infer_one(net, s, a.out, a.threshold, a.heatmaps, names);
    written.push_back({{"sequence", s.name}, {"frames", s.length() - 1}});
  }
  std::cout << json{{"out", a.out}, {"sequences", written}}.dump() << "\n";
  return 0;
}

// -------------------------------------------------------------------- eval

struct EvalArgs {
  std::string config;
  std::string pred;
  std::string gt;
  std::string out;
};

int run_eval(EvalArgs& a, const Overrides& flags) {
  const json cfg = read_config(a.config);
  a.pred = cfg.value("pred", a.pred);
  a.gt = cfg.value("gt", a.gt);
  a.out = cfg.value("out", a.out);
  flags.apply();
  if (a.pred.empty() || a.gt.empty()) throw ConfigError("--pred and --gt are required");
  const fs::path gt_root =
      fs::is_directory(fs::path(a.gt) / "annotations") ? fs::path(a.gt) / "annotations" : fs::path(a.gt);

  std::vector<ObjectReport> all;
  json sequences = json::array();
  for (const auto& pred_dir : sorted_dirs(a.pred)) {
    const std::string name = pred_dir.filename().string();
    const fs::path gt_dir = gt_root / name;
    const auto gt_files = sorted_pngs(gt_dir);
    if (gt_files.empty()) throw DataError("no ground truth for sequence '" + name + "'");
    SequenceSample truth;
    truth.name = name;
    truth.masks.push_back(io::read_labels(gt_files.front()));
    std::vector<LabelMap> predicted;
    for (const auto& f : sorted_pngs(pred_dir)) {
      if (f.filename() == gt_files.front().filename()) continue;  // the given annotation is never scored
      const fs::path g = gt_dir / f.filename();
      if (!fs::exists(g)) throw DataError("prediction " + f.string() + " has no ground-truth counterpart");
      predicted.push_back(io::read_labels(f));
      truth.masks.push_back(io::read_labels(g));
      require_same_size(predicted.back().size(), truth.masks.back().size(), "prediction vs ground truth");
    }
    truth.frames.assign(truth.masks.size(), RgbImage(truth.masks.front().height(), truth.masks.front().width()));
    auto reports = evaluate_labels(predicted, truth);
    const EvalReport seq = summarize(reports);
    sequences.push_back(
        {{"sequence", name}, {"J", seq.mean.j_mean}, {"F", seq.mean.f_mean}, {"overall", seq.mean.overall}});
    all.insert(all.end(), reports.begin(), reports.end());
  }
  if (all.empty()) throw DataError("no predicted sequences under " + a.pred);
  json report = summarize(std::move(all));
  report["sequences"] = sequences;
  const std::string text = report.dump(2) + "\n";
  if (!a.out.empty()) write_text(a.out, text);
  std::cout << text;
  return 0;
}

// ------------------------------------------------------------------ encode

struct EncodeArgs {
  std::string config;
  std::string mask;
  std::string out;
  int object_id = 0;
  DistanceConfig distance;
};

int run_encode(EncodeArgs& a, const Overrides& flags) {
  const json cfg = read_config(a.config);
  a.mask = cfg.value("mask", a.mask);
  a.out = cfg.value("out", a.out);
  a.object_id = cfg.value("object_id", a.object_id);
  a.distance.border_pixels = cfg.value("border_pixels", a.distance.border_pixels);
  a.distance.bin_size = cfg.value("bin_size", a.distance.bin_size);
  flags.apply();
  if (a.mask.empty() || a.out.empty()) throw ConfigError("--mask and --out are required");
  a.distance.validate();

  const LabelMap labels = io::read_labels(a.mask);
  BinaryMask mask(labels.size());
  for (std::size_t i = 0; i < labels.area(); ++i) {
    mask[i] = (a.object_id == 0 ? labels[i] != 0 : labels[i] == a.object_id) ? 1 : 0;
  }
  const DistanceClassMap classes = encode_distance_classes(mask, a.distance);
  io::write_gray(a.out, classes.classes);

  std::vector<long long> histogram(static_cast<std::size_t>(a.distance.class_count()), 0);
  for (int c : classes.classes.values()) ++histogram[static_cast<std::size_t>(c)];
  const json sidecar{{"mask", a.mask},
                     {"object_id", a.object_id},
                     {"border_pixels", a.distance.border_pixels},
                     {"bin_size", a.distance.bin_size},
                     {"classes", a.distance.class_count()},
                     {"height", labels.height()},
                     {"width", labels.width()},
                     {"foreground_from_class", a.distance.bins() + 1},
                     {"histogram", histogram}};
  fs::path sidecar_path = a.out;
  sidecar_path.replace_extension(".json");
  write_text(sidecar_path, sidecar.dump(2) + "\n");
  std::cout << json{{"out", a.out}, {"sidecar", sidecar_path.string()}, {"classes", a.distance.class_count()}}.dump()
            << "\n";
  return 0;
}

// --------------------------------------------------------------- visualize

struct VisualizeArgs {
  std::string config;
  std::string frames;
  std::string masks;
  std::string out;
  double alpha = 0.5;
};

int run_visualize(VisualizeArgs& a, const Overrides& flags) {
  const json cfg = read_config(a.config);
  a.frames = cfg.value("frames", a.frames);
  a.masks = cfg.value("masks", a.masks);
  a.out = cfg.value("out", a.out);
  a.alpha = cfg.value("alpha", a.alpha);
  flags.apply();
  if (a.frames.empty() || a.masks.empty() || a.out.empty()) throw ConfigError("--frames, --masks and --out are required");
  if (!(a.alpha >= 0 && a.alpha <= 1)) throw ConfigError("--alpha must lie in [0, 1]");

  const auto& palette = io::annotation_palette();
  int written = 0;
  for (const auto& mask_path : sorted_pngs(a.masks)) {
    const fs::path frame_path = fs::path(a.frames) / mask_path.filename();
    if (!fs::exists(frame_path)) continue;
    RgbImage frame = io::read_rgb(frame_path);
    const LabelMap labels = io::read_labels(mask_path);
    require_same_size(frame.size(), labels.size(), "visualize");
    for (int id : object_ids(labels)) {
      const BinaryMask edge = boundary_mask(object_mask(labels, id));
      const auto& colour = palette[static_cast<std::size_t>(id % 256)];
      for (int y = 0; y < labels.height(); ++y) {
        for (int x = 0; x < labels.width(); ++x) {
          if (labels(y, x) != id) continue;
          const double w = edge(y, x) ? 1.0 : a.alpha;
          for (int c = 0; c < 3; ++c) {
            frame.at(y, x, c) = static_cast<std::uint8_t>(std::lround((1 - w) * frame.at(y, x, c) + w * colour[c]));
          }
        }
      }
    }
    io::write_rgb(fs::path(a.out) / mask_path.filename(), frame);
    ++written;
  }
  if (written == 0) throw DataError("no mask under " + a.masks + " has a matching frame in " + a.frames);
  std::cout << json{{"out", a.out}, {"images", written}}.dump() << "\n";
  return 0;
}

// ------------------------------------------------------------------ ablate

struct AblateArgs {
  std::string config;
  std::string out;
  AblationConfig ablation;
};

int run_ablate(AblateArgs& a, const Overrides& flags) {
  const json cfg = read_config(a.config);
  a.ablation = cfg.get<AblationConfig>();
  flags.apply();
  a.ablation.validate();
  const AblationReport report = run_ablation(a.ablation, [](const AblationCell& c, std::uint64_t seed,
                                                            const SequenceScore& s) {
    std::cerr << "skip_mem " << c.skip_memory_levels << " multitask " << (c.multitask ? "on" : "off") << " border "
              << c.distance.border_pixels << " bin " << c.distance.bin_size << " seed " << seed << " overall "
              << s.overall << "\n";
  });
  const json j{{"config", a.ablation}, {"report", report}};
  if (!a.out.empty()) {
    write_text(fs::path(a.out) / "report.json", j.dump(2) + "\n");
    write_text(fs::path(a.out) / "table.txt", report.table());
  }
  std::cout << report.table();
  return 0;
}

int fail(const std::string& message, const std::string& kind, int code) {
  std::cerr << json{{"error", message}, {"kind", kind}}.dump() << "\n";
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"One-shot video object segmentation with recurrent skip memories"};
  app.require_subcommand(1);

  // generate
  GenerateArgs gen;
  Overrides gen_flags;
  auto* generate = app.add_subcommand("generate", "Write a synthetic moving-shapes dataset");
  generate->add_option("--config", gen.config, "JSON file with generator fields and 'count'");
  generate->add_option("--out", gen.out, "Output dataset directory")->required();
  gen_flags.add(generate, "--count", gen.count, "Number of sequences");
  gen_flags.add(generate, "--prefix", gen.prefix, "Sequence name prefix");
  gen_flags.add(generate, "--seed", gen.generator.seed, "Seed of the first sequence (others use seed + i)");
  gen_flags.add(generate, "--height", gen.generator.height, "Canvas height");
  gen_flags.add(generate, "--width", gen.generator.width, "Canvas width");
  gen_flags.add(generate, "--min-objects", gen.generator.min_objects, "Minimum objects per sequence");
  gen_flags.add(generate, "--max-objects", gen.generator.max_objects, "Maximum objects per sequence");
  gen_flags.add(generate, "--min-size", gen.generator.min_size, "Minimum regular object extent");
  gen_flags.add(generate, "--max-size", gen.generator.max_size, "Maximum regular object extent");
  gen_flags.add(generate, "--small-probability", gen.generator.small_probability, "Chance an object is small");
  gen_flags.add(generate, "--min-length", gen.generator.min_length, "Minimum frames per sequence");
  gen_flags.add(generate, "--max-length", gen.generator.max_length, "Maximum frames per sequence");
  generate->add_option("--length", gen.length, "Fixed frames per sequence (sets min and max)");
  gen_flags.add(generate, "--occluder-probability", gen.generator.occluder_probability, "Chance of an occluding bar");
  gen_flags.add_flag(generate, "--force-small", gen.generator.force_small_object, "Guarantee one small object");

  // train
  TrainArgs tr;
  Overrides tr_flags;
  auto* train = app.add_subcommand("train", "Train a network on a dataset directory");
  train->add_option("--config", tr.config, "JSON file with training fields");
  train->add_option("--data", tr.data, "Dataset directory (frames/, annotations/)")->required();
  train->add_option("--out", tr.out, "Output directory for the log and checkpoint")->required();
  train->add_option("--resume", tr.resume, "Continue from this checkpoint directory");
  train->add_option("--progress-every", tr.progress_every, "Print progress every N iterations (0: never)");
  auto& tc = tr.train;
  tr_flags.add(train, "--learning-rate", tc.learning_rate, "Initial Adam step size");
  tr_flags.add(train, "--decay-factor", tc.decay_factor, "Learning-rate decay factor");
  tr_flags.add(train, "--decay-every-epochs", tc.decay_every_epochs, "Epochs between decays after the plateau");
  tr_flags.add(train, "--plateau-window", tc.plateau_window, "Iterations per plateau-detection window");
  tr_flags.add(train, "--plateau-threshold", tc.plateau_threshold, "Relative improvement that counts as progress");
  tr_flags.add(train, "--batch-size", tc.batch_size, "Sequences per batch");
  tr_flags.add(train, "--min-length", tc.min_length, "Minimum clip length");
  tr_flags.add(train, "--max-length", tc.max_length, "Maximum clip length");
  tr.max_iterations = tr_flags.add(train, "--max-iterations", tc.max_iterations, "Total iterations");
  tr_flags.add(train, "--seed", tc.seed, "Seed for initialisation and sampling");
  tr_flags.add(train, "--checkpoint-every", tc.checkpoint_every, "Checkpoint period in iterations (0: end only)");
  tr_flags.add(train, "--grad-clip", tc.grad_clip, "Global gradient-norm clip (0: off)");
  train->add_flag("--no-augment", tr.no_augment, "Disable flip and affine augmentation");
  tr_flags.add(train, "--flip-probability", tc.augment_params.flip_probability, "Horizontal flip probability");
  tr_flags.add(train, "--max-rotation", tc.augment_params.max_rotation_degrees, "Maximum rotation in degrees");
  tr_flags.add(train, "--min-scale", tc.augment_params.min_scale, "Minimum augmentation scale");
  tr_flags.add(train, "--max-scale", tc.augment_params.max_scale, "Maximum augmentation scale");
  tr_flags.add(train, "--max-translation", tc.augment_params.max_translation, "Maximum shift as a fraction of size");
  tr_flags.add(train, "--adam-beta1", tc.adam_beta1, "Adam first-moment decay");
  tr_flags.add(train, "--adam-beta2", tc.adam_beta2, "Adam second-moment decay");
  tr_flags.add(train, "--adam-epsilon", tc.adam_epsilon, "Adam denominator epsilon");
  tr_flags.add(train, "--lambda", tc.loss.lambda, "Segmentation weight; distance gets 1 - lambda");
  tr_flags.add(train, "--border-pixels", tc.loss.distance.border_pixels, "Distance truncation radius R");
  tr_flags.add(train, "--bin-size", tc.loss.distance.bin_size, "Distance bin width s");
  tr_flags.add(train, "--input-height", tc.model.input_height, "Network input height (multiple of 32)");
  tr_flags.add(train, "--input-width", tc.model.input_width, "Network input width (multiple of 32)");
  tr_flags.add(train, "--scale-factor", tc.model.scale_factor, "Multiplier on every channel width");
  tr_flags.add(train, "--skip-memory-levels", tc.model.skip_memory_levels, "Memory-equipped skips: 0, 1 or 2");
  auto* classes_opt = tr_flags.add(train, "--distance-classes", tc.model.distance_class_count,
                                   "Distance head width (default: derived from border and bin)");

  // infer
  InferArgs inf;
  Overrides inf_flags;
  auto* infer = app.add_subcommand("infer", "Segment sequences from their first-frame annotation");
  infer->add_option("--config", inf.config, "JSON file with infer fields");
  inf_flags.add(infer, "--checkpoint", inf.checkpoint, "Checkpoint directory");
  inf_flags.add(infer, "--data", inf.data, "Dataset directory: every sequence is segmented");
  inf_flags.add(infer, "--sequence", inf.sequence, "Directory of frame PNGs for a single sequence");
  inf_flags.add(infer, "--mask", inf.mask, "First-frame annotation for --sequence");
  inf_flags.add(infer, "--out", inf.out, "Output directory");
  inf_flags.add(infer, "--threshold", inf.threshold, "Minimum probability for a foreground label");
  inf_flags.add_flag(infer, "--heatmaps", inf.heatmaps, "Also write per-object probability heat-maps");

  // eval
  EvalArgs ev;
  Overrides ev_flags;
  auto* eval = app.add_subcommand("eval", "Score predicted masks against ground truth");
  eval->add_option("--config", ev.config, "JSON file with eval fields");
  ev_flags.add(eval, "--pred", ev.pred, "Prediction directory (<seq>/<frame>.png)");
  ev_flags.add(eval, "--gt", ev.gt, "Ground-truth dataset or annotation directory");
  ev_flags.add(eval, "--out", ev.out, "Write the JSON report here as well");

  // encode
  EncodeArgs enc;
  Overrides enc_flags;
  auto* encode = app.add_subcommand("encode", "Write the border-distance class map of a mask");
  encode->add_option("--config", enc.config, "JSON file with encode fields");
  enc_flags.add(encode, "--mask", enc.mask, "Annotation PNG");
  enc_flags.add(encode, "--out", enc.out, "Output greyscale PNG (a .json sidecar is written next to it)");
  enc_flags.add(encode, "--object", enc.object_id, "Object id to encode (0: every labelled pixel)");
  enc_flags.add(encode, "--border-pixels", enc.distance.border_pixels, "Truncation radius R");
  enc_flags.add(encode, "--bin-size", enc.distance.bin_size, "Bin width s");

  // visualize
  VisualizeArgs vis;
  Overrides vis_flags;
  auto* visualize = app.add_subcommand("visualize", "Overlay label maps on frames");
  visualize->add_option("--config", vis.config, "JSON file with visualize fields");
  vis_flags.add(visualize, "--frames", vis.frames, "Directory of frame PNGs");
  vis_flags.add(visualize, "--masks", vis.masks, "Directory of label PNGs with matching names");
  vis_flags.add(visualize, "--out", vis.out, "Output directory");
  vis_flags.add(visualize, "--alpha", vis.alpha, "Fill opacity");

  // ablate
  AblateArgs abl;
  Overrides abl_flags;
  auto* ablate = app.add_subcommand("ablate", "Run the skip-memory / multi-task / distance-bin grid");
  ablate->add_option("--config", abl.config, "JSON file with ablation fields");
  ablate->add_option("--out", abl.out, "Directory for report.json and table.txt");
  abl_flags.add(ablate, "--seeds", abl.ablation.seeds, "Training seeds");
  abl_flags.add(ablate, "--skip-memory-levels", abl.ablation.skip_memory_levels, "Skip-memory axis values");
  abl_flags.add(ablate, "--max-iterations", abl.ablation.train.max_iterations, "Iterations per run");
  abl_flags.add(ablate, "--learning-rate", abl.ablation.train.learning_rate, "Initial Adam step size");
  abl_flags.add(ablate, "--batch-size", abl.ablation.train.batch_size, "Sequences per batch");
  abl_flags.add(ablate, "--scale-factor", abl.ablation.train.model.scale_factor, "Channel width multiplier");
  abl_flags.add(ablate, "--train-sequences", abl.ablation.train_sequences, "Training sequences");
  abl_flags.add(ablate, "--test-sequences", abl.ablation.test_sequences, "Held-out sequences");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail(e.what(), "usage", 2);
  }

  try {
    if (*generate) return run_generate(gen, gen_flags);
    if (*train) return run_train(tr, tr_flags, classes_opt->count() > 0);
    if (*infer) return run_infer(inf, inf_flags);
    if (*eval) return run_eval(ev, ev_flags);
    if (*encode) return run_encode(enc, enc_flags);
    if (*visualize) return run_visualize(vis, vis_flags);
    if (*ablate) return run_ablate(abl, abl_flags);
  } catch (const ConfigError& e) {
    return fail(e.what(), "config", 2);
  } catch (const json::exception& e) {
    return fail(e.what(), "config", 2);
  } catch (const DataError& e) {
    return fail(e.what(), "data", 3);
  } catch (const TrainingDiverged& e) {
    return fail(e.what(), "diverged", 4);
  } catch (const std::exception& e) {
    return fail(e.what(), "internal", 1);
  }
  return 0;
}
