#include "vosmem/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <numbers>
#include <set>

#include "vosmem/image_io.hpp"

namespace vosmem {

namespace fs = std::filesystem;

namespace {

double uniform(std::mt19937_64& rng, double lo, double hi) {
  if (hi <= lo) return lo;
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

int uniform_int(std::mt19937_64& rng, int lo, int hi) {
  if (hi <= lo) return lo;
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

Rgb random_color(std::mt19937_64& rng) {
  return {static_cast<std::uint8_t>(uniform_int(rng, 30, 225)), static_cast<std::uint8_t>(uniform_int(rng, 30, 225)),
          static_cast<std::uint8_t>(uniform_int(rng, 30, 225))};
}

int color_distance(const Rgb& a, const Rgb& b) {
  int d = 0;
  for (int k = 0; k < 3; ++k) d += std::abs(static_cast<int>(a[k]) - static_cast<int>(b[k]));
  return d;
}

const char* shape_name(ShapeKind k) {
  switch (k) {
    case ShapeKind::kDisk:
      return "disk";
    case ShapeKind::kRectangle:
      return "rectangle";
    case ShapeKind::kTriangle:
      return "triangle";
  }
  return "disk";
}

ShapeKind parse_shape(const std::string& s) {
  if (s == "disk") return ShapeKind::kDisk;
  if (s == "rectangle") return ShapeKind::kRectangle;
  if (s == "triangle") return ShapeKind::kTriangle;
  throw ConfigError("unknown shape '" + s + "'");
}

// Reflects a coordinate into [lo, hi], flipping the velocity on bounce.
void reflect(double& pos, double& vel, double lo, double hi) {
  if (hi <= lo) {
    pos = (lo + hi) / 2;
    return;
  }
  for (int guard = 0; guard < 8 && (pos < lo || pos > hi); ++guard) {
    if (pos < lo) {
      pos = 2 * lo - pos;
      vel = -vel;
    } else if (pos > hi) {
      pos = 2 * hi - pos;
      vel = -vel;
    }
  }
  pos = std::clamp(pos, lo, hi);
}

}  // namespace

void GeneratorConfig::validate() const {
  if (height < 8 || width < 8) throw ConfigError("generator canvas must be at least 8x8");
  if (min_objects < 1 || max_objects < min_objects) throw ConfigError("generator object count range invalid");
  if (max_objects > 255) throw ConfigError("at most 255 objects fit an 8-bit annotation");
  if (shapes.empty()) throw ConfigError("generator needs at least one shape kind");
  if (!(min_size > 0) || max_size < min_size || !(small_min_size > 0) || small_max_size < small_min_size) {
    throw ConfigError("generator size ranges invalid");
  }
  if (max_size >= std::min(height, width) || small_max_size >= std::min(height, width)) {
    throw ConfigError("canvas " + std::to_string(height) + "x" + std::to_string(width) +
                      " too small for objects up to " + std::to_string(max_size) + " px");
  }
  if (min_speed < 0 || max_speed < min_speed || jitter < 0) throw ConfigError("generator speed range invalid");
  if (occluder_probability < 0 || occluder_probability > 1 || occluder_width < 1) {
    throw ConfigError("generator occluder parameters invalid");
  }
  if (min_length < 1 || max_length < min_length) throw ConfigError("generator length range invalid");
}

void to_json(nlohmann::json& j, const GeneratorConfig& c) {
  std::vector<std::string> shapes;
  for (auto s : c.shapes) shapes.emplace_back(shape_name(s));
  j = nlohmann::json{{"height", c.height},
                     {"width", c.width},
                     {"min_objects", c.min_objects},
                     {"max_objects", c.max_objects},
                     {"shapes", shapes},
                     {"min_size", c.min_size},
                     {"max_size", c.max_size},
                     {"small_probability", c.small_probability},
                     {"small_min_size", c.small_min_size},
                     {"small_max_size", c.small_max_size},
                     {"force_small_object", c.force_small_object},
                     {"min_speed", c.min_speed},
                     {"max_speed", c.max_speed},
                     {"jitter", c.jitter},
                     {"occluder_probability", c.occluder_probability},
                     {"occluder_width", c.occluder_width},
                     {"min_length", c.min_length},
                     {"max_length", c.max_length},
                     {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, GeneratorConfig& c) {
  c.height = j.value("height", c.height);
  c.width = j.value("width", c.width);
  c.min_objects = j.value("min_objects", c.min_objects);
  c.max_objects = j.value("max_objects", c.max_objects);
  if (j.contains("shapes")) {
    c.shapes.clear();
    for (const auto& s : j.at("shapes")) c.shapes.push_back(parse_shape(s.get<std::string>()));
  }
  c.min_size = j.value("min_size", c.min_size);
  c.max_size = j.value("max_size", c.max_size);
  c.small_probability = j.value("small_probability", c.small_probability);
  c.small_min_size = j.value("small_min_size", c.small_min_size);
  c.small_max_size = j.value("small_max_size", c.small_max_size);
  c.force_small_object = j.value("force_small_object", c.force_small_object);
  c.min_speed = j.value("min_speed", c.min_speed);
  c.max_speed = j.value("max_speed", c.max_speed);
  c.jitter = j.value("jitter", c.jitter);
  c.occluder_probability = j.value("occluder_probability", c.occluder_probability);
  c.occluder_width = j.value("occluder_width", c.occluder_width);
  c.min_length = j.value("min_length", c.min_length);
  c.max_length = j.value("max_length", c.max_length);
  c.seed = j.value("seed", c.seed);
}

bool ObjectTrack::contains(int frame, double py, double px) const {
  const double cy = centers.at(frame)[0];
  const double cx = centers.at(frame)[1];
  const double r = size / 2.0;
  switch (kind) {
    case ShapeKind::kDisk:
      return (py - cy) * (py - cy) + (px - cx) * (px - cx) <= r * r;
    case ShapeKind::kRectangle: {
      const double half_w = r * std::sqrt(aspect);
      const double half_h = r / std::sqrt(aspect);
      return std::abs(px - cx) <= half_w && std::abs(py - cy) <= half_h;
    }
    case ShapeKind::kTriangle: {
      std::array<std::array<double, 2>, 3> v;
      for (int k = 0; k < 3; ++k) {
        const double a = rotation + 2.0 * std::numbers::pi * k / 3.0;
        v[k] = {cy + r * std::sin(a), cx + r * std::cos(a)};
      }
      auto cross = [&](int a, int b) {
        return (v[b][1] - v[a][1]) * (py - v[a][0]) - (v[b][0] - v[a][0]) * (px - v[a][1]);
      };
      const double c0 = cross(0, 1);
      const double c1 = cross(1, 2);
      const double c2 = cross(2, 0);
      return (c0 >= 0 && c1 >= 0 && c2 >= 0) || (c0 <= 0 && c1 <= 0 && c2 <= 0);
    }
  }
  return false;
}

SceneSpec sample_scene(const GeneratorConfig& config) {
  config.validate();
  std::mt19937_64 rng(config.seed);
  SceneSpec scene;
  scene.height = config.height;
  scene.width = config.width;
  scene.length = uniform_int(rng, config.min_length, config.max_length);
  scene.background = {random_color(rng), random_color(rng)};
  scene.background_angle = uniform(rng, 0.0, 2.0 * std::numbers::pi);
  scene.texture_seed = rng();

  const int count = uniform_int(rng, config.min_objects, config.max_objects);
  const int forced_small = config.force_small_object ? uniform_int(rng, 0, count - 1) : -1;
  for (int i = 0; i < count; ++i) {
    ObjectTrack obj;
    obj.kind = config.shapes[uniform_int(rng, 0, static_cast<int>(config.shapes.size()) - 1)];
    const bool small = i == forced_small || uniform(rng, 0.0, 1.0) < config.small_probability;
    obj.size = small ? uniform(rng, config.small_min_size, config.small_max_size)
                     : uniform(rng, config.min_size, config.max_size);
    obj.aspect = uniform(rng, 0.6, 1.6);
    obj.rotation = uniform(rng, 0.0, 2.0 * std::numbers::pi);
    do {
      obj.color = random_color(rng);
    } while (color_distance(obj.color, scene.background[0]) < 120 || color_distance(obj.color, scene.background[1]) < 120);

    const double margin_y = std::min(obj.size / 2.0, config.height / 4.0);
    const double margin_x = std::min(obj.size / 2.0, config.width / 4.0);
    double y = uniform(rng, margin_y, config.height - margin_y);
    double x = uniform(rng, margin_x, config.width - margin_x);
    const double speed = uniform(rng, config.min_speed, config.max_speed);
    const double heading = uniform(rng, 0.0, 2.0 * std::numbers::pi);
    double vy = speed * std::sin(heading);
    double vx = speed * std::cos(heading);
    for (int t = 0; t < scene.length; ++t) {
      obj.centers.push_back({y, x});
      y += vy + uniform(rng, -config.jitter, config.jitter);
      x += vx + uniform(rng, -config.jitter, config.jitter);
      reflect(y, vy, margin_y, config.height - margin_y);
      reflect(x, vx, margin_x, config.width - margin_x);
    }
    scene.objects.push_back(std::move(obj));
  }

  if (uniform(rng, 0.0, 1.0) < config.occluder_probability) {
    Occluder occ;
    occ.width = config.occluder_width;
    occ.color = random_color(rng);
    // Sweeps from one side so that it crosses the canvas within the sequence.
    const bool left_to_right = uniform(rng, 0.0, 1.0) < 0.5;
    const double travel = config.width + occ.width;
    const double speed = travel / std::max(1, scene.length - 1);
    const double start = left_to_right ? -occ.width - uniform(rng, 0.0, config.width / 2.0)
                                       : config.width + uniform(rng, 0.0, config.width / 2.0);
    for (int t = 0; t < scene.length; ++t) occ.left.push_back(start + (left_to_right ? speed : -speed) * t);
    scene.occluder = occ;
  }
  return scene;
}

SequenceSample render_scene(const SceneSpec& scene) {
  SequenceSample sample;
  std::mt19937_64 texture(scene.texture_seed);
  // Static per-pixel texture noise shared by all frames.
  Grid<int> noise(scene.height, scene.width);
  for (auto& v : noise.values()) v = uniform_int(texture, -12, 12);

  const double dir_y = std::sin(scene.background_angle);
  const double dir_x = std::cos(scene.background_angle);
  const double span = std::abs(dir_y) * scene.height + std::abs(dir_x) * scene.width;
  const double offset = std::min(0.0, dir_y * scene.height) + std::min(0.0, dir_x * scene.width);

  for (int t = 0; t < scene.length; ++t) {
    RgbImage frame(scene.height, scene.width);
    LabelMap labels(scene.height, scene.width);
    for (int y = 0; y < scene.height; ++y) {
      for (int x = 0; x < scene.width; ++x) {
        const double py = y + 0.5;
        const double px = x + 0.5;
        const double a = std::clamp((dir_y * py + dir_x * px - offset) / span, 0.0, 1.0);
        Rgb color;
        for (int k = 0; k < 3; ++k) {
          color[k] = static_cast<std::uint8_t>(
              std::lround((1 - a) * scene.background[0][k] + a * scene.background[1][k]));
        }
        int label = 0;
        for (std::size_t o = 0; o < scene.objects.size(); ++o) {
          if (scene.objects[o].contains(t, py, px)) {
            label = static_cast<int>(o) + 1;
            color = scene.objects[o].color;
          }
        }
        if (scene.occluder) {
          const double left = scene.occluder->left[t];
          if (px >= left && px < left + scene.occluder->width) {
            label = 0;
            color = scene.occluder->color;
          }
        }
        for (int k = 0; k < 3; ++k) frame.at(y, x, k) = static_cast<std::uint8_t>(std::clamp(color[k] + noise(y, x), 0, 255));
        labels(y, x) = label;
      }
    }
    sample.frames.push_back(std::move(frame));
    sample.masks.push_back(std::move(labels));
  }
  for (std::size_t o = 0; o < scene.objects.size(); ++o) sample.object_ids.push_back(static_cast<int>(o) + 1);
  return sample;
}

SequenceSample generate_sequence(const GeneratorConfig& config) {
  config.validate();
  GeneratorConfig attempt = config;
  for (int tries = 0; tries < 100; ++tries) {
    const SceneSpec scene = sample_scene(attempt);
    SequenceSample sample = render_scene(scene);
    const std::vector<int> visible = object_ids(sample.masks.front());
    if (visible.size() == scene.objects.size()) {
      nlohmann::json shapes = nlohmann::json::array();
      for (const auto& o : scene.objects) shapes.push_back({{"shape", shape_name(o.kind)}, {"size", o.size}});
      sample.metadata = {{"seed", config.seed},
                         {"attempt", tries},
                         {"generator", config},
                         {"objects", shapes},
                         {"occluder", scene.occluder.has_value()}};
      return sample;
    }
    // Derive a new, deterministic seed for the retry.
    attempt.seed = std::mt19937_64(attempt.seed ^ 0x5bd1e995u)();
  }
  throw ConfigError("could not place " + std::to_string(config.max_objects) + " visible objects on a " +
                    std::to_string(config.height) + "x" + std::to_string(config.width) + " canvas");
}

std::string frame_name(std::size_t t) {
  std::string s = std::to_string(t);
  return std::string(5 - std::min<std::size_t>(5, s.size()), '0') + s;
}

RgbImage resize_bilinear(const RgbImage& image, GridSize size) {
  if (size == image.size()) return image;
  RgbImage out(size.height, size.width);
  const double sy = static_cast<double>(image.height()) / size.height;
  const double sx = static_cast<double>(image.width()) / size.width;
  for (int y = 0; y < size.height; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, image.height() - 1.0);
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, image.height() - 1);
    const double wy = fy - y0;
    for (int x = 0; x < size.width; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, image.width() - 1.0);
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, image.width() - 1);
      const double wx = fx - x0;
      for (int c = 0; c < 3; ++c) {
        const double v = (1 - wy) * ((1 - wx) * image.at(y0, x0, c) + wx * image.at(y0, x1, c)) +
                         wy * ((1 - wx) * image.at(y1, x0, c) + wx * image.at(y1, x1, c));
        out.at(y, x, c) = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
      }
    }
  }
  return out;
}

LabelMap resize_nearest(const LabelMap& labels, GridSize size) {
  if (size == labels.size()) return labels;
  LabelMap out(size);
  for (int y = 0; y < size.height; ++y) {
    const int sy = std::min(labels.height() - 1, static_cast<int>((y + 0.5) * labels.height() / size.height));
    for (int x = 0; x < size.width; ++x) {
      const int sx = std::min(labels.width() - 1, static_cast<int>((x + 0.5) * labels.width() / size.width));
      out(y, x) = labels(sy, sx);
    }
  }
  return out;
}

SequenceSample resize_sample(const SequenceSample& sample, GridSize size) {
  SequenceSample out = sample;
  for (auto& f : out.frames) f = resize_bilinear(f, size);
  for (auto& m : out.masks) m = resize_nearest(m, size);
  return out;
}

std::vector<SequenceSample> load_dataset(const fs::path& root, const LoadOptions& options) {
  const WarningSink warn = options.warn ? options.warn : [](const std::string& msg) {
    std::cerr << "warning: " << msg << "\n";
  };
  const fs::path frames_root = root / "frames";
  const fs::path ann_root = root / "annotations";
  if (!fs::is_directory(frames_root)) throw DataError("no frames/ directory under " + root.string());

  std::vector<fs::path> seq_dirs;
  for (const auto& e : fs::directory_iterator(frames_root)) {
    if (e.is_directory()) seq_dirs.push_back(e.path());
  }
  std::sort(seq_dirs.begin(), seq_dirs.end());

  std::vector<SequenceSample> out;
  for (const auto& dir : seq_dirs) {
    const std::string name = dir.filename().string();
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir)) {
      if (e.path().extension() == ".png") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) {
      warn("sequence '" + name + "' has no frames; skipped");
      continue;
    }
    SequenceSample sample;
    sample.name = name;
    bool complete = true;
    for (const auto& f : files) {
      const fs::path ann = ann_root / name / f.filename();
      if (!fs::exists(ann)) {
        warn("sequence '" + name + "' lacks annotation " + ann.filename().string() + "; skipped");
        complete = false;
        break;
      }
      RgbImage frame = io::read_rgb(f);
      LabelMap labels = io::read_labels(ann);
      if (labels.size() != frame.size()) {
        warn("sequence '" + name + "': annotation size differs from frame " + f.filename().string() + "; skipped");
        complete = false;
        break;
      }
      if (options.resize) {
        frame = resize_bilinear(frame, *options.resize);
        labels = resize_nearest(labels, *options.resize);
      }
      sample.frames.push_back(std::move(frame));
      sample.masks.push_back(std::move(labels));
    }
    if (!complete) continue;

    sample.object_ids = object_ids(sample.masks.front());
    std::set<int> first(sample.object_ids.begin(), sample.object_ids.end());
    std::set<int> later;
    for (const auto& m : sample.masks) {
      for (int id : object_ids(m)) later.insert(id);
    }
    bool missing = false;
    for (int id : later) {
      if (!first.count(id)) {
        warn("sequence '" + name + "': object " + std::to_string(id) + " has no frame-0 annotation; skipped");
        missing = true;
        break;
      }
    }
    if (missing) continue;
    if (sample.object_ids.empty()) {
      warn("sequence '" + name + "' has no annotated object in frame 0; skipped");
      continue;
    }
    sample.metadata = {{"source", dir.string()}};
    out.push_back(std::move(sample));
  }
  return out;
}

void write_dataset(const fs::path& root, const std::vector<SequenceSample>& samples, const nlohmann::json& manifest) {
  for (const auto& s : samples) {
    for (std::size_t t = 0; t < s.length(); ++t) {
      io::write_rgb(root / "frames" / s.name / (frame_name(t) + ".png"), s.frames[t]);
      io::write_labels(root / "annotations" / s.name / (frame_name(t) + ".png"), s.masks[t]);
    }
  }
  fs::create_directories(root);
  std::ofstream(root / "manifest.json") << manifest.dump(2) << "\n";
}

std::vector<SequenceSample> sample_batch(const std::vector<SequenceSample>& dataset, int batch_size,
                                         std::array<int, 2> length_range, std::mt19937_64& rng) {
  if (batch_size < 1) throw ConfigError("batch size must be positive");
  if (static_cast<std::size_t>(batch_size) > dataset.size()) {
    throw ConfigError("batch size " + std::to_string(batch_size) + " exceeds the " + std::to_string(dataset.size()) +
                      " distinct sequences available");
  }
  if (length_range[0] < 2 || length_range[1] < length_range[0]) throw ConfigError("sequence length range invalid");

  std::vector<std::size_t> order(dataset.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::shuffle(order.begin(), order.end(), rng);
  const int wanted = uniform_int(rng, length_range[0], length_range[1]);

  auto starts_for = [](const SequenceSample& seq, int id, int length) {
    std::vector<int> starts;
    for (int s = 0; s + length <= static_cast<int>(seq.length()); ++s) {
      const auto& m = seq.masks[s].values();
      if (std::find(m.begin(), m.end(), id) != m.end()) starts.push_back(s);
    }
    return starts;
  };
  auto admits = [&](const SequenceSample& seq, int length) {
    for (int id : seq.object_ids) {
      if (!starts_for(seq, id, length).empty()) return true;
    }
    return false;
  };

  // Every clip in a batch has the same length: the drawn one, or the longest
  // shorter length that enough sequences can supply.
  for (int length = wanted; length >= 2; --length) {
    std::vector<std::size_t> chosen;
    for (std::size_t idx : order) {
      if (static_cast<int>(chosen.size()) == batch_size) break;
      if (admits(dataset[idx], length)) chosen.push_back(idx);
    }
    if (static_cast<int>(chosen.size()) < batch_size) continue;

    std::vector<SequenceSample> batch;
    for (std::size_t idx : chosen) {
      const SequenceSample& seq = dataset[idx];
      std::vector<int> candidates = seq.object_ids;
      std::shuffle(candidates.begin(), candidates.end(), rng);
      for (int id : candidates) {
        const std::vector<int> starts = starts_for(seq, id, length);
        if (starts.empty()) continue;
        const int start = starts[uniform_int(rng, 0, static_cast<int>(starts.size()) - 1)];
        SequenceSample clip;
        clip.name = seq.name;
        clip.frames.assign(seq.frames.begin() + start, seq.frames.begin() + start + length);
        clip.masks.assign(seq.masks.begin() + start, seq.masks.begin() + start + length);
        clip.object_ids = {id};
        clip.metadata = {{"sequence_index", idx}, {"object_id", id}, {"start", start}};
        batch.push_back(std::move(clip));
        break;
      }
    }
    return batch;
  }
  throw DataError("fewer than " + std::to_string(batch_size) + " sequences admit a valid crop of two or more frames");
}

AffineTransform draw_transform(const AugmentParams& params, GridSize size, std::mt19937_64& rng) {
  AffineTransform t;
  t.flip = uniform(rng, 0.0, 1.0) < params.flip_probability;
  t.rotation_degrees = uniform(rng, -params.max_rotation_degrees, params.max_rotation_degrees);
  t.scale = uniform(rng, params.min_scale, params.max_scale);
  t.translate_x = uniform(rng, -params.max_translation, params.max_translation) * size.width;
  t.translate_y = uniform(rng, -params.max_translation, params.max_translation) * size.height;
  return t;
}

SequenceSample apply_transform(const SequenceSample& sample, const AffineTransform& transform) {
  SequenceSample out = sample;
  if (sample.frames.empty()) return out;
  const int h = sample.size().height;
  const int w = sample.size().width;
  const double cy = h / 2.0;
  const double cx = w / 2.0;
  const double theta = transform.rotation_degrees * std::numbers::pi / 180.0;
  const double cos_t = std::cos(theta);
  const double sin_t = std::sin(theta);

  // Output pixel centre -> source coordinate (inverse similarity, then undo flip).
  Grid<std::array<double, 2>> source(h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double dy = y + 0.5 - cy - transform.translate_y;
      const double dx = x + 0.5 - cx - transform.translate_x;
      double sy = (cos_t * dy - sin_t * dx) / transform.scale + cy;
      double sx = (sin_t * dy + cos_t * dx) / transform.scale + cx;
      if (transform.flip) sx = w - sx;
      source(y, x) = {sy, sx};
    }
  }

  for (std::size_t t = 0; t < sample.length(); ++t) {
    const RgbImage& src = sample.frames[t];
    const LabelMap& lab = sample.masks[t];
    RgbImage frame(h, w);
    LabelMap labels(h, w);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const auto [sy, sx] = source(y, x);
        const int ny = static_cast<int>(std::floor(sy));
        const int nx = static_cast<int>(std::floor(sx));
        labels(y, x) = lab.contains(ny, nx) ? lab(ny, nx) : 0;

        const double fy = std::clamp(sy - 0.5, 0.0, h - 1.0);
        const double fx = std::clamp(sx - 0.5, 0.0, w - 1.0);
        const int y0 = static_cast<int>(fy);
        const int x0 = static_cast<int>(fx);
        const int y1 = std::min(y0 + 1, h - 1);
        const int x1 = std::min(x0 + 1, w - 1);
        const double wy = fy - y0;
        const double wx = fx - x0;
        for (int c = 0; c < 3; ++c) {
          const double v = (1 - wy) * ((1 - wx) * src.at(y0, x0, c) + wx * src.at(y0, x1, c)) +
                           wy * ((1 - wx) * src.at(y1, x0, c) + wx * src.at(y1, x1, c));
          frame.at(y, x, c) = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
        }
      }
    }
    out.frames[t] = std::move(frame);
    out.masks[t] = std::move(labels);
  }
  return out;
}

SequenceSample flip_sample(const SequenceSample& sample) {
  SequenceSample out = sample;
  for (auto& f : out.frames) f = flip_horizontal(f);
  for (auto& m : out.masks) m = flip_horizontal(m);
  return out;
}

SequenceSample augment(const SequenceSample& sample, const AugmentParams& params, std::mt19937_64& rng) {
  return apply_transform(sample, draw_transform(params, sample.size(), rng));
}

}  // namespace vosmem
