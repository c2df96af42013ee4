#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vosmem/grid.hpp"

namespace vosmem {

/// T frames with aligned multi-object annotations.
struct SequenceSample {
  std::string name;
  std::vector<RgbImage> frames;
  std::vector<LabelMap> masks;
  std::vector<int> object_ids;
  nlohmann::json metadata = nlohmann::json::object();

  std::size_t length() const { return frames.size(); }
  GridSize size() const { return frames.empty() ? GridSize{} : frames.front().size(); }
  bool operator==(const SequenceSample& o) const {
    return name == o.name && frames == o.frames && masks == o.masks && object_ids == o.object_ids;
  }
};

enum class ShapeKind { kDisk, kRectangle, kTriangle };

struct GeneratorConfig {
  int height = 64;
  int width = 96;
  int min_objects = 1;
  int max_objects = 3;
  std::vector<ShapeKind> shapes{ShapeKind::kDisk, ShapeKind::kRectangle, ShapeKind::kTriangle};
  /// Regular objects: extent (diameter) drawn from [min_size, max_size].
  double min_size = 12.0;
  double max_size = 28.0;
  /// Small-object band; each object is small with this probability, and
  /// `force_small_object` guarantees at least one per sequence.
  double small_probability = 0.3;
  double small_min_size = 3.0;
  double small_max_size = 8.0;
  bool force_small_object = false;
  /// Speed in pixels per frame, plus per-frame uniform jitter in [-jitter, jitter].
  double min_speed = 0.5;
  double max_speed = 2.5;
  double jitter = 0.3;
  double occluder_probability = 0.2;
  int occluder_width = 10;
  int min_length = 5;
  int max_length = 12;
  std::uint64_t seed = 0;

  void validate() const;
};

void to_json(nlohmann::json& j, const GeneratorConfig& c);
void from_json(const nlohmann::json& j, GeneratorConfig& c);

using Rgb = std::array<std::uint8_t, 3>;

/// Analytic trajectory of one object. Centres are (y, x) in continuous pixel
/// coordinates where pixel (r, c) covers [r, r+1) x [c, c+1).
struct ObjectTrack {
  ShapeKind kind = ShapeKind::kDisk;
  double size = 10.0;
  double aspect = 1.0;    // rectangle width / height
  double rotation = 0.0;  // triangle orientation, radians
  Rgb color{255, 255, 255};
  std::vector<std::array<double, 2>> centers;

  /// Whether the point (py, px) lies inside the shape at `frame`.
  bool contains(int frame, double py, double px) const;
};

/// Vertical bar sweeping horizontally over everything else.
struct Occluder {
  double width = 10.0;
  Rgb color{40, 40, 40};
  std::vector<double> left;  // per-frame left edge
};

struct SceneSpec {
  int height = 64;
  int width = 96;
  int length = 5;
  std::array<Rgb, 2> background{Rgb{90, 120, 150}, Rgb{150, 130, 90}};
  double background_angle = 0.0;
  std::uint64_t texture_seed = 0;
  std::vector<ObjectTrack> objects;  // z-order: later objects are drawn on top
  std::optional<Occluder> occluder;
};

/// Draws a scene description (trajectories, colours, occluder) from `config`.
SceneSpec sample_scene(const GeneratorConfig& config);

/// Rasterises a scene: pixel centres are tested against each shape, topmost
/// object wins, the occluder hides objects and is background in the masks.
SequenceSample render_scene(const SceneSpec& scene);

/// sample_scene + render_scene, retrying until every object is visible in
/// frame 0. Same config and seed give identical output.
SequenceSample generate_sequence(const GeneratorConfig& config);

/// Warnings from load_dataset go here; the default prints to stderr.
using WarningSink = std::function<void(const std::string&)>;

struct LoadOptions {
  std::optional<GridSize> resize;
  WarningSink warn;
};

/// Reads frames/<seq>/*.png and annotations/<seq>/*.png (indexed palette).
/// Sequences lacking annotations, or containing objects absent from frame 0,
/// are skipped with a warning.
std::vector<SequenceSample> load_dataset(const std::filesystem::path& root, const LoadOptions& options = {});

/// Writes the layout read by load_dataset plus `manifest` as manifest.json.
void write_dataset(const std::filesystem::path& root, const std::vector<SequenceSample>& samples,
                   const nlohmann::json& manifest);

/// Frame file stem for index t ("00000", "00001", ...).
std::string frame_name(std::size_t t);

RgbImage resize_bilinear(const RgbImage& image, GridSize size);
LabelMap resize_nearest(const LabelMap& labels, GridSize size);
SequenceSample resize_sample(const SequenceSample& sample, GridSize size);

/// One batch element: a temporal crop of one sequence, restricted to one
/// object (object_ids holds exactly that id; masks keep original labels).
/// metadata records "sequence_index", "object_id" and "start". All clips
/// share one length, drawn uniformly from `length_range` and lowered only
/// when fewer than `batch_size` sequences are long enough for it.
std::vector<SequenceSample> sample_batch(const std::vector<SequenceSample>& dataset, int batch_size,
                                         std::array<int, 2> length_range, std::mt19937_64& rng);

struct AugmentParams {
  double flip_probability = 0.5;
  double max_rotation_degrees = 10.0;
  double min_scale = 0.9;
  double max_scale = 1.1;
  double max_translation = 0.1;  // fraction of width / height
};

/// Similarity transform about the image centre, applied after an optional
/// horizontal flip.
struct AffineTransform {
  bool flip = false;
  double rotation_degrees = 0.0;
  double scale = 1.0;
  double translate_x = 0.0;  // pixels
  double translate_y = 0.0;
};

AffineTransform draw_transform(const AugmentParams& params, GridSize size, std::mt19937_64& rng);

/// Warps every frame (bilinear, edge clamp) and mask (nearest, background
/// outside) with the same transform.
SequenceSample apply_transform(const SequenceSample& sample, const AffineTransform& transform);

SequenceSample flip_sample(const SequenceSample& sample);

/// One transform per sequence, drawn from `rng`.
SequenceSample augment(const SequenceSample& sample, const AugmentParams& params, std::mt19937_64& rng);

}  // namespace vosmem
