#pragma once

#include <span>
#include <vector>

#include "vosmem/grid.hpp"

namespace vosmem {

/// Truncation radius R and bin size s of the border-distance representation.
struct DistanceConfig {
  int border_pixels = 20;
  int bin_size = 1;

  /// Bins per side, floor(R / s).
  int bins() const { return border_pixels / bin_size; }
  /// 2 * floor(R / s) + 2: one saturation class per side plus the bins.
  int class_count() const { return 2 * bins() + 2; }
  /// Throws ConfigError unless 1 <= s <= R.
  void validate() const;

  bool operator==(const DistanceConfig&) const = default;
};

/// Signed Euclidean distance to the object contour, truncated at `radius`.
/// Positive on foreground pixels, negative on background pixels.
struct SignedDistanceField {
  Grid<double> values;
  int radius = 0;
};

/// Per-pixel class index in [0, class_count). Class index grows
/// monotonically with signed distance:
///   0                 outside, distance >= R
///   1 .. b            outside bins, farthest to nearest
///   b+1 .. 2b         inside bins, nearest to farthest
///   2b+1              inside, distance >= R
/// Bin k holds distances in [k*s, (k+1)*s); when R is not a multiple of s
/// the remainder [b*s, R) joins the last bin.
struct DistanceClassMap {
  Grid<int> classes;
  DistanceConfig config;
};

/// Foreground pixels with at least one in-image background 4-neighbour.
std::vector<Pixel> boundary_pixels(const BinaryMask& mask);
BinaryMask boundary_mask(const BinaryMask& mask);

/// Exact squared Euclidean distance from every pixel to the nearest non-zero
/// pixel of `features` (separable lower-envelope transform). Pixels get
/// `kNoFeature` when `features` is empty.
Grid<double> squared_distance_transform(const BinaryMask& features);
inline constexpr double kNoFeature = 1e20;

SignedDistanceField signed_distance(const BinaryMask& mask, int radius);

/// Class of a single signed distance value under `config`.
int distance_class(double signed_distance, const DistanceConfig& config);

DistanceClassMap quantize(const SignedDistanceField& field, const DistanceConfig& config);

DistanceClassMap encode_distance_classes(const BinaryMask& mask, const DistanceConfig& config);

/// Foreground iff the class is one of the inside classes (>= b + 1).
BinaryMask decode_to_binary(const DistanceClassMap& map);

/// Label each pixel with the 1-based index of the most probable object,
/// provided that probability reaches `threshold`; ties go to the lower
/// index. `size` is the output size and must match every map.
LabelMap merge_objects(std::span<const ProbabilityMap> per_object, GridSize size, double threshold = 0.5);

}  // namespace vosmem
