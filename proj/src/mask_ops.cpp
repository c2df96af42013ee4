#include "vosmem/mask_ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace vosmem {

void DistanceConfig::validate() const {
  if (border_pixels < 1 || bin_size < 1 || bin_size > border_pixels) {
    throw ConfigError("distance config requires 1 <= bin_size <= border_pixels, got border_pixels=" +
                      std::to_string(border_pixels) + " bin_size=" + std::to_string(bin_size));
  }
}

std::vector<Pixel> boundary_pixels(const BinaryMask& mask) {
  std::vector<Pixel> out;
  const BinaryMask b = boundary_mask(mask);
  for (int y = 0; y < b.height(); ++y) {
    for (int x = 0; x < b.width(); ++x) {
      if (b(y, x)) out.push_back({y, x});
    }
  }
  return out;
}

BinaryMask boundary_mask(const BinaryMask& mask) {
  BinaryMask out(mask.size());
  const int h = mask.height();
  const int w = mask.width();
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!mask(y, x)) continue;
      const bool edge = (y > 0 && !mask(y - 1, x)) || (y + 1 < h && !mask(y + 1, x)) ||
                        (x > 0 && !mask(y, x - 1)) || (x + 1 < w && !mask(y, x + 1));
      out(y, x) = edge ? 1 : 0;
    }
  }
  return out;
}

namespace {

// 1-D squared distance transform of a sampled function (lower envelope of
// parabolas rooted at each sample).
void envelope_1d(const double* f, int n, double* d, std::vector<int>& v, std::vector<double>& z) {
  v.assign(n, 0);
  z.assign(n + 1, 0.0);
  int k = -1;
  for (int q = 0; q < n; ++q) {
    if (f[q] >= kNoFeature) continue;
    if (k < 0) {
      k = 0;
      v[0] = q;
      z[0] = -kNoFeature;
      z[1] = kNoFeature;
      continue;
    }
    double s;
    while (true) {
      const int p = v[k];
      s = ((f[q] + static_cast<double>(q) * q) - (f[p] + static_cast<double>(p) * p)) / (2.0 * (q - p));
      if (s <= z[k] && k > 0) {
        --k;
      } else {
        break;
      }
    }
    if (s <= z[k]) {
      // k == 0 and the new parabola dominates everywhere.
      v[0] = q;
      z[0] = -kNoFeature;
      z[1] = kNoFeature;
      continue;
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = kNoFeature;
  }
  if (k < 0) {
    std::fill(d, d + n, kNoFeature);
    return;
  }
  int j = 0;
  for (int q = 0; q < n; ++q) {
    while (z[j + 1] < q) ++j;
    const double dq = q - v[j];
    d[q] = dq * dq + f[v[j]];
  }
}

}  // namespace

Grid<double> squared_distance_transform(const BinaryMask& features) {
  const int h = features.height();
  const int w = features.width();
  Grid<double> out(features.size(), kNoFeature);
  std::vector<int> v;
  std::vector<double> z;
  std::vector<double> f(std::max(h, w)), d(std::max(h, w));

  for (int x = 0; x < w; ++x) {
    for (int y = 0; y < h; ++y) f[y] = features(y, x) ? 0.0 : kNoFeature;
    envelope_1d(f.data(), h, d.data(), v, z);
    for (int y = 0; y < h; ++y) out(y, x) = d[y];
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) f[x] = out(y, x);
    envelope_1d(f.data(), w, d.data(), v, z);
    for (int x = 0; x < w; ++x) out(y, x) = d[x] >= kNoFeature ? kNoFeature : d[x];
  }
  return out;
}

SignedDistanceField signed_distance(const BinaryMask& mask, int radius) {
  if (radius < 1) throw ConfigError("signed distance radius must be >= 1");
  const Grid<double> sq = squared_distance_transform(boundary_mask(mask));
  SignedDistanceField field{Grid<double>(mask.size()), radius};
  for (std::size_t i = 0; i < mask.area(); ++i) {
    const double dist = std::min(std::sqrt(sq[i]), static_cast<double>(radius));
    field.values[i] = mask[i] ? dist : -dist;
  }
  return field;
}

int distance_class(double signed_distance, const DistanceConfig& config) {
  const int b = config.bins();
  const double r = config.border_pixels;
  const double d = std::abs(signed_distance);
  const bool inside = signed_distance >= 0.0;
  if (d >= r) return inside ? 2 * b + 1 : 0;
  const int bin = std::min(static_cast<int>(std::floor(d / config.bin_size)), b - 1);
  return inside ? b + 1 + bin : b - bin;
}

DistanceClassMap quantize(const SignedDistanceField& field, const DistanceConfig& config) {
  config.validate();
  if (field.radius != config.border_pixels) {
    throw ConfigError("distance field radius " + std::to_string(field.radius) + " does not match border_pixels " +
                      std::to_string(config.border_pixels));
  }
  DistanceClassMap map{Grid<int>(field.values.size()), config};
  for (std::size_t i = 0; i < field.values.area(); ++i) map.classes[i] = distance_class(field.values[i], config);
  return map;
}

DistanceClassMap encode_distance_classes(const BinaryMask& mask, const DistanceConfig& config) {
  config.validate();
  return quantize(signed_distance(mask, config.border_pixels), config);
}

BinaryMask decode_to_binary(const DistanceClassMap& map) {
  const int k = map.config.class_count();
  const int first_inside = map.config.bins() + 1;
  BinaryMask mask(map.classes.size());
  for (std::size_t i = 0; i < mask.area(); ++i) {
    const int c = map.classes[i];
    if (c < 0 || c >= k) {
      throw DataError("distance class " + std::to_string(c) + " outside [0, " + std::to_string(k) + ")");
    }
    mask[i] = c >= first_inside ? 1 : 0;
  }
  return mask;
}

LabelMap merge_objects(std::span<const ProbabilityMap> per_object, GridSize size, double threshold) {
  LabelMap labels(size);
  for (const auto& map : per_object) require_same_size(map.size(), size, "merge_objects");
  for (std::size_t i = 0; i < labels.area(); ++i) {
    int best = -1;
    double best_p = 0.0;
    for (std::size_t o = 0; o < per_object.size(); ++o) {
      const double p = per_object[o][i];
      if (best < 0 || p > best_p) {
        best = static_cast<int>(o);
        best_p = p;
      }
    }
    labels[i] = (best >= 0 && best_p >= threshold) ? best + 1 : 0;
  }
  return labels;
}

}  // namespace vosmem
