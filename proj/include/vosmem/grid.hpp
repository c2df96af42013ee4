#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "vosmem/error.hpp"

namespace vosmem {

struct GridSize {
  int height = 0;
  int width = 0;

  std::size_t area() const { return static_cast<std::size_t>(height) * width; }
  bool operator==(const GridSize&) const = default;
};

struct Pixel {
  int y = 0;
  int x = 0;

  bool operator==(const Pixel&) const = default;
  auto operator<=>(const Pixel&) const = default;
};

/// Row-major 2-D grid of values. The common carrier for masks, label maps,
/// probability maps and distance fields.
template <typename T>
class Grid {
 public:
  using value_type = T;

  Grid() = default;
  Grid(int height, int width, T fill = T{}) : size_{height, width}, values_(size_.area(), fill) {
    if (height <= 0 || width <= 0) {
      throw ConfigError("grid dimensions must be positive, got " + std::to_string(height) + "x" +
                        std::to_string(width));
    }
  }
  explicit Grid(GridSize size, T fill = T{}) : Grid(size.height, size.width, fill) {}

  int height() const { return size_.height; }
  int width() const { return size_.width; }
  GridSize size() const { return size_; }
  std::size_t area() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

  T& operator()(int y, int x) { return values_[static_cast<std::size_t>(y) * size_.width + x]; }
  const T& operator()(int y, int x) const {
    return values_[static_cast<std::size_t>(y) * size_.width + x];
  }
  T& operator[](std::size_t i) { return values_[i]; }
  const T& operator[](std::size_t i) const { return values_[i]; }

  bool contains(int y, int x) const { return y >= 0 && x >= 0 && y < size_.height && x < size_.width; }

  std::span<T> values() { return values_; }
  std::span<const T> values() const { return values_; }
  T* data() { return values_.data(); }
  const T* data() const { return values_.data(); }

  bool operator==(const Grid&) const = default;

 private:
  GridSize size_;
  std::vector<T> values_;
};

/// Foreground = 1, background = 0.
using BinaryMask = Grid<std::uint8_t>;
/// Per-pixel foreground probability in [0, 1].
using ProbabilityMap = Grid<double>;
/// 0 = background, i >= 1 = object id.
using LabelMap = Grid<int>;

/// 8-bit interleaved RGB image.
class RgbImage {
 public:
  RgbImage() = default;
  RgbImage(int height, int width) : size_{height, width}, bytes_(size_.area() * 3, 0) {
    if (height <= 0 || width <= 0) throw ConfigError("image dimensions must be positive");
  }

  int height() const { return size_.height; }
  int width() const { return size_.width; }
  GridSize size() const { return size_; }

  std::uint8_t& at(int y, int x, int channel) {
    return bytes_[(static_cast<std::size_t>(y) * size_.width + x) * 3 + channel];
  }
  std::uint8_t at(int y, int x, int channel) const {
    return bytes_[(static_cast<std::size_t>(y) * size_.width + x) * 3 + channel];
  }
  std::span<std::uint8_t> bytes() { return bytes_; }
  std::span<const std::uint8_t> bytes() const { return bytes_; }

  bool operator==(const RgbImage&) const = default;

 private:
  GridSize size_;
  std::vector<std::uint8_t> bytes_;
};

template <typename T>
Grid<T> flip_horizontal(const Grid<T>& grid) {
  Grid<T> out(grid.size());
  for (int y = 0; y < grid.height(); ++y) {
    for (int x = 0; x < grid.width(); ++x) out(y, grid.width() - 1 - x) = grid(y, x);
  }
  return out;
}

RgbImage flip_horizontal(const RgbImage& image);

/// Binary mask of the pixels carrying `object_id`.
BinaryMask object_mask(const LabelMap& labels, int object_id);

/// Sorted distinct non-zero labels.
std::vector<int> object_ids(const LabelMap& labels);

std::size_t count_foreground(const BinaryMask& mask);

void require_same_size(GridSize a, GridSize b, const char* what);

}  // namespace vosmem
