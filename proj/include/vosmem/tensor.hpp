#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "vosmem/error.hpp"

namespace vosmem {

struct Shape {
  int channels = 0;
  int height = 0;
  int width = 0;

  std::size_t plane() const { return static_cast<std::size_t>(height) * width; }
  std::size_t numel() const { return plane() * channels; }
  bool operator==(const Shape&) const = default;

  std::string str() const {
    return std::to_string(channels) + "x" + std::to_string(height) + "x" + std::to_string(width);
  }
};

/// Dense channel-major (C, H, W) feature grid. Scalars are 1x1x1 tensors and
/// convolution weights are stored as (Cout, Cin * k * k, 1).
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T{}) : shape_(shape), data_(shape.numel(), fill) {}
  Tensor(int channels, int height, int width, T fill = T{})
      : Tensor(Shape{channels, height, width}, fill) {}

  const Shape& shape() const { return shape_; }
  int channels() const { return shape_.channels; }
  int height() const { return shape_.height; }
  int width() const { return shape_.width; }
  std::size_t size() const { return data_.size(); }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }
  T& at(int c, int y, int x) { return data_[(static_cast<std::size_t>(c) * shape_.height + y) * shape_.width + x]; }
  const T& at(int c, int y, int x) const {
    return data_[(static_cast<std::size_t>(c) * shape_.height + y) * shape_.width + x];
  }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  T* channel(int c) { return data_.data() + static_cast<std::size_t>(c) * shape_.plane(); }
  const T* channel(int c) const { return data_.data() + static_cast<std::size_t>(c) * shape_.plane(); }
  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  /// Elementwise accumulate; shapes must agree.
  void add(const Tensor& other) {
    if (other.shape_ != shape_) throw ConfigError("tensor add: shape mismatch " + shape_.str() + " vs " + other.shape_.str());
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out(shape_);
    for (std::size_t i = 0; i < data_.size(); ++i) out[i] = static_cast<U>(data_[i]);
    return out;
  }

  bool operator==(const Tensor&) const = default;

 private:
  Shape shape_;
  std::vector<T> data_;
};

}  // namespace vosmem
