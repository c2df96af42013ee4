#include "vosmem/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <memory>
#include <vector>

namespace vosmem::io {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) throw DataError("cannot open " + path.string());
  return f;
}

enum class ReadMode { kRgb, kIndex };

struct RawImage {
  int width = 0;
  int height = 0;
  int channels = 0;  // 1 or 3
  int bit_depth = 8;
  std::vector<std::uint16_t> samples;
};

RawImage read_png(const std::filesystem::path& path, ReadMode mode) {
  FilePtr file = open_file(path, "rb");
  png_byte sig[8];
  if (std::fread(sig, 1, 8, file.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    throw DataError(path.string() + " is not a PNG file");
  }
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw DataError("png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw DataError("png_create_info_struct failed");
  }
  RawImage raw;
  std::vector<png_bytep> rows;
  std::vector<png_byte> buffer;
  volatile bool colour_annotation = false;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DataError("failed to decode " + path.string());
  }
  png_init_io(png, file.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);
  const png_uint_32 w = png_get_image_width(png, info);
  const png_uint_32 h = png_get_image_height(png, info);
  const int colour = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);

  if (mode == ReadMode::kRgb) {
    if (colour == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (colour == PNG_COLOR_TYPE_GRAY || colour == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_gray_to_rgb(png);
    if (colour == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (depth == 16) png_set_strip_16(png);
    if (colour & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_strip_alpha(png);
    raw.channels = 3;
    raw.bit_depth = 8;
  } else {
    if (colour == PNG_COLOR_TYPE_PALETTE) {
      if (depth < 8) png_set_packing(png);
      raw.bit_depth = 8;
    } else if (colour == PNG_COLOR_TYPE_GRAY) {
      if (depth < 8) png_set_expand_gray_1_2_4_to_8(png);
      if (depth == 16) png_set_swap(png);
      raw.bit_depth = depth == 16 ? 16 : 8;
    } else {
      colour_annotation = true;
    }
    raw.channels = 1;
  }
  if (!colour_annotation) {
    png_read_update_info(png, info);
    const std::size_t rowbytes = png_get_rowbytes(png, info);
    buffer.resize(rowbytes * h);
    rows.resize(h);
    for (png_uint_32 y = 0; y < h; ++y) rows[y] = buffer.data() + y * rowbytes;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
  }
  png_destroy_read_struct(&png, &info, nullptr);
  if (colour_annotation) throw DataError(path.string() + ": annotations must be palette or greyscale PNGs");

  raw.width = static_cast<int>(w);
  raw.height = static_cast<int>(h);
  const std::size_t count = static_cast<std::size_t>(w) * h * raw.channels;
  raw.samples.resize(count);
  if (raw.bit_depth == 16) {
    for (std::size_t i = 0; i < count; ++i) {
      std::uint16_t v;
      std::memcpy(&v, buffer.data() + 2 * i, 2);
      raw.samples[i] = v;
    }
  } else {
    for (std::size_t i = 0; i < count; ++i) raw.samples[i] = buffer[i];
  }
  return raw;
}

struct WriteSpec {
  int color_type;
  int bit_depth;
  int channels;
  bool palette;
};

void write_png(const std::filesystem::path& path, int width, int height, const WriteSpec& spec,
               const std::vector<png_byte>& buffer) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  FilePtr file = open_file(path, "wb");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw DataError("png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw DataError("png_create_info_struct failed");
  }
  std::vector<png_bytep> rows(height);
  std::vector<png_color> palette(256);
  const std::size_t rowbytes = static_cast<std::size_t>(width) * spec.channels * (spec.bit_depth / 8);
  for (int y = 0; y < height; ++y) rows[y] = const_cast<png_bytep>(buffer.data()) + y * rowbytes;
  if (spec.palette) {
    const auto& pal = annotation_palette();
    for (int i = 0; i < 256; ++i) palette[i] = {pal[i][0], pal[i][1], pal[i][2]};
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw DataError("failed to encode " + path.string());
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, width, height, spec.bit_depth, spec.color_type, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  if (spec.palette) png_set_PLTE(png, info, palette.data(), 256);
  png_write_info(png, info);
  if (spec.bit_depth == 16) png_set_swap(png);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace

const std::array<Color, 256>& annotation_palette() {
  static const std::array<Color, 256> palette = [] {
    std::array<Color, 256> p{};
    for (int i = 0; i < 256; ++i) {
      int r = 0, g = 0, b = 0, c = i;
      for (int j = 0; j < 8; ++j) {
        r |= ((c >> 0) & 1) << (7 - j);
        g |= ((c >> 1) & 1) << (7 - j);
        b |= ((c >> 2) & 1) << (7 - j);
        c >>= 3;
      }
      p[i] = {static_cast<std::uint8_t>(r), static_cast<std::uint8_t>(g), static_cast<std::uint8_t>(b)};
    }
    return p;
  }();
  return palette;
}

RgbImage read_rgb(const std::filesystem::path& path) {
  const RawImage raw = read_png(path, ReadMode::kRgb);
  RgbImage image(raw.height, raw.width);
  for (std::size_t i = 0; i < raw.samples.size(); ++i) image.bytes()[i] = static_cast<std::uint8_t>(raw.samples[i]);
  return image;
}

void write_rgb(const std::filesystem::path& path, const RgbImage& image) {
  std::vector<png_byte> buffer(image.bytes().begin(), image.bytes().end());
  write_png(path, image.width(), image.height(), {PNG_COLOR_TYPE_RGB, 8, 3, false}, buffer);
}

LabelMap read_labels(const std::filesystem::path& path) {
  const RawImage raw = read_png(path, ReadMode::kIndex);
  LabelMap labels(raw.height, raw.width);
  for (std::size_t i = 0; i < raw.samples.size(); ++i) labels[i] = raw.samples[i];
  return labels;
}

void write_labels(const std::filesystem::path& path, const LabelMap& labels) {
  std::vector<png_byte> buffer(labels.area());
  for (std::size_t i = 0; i < labels.area(); ++i) {
    if (labels[i] < 0 || labels[i] > 255) {
      throw DataError("label " + std::to_string(labels[i]) + " does not fit an 8-bit palette");
    }
    buffer[i] = static_cast<png_byte>(labels[i]);
  }
  write_png(path, labels.width(), labels.height(), {PNG_COLOR_TYPE_PALETTE, 8, 1, true}, buffer);
}

void write_gray(const std::filesystem::path& path, const Grid<int>& values) {
  int max_value = 0;
  for (int v : values.values()) {
    if (v < 0 || v > 65535) throw DataError("grey value " + std::to_string(v) + " out of 16-bit range");
    max_value = std::max(max_value, v);
  }
  if (max_value <= 255) {
    std::vector<png_byte> buffer(values.area());
    for (std::size_t i = 0; i < values.area(); ++i) buffer[i] = static_cast<png_byte>(values[i]);
    write_png(path, values.width(), values.height(), {PNG_COLOR_TYPE_GRAY, 8, 1, false}, buffer);
  } else {
    std::vector<png_byte> buffer(values.area() * 2);
    for (std::size_t i = 0; i < values.area(); ++i) {
      const auto v = static_cast<std::uint16_t>(values[i]);
      std::memcpy(buffer.data() + 2 * i, &v, 2);
    }
    write_png(path, values.width(), values.height(), {PNG_COLOR_TYPE_GRAY, 16, 1, false}, buffer);
  }
}

Color heat_color(double p) {
  p = std::clamp(p, 0.0, 1.0);
  auto lerp = [](double a, double b, double t) { return static_cast<std::uint8_t>(std::lround(a + (b - a) * t)); };
  if (p <= 0.5) {
    const double t = p / 0.5;
    return {lerp(0, 255, t), lerp(0, 255, t), 255};
  }
  const double t = (p - 0.5) / 0.5;
  return {255, lerp(255, 0, t), lerp(255, 0, t)};
}

RgbImage render_heatmap(const ProbabilityMap& probs) {
  RgbImage image(probs.height(), probs.width());
  for (int y = 0; y < probs.height(); ++y) {
    for (int x = 0; x < probs.width(); ++x) {
      const Color c = heat_color(probs(y, x));
      for (int k = 0; k < 3; ++k) image.at(y, x, k) = c[k];
    }
  }
  return image;
}

}  // namespace vosmem::io
