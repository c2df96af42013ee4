#pragma once

#include <array>
#include <cstdint>
#include <filesystem>

#include "vosmem/grid.hpp"

namespace vosmem::io {

using Color = std::array<std::uint8_t, 3>;

/// The standard 256-entry segmentation-benchmark annotation palette
/// (bit-interleaved PASCAL VOC colour map; index 0 is black).
const std::array<Color, 256>& annotation_palette();

/// Reads any PNG as 8-bit RGB (palette/grey expanded, alpha dropped,
/// 16-bit stripped).
RgbImage read_rgb(const std::filesystem::path& path);
void write_rgb(const std::filesystem::path& path, const RgbImage& image);

/// Reads an annotation: palette PNGs yield raw palette indices, greyscale
/// PNGs yield grey levels. Colour PNGs are rejected with DataError.
LabelMap read_labels(const std::filesystem::path& path);

/// Writes labels 0..255 as an indexed-palette PNG.
void write_labels(const std::filesystem::path& path, const LabelMap& labels);

/// Writes values as greyscale; 8-bit when every value fits, else 16-bit.
void write_gray(const std::filesystem::path& path, const Grid<int>& values);

/// Diverging blue (0) - white (0.5) - red (1) rendering of a probability map.
RgbImage render_heatmap(const ProbabilityMap& probs);
Color heat_color(double p);

}  // namespace vosmem::io
