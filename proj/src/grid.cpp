#include "vosmem/grid.hpp"

#include <algorithm>
#include <set>

namespace vosmem {

RgbImage flip_horizontal(const RgbImage& image) {
  RgbImage out(image.height(), image.width());
  for (int y = 0; y < image.height(); ++y) {
    for (int x = 0; x < image.width(); ++x) {
      for (int c = 0; c < 3; ++c) out.at(y, image.width() - 1 - x, c) = image.at(y, x, c);
    }
  }
  return out;
}

BinaryMask object_mask(const LabelMap& labels, int object_id) {
  BinaryMask mask(labels.size());
  for (std::size_t i = 0; i < labels.area(); ++i) mask[i] = labels[i] == object_id ? 1 : 0;
  return mask;
}

std::vector<int> object_ids(const LabelMap& labels) {
  std::set<int> ids;
  for (int v : labels.values()) {
    if (v != 0) ids.insert(v);
  }
  return {ids.begin(), ids.end()};
}

std::size_t count_foreground(const BinaryMask& mask) {
  return static_cast<std::size_t>(std::count_if(mask.values().begin(), mask.values().end(),
                                                [](std::uint8_t v) { return v != 0; }));
}

void require_same_size(GridSize a, GridSize b, const char* what) {
  if (a != b) {
    throw DataError(std::string(what) + ": shape mismatch " + std::to_string(a.height) + "x" +
                    std::to_string(a.width) + " vs " + std::to_string(b.height) + "x" +
                    std::to_string(b.width));
  }
}

}  // namespace vosmem
