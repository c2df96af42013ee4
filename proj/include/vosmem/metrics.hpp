#pragma once

#include <optional>
#include <span>

#include "vosmem/grid.hpp"

namespace vosmem {

struct FrameScore {
  double j = 0.0;
  double f = 0.0;
};

struct SequenceScore {
  double j_mean = 0.0;
  double f_mean = 0.0;
  double overall = 0.0;  // (j_mean + f_mean) / 2
};

/// Intersection over union; 1 when both masks are empty.
double region_similarity(const BinaryMask& pred, const BinaryMask& gt);

/// Boundary F-measure. Each boundary is dilated by a disk of radius
/// `tolerance`; precision counts predicted boundary pixels near the true
/// boundary and recall the converse. 1 when both boundaries are empty, 0 when
/// exactly one is.
double contour_accuracy(const BinaryMask& pred, const BinaryMask& gt, double tolerance);

/// ceil(0.008 * image diagonal), the customary benchmark tolerance.
double default_contour_tolerance(GridSize size);

FrameScore score_frame(const BinaryMask& pred, const BinaryMask& gt, double tolerance);

/// Averages per-frame scores; frame 0 is excluded when `skip_first` since its
/// mask is the given one-shot annotation. `tolerance` defaults to
/// default_contour_tolerance of the frame size.
SequenceScore evaluate_sequence(std::span<const BinaryMask> preds, std::span<const BinaryMask> gts,
                                bool skip_first = true, std::optional<double> tolerance = std::nullopt);

}  // namespace vosmem
