#include "vosmem/metrics.hpp"

#include <cmath>

#include "vosmem/mask_ops.hpp"

namespace vosmem {

double region_similarity(const BinaryMask& pred, const BinaryMask& gt) {
  require_same_size(pred.size(), gt.size(), "region_similarity");
  std::size_t inter = 0;
  std::size_t uni = 0;
  for (std::size_t i = 0; i < pred.area(); ++i) {
    const bool p = pred[i] != 0;
    const bool g = gt[i] != 0;
    inter += (p && g) ? 1 : 0;
    uni += (p || g) ? 1 : 0;
  }
  if (uni == 0) return 1.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

namespace {

// Fraction of `from` boundary pixels lying within `tolerance` of `to`.
double matched_fraction(const BinaryMask& from, const Grid<double>& sq_dist_to, double tolerance) {
  std::size_t total = 0;
  std::size_t hit = 0;
  const double tol2 = tolerance * tolerance;
  for (std::size_t i = 0; i < from.area(); ++i) {
    if (!from[i]) continue;
    ++total;
    if (sq_dist_to[i] <= tol2) ++hit;
  }
  return static_cast<double>(hit) / static_cast<double>(total);
}

}  // namespace

double contour_accuracy(const BinaryMask& pred, const BinaryMask& gt, double tolerance) {
  require_same_size(pred.size(), gt.size(), "contour_accuracy");
  if (tolerance < 0) throw ConfigError("contour tolerance must be non-negative");
  const BinaryMask pb = boundary_mask(pred);
  const BinaryMask gb = boundary_mask(gt);
  const bool p_empty = count_foreground(pb) == 0;
  const bool g_empty = count_foreground(gb) == 0;
  if (p_empty && g_empty) return 1.0;
  if (p_empty || g_empty) return 0.0;

  const double precision = matched_fraction(pb, squared_distance_transform(gb), tolerance);
  const double recall = matched_fraction(gb, squared_distance_transform(pb), tolerance);
  if (precision + recall == 0.0) return 0.0;
  return 2.0 * precision * recall / (precision + recall);
}

double default_contour_tolerance(GridSize size) {
  const double diag = std::hypot(static_cast<double>(size.height), static_cast<double>(size.width));
  return std::ceil(0.008 * diag);
}

FrameScore score_frame(const BinaryMask& pred, const BinaryMask& gt, double tolerance) {
  return {region_similarity(pred, gt), contour_accuracy(pred, gt, tolerance)};
}

SequenceScore evaluate_sequence(std::span<const BinaryMask> preds, std::span<const BinaryMask> gts, bool skip_first,
                                std::optional<double> tolerance) {
  if (preds.size() != gts.size()) {
    throw DataError("evaluate_sequence: " + std::to_string(preds.size()) + " predictions for " +
                    std::to_string(gts.size()) + " ground-truth frames");
  }
  if (gts.size() < 2) throw DataError("evaluate_sequence: need at least two frames");
  const double tol = tolerance.value_or(default_contour_tolerance(gts[0].size()));
  SequenceScore score;
  std::size_t counted = 0;
  for (std::size_t t = skip_first ? 1 : 0; t < gts.size(); ++t) {
    const FrameScore fs = score_frame(preds[t], gts[t], tol);
    score.j_mean += fs.j;
    score.f_mean += fs.f;
    ++counted;
  }
  score.j_mean /= static_cast<double>(counted);
  score.f_mean /= static_cast<double>(counted);
  score.overall = (score.j_mean + score.f_mean) / 2.0;
  return score;
}

}  // namespace vosmem
