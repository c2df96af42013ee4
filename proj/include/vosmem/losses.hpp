#pragma once

#include <span>
#include <vector>

#include "vosmem/autograd.hpp"
#include "vosmem/grid.hpp"
#include "vosmem/mask_ops.hpp"
#include "vosmem/tensor.hpp"

namespace vosmem {

enum class Reduction { kSum, kMean };

struct LossConfig {
  /// Weight of the segmentation term; the distance term gets 1 - lambda.
  double lambda = 0.8;
  DistanceConfig distance;
  /// Segmentation loss is summed over pixels and frames; the distance loss
  /// is averaged. Both are configurable.
  Reduction seg_reduction = Reduction::kSum;
  Reduction dist_reduction = Reduction::kMean;
  /// Probabilities are clamped to [epsilon, 1 - epsilon] before the log.
  double epsilon = 1e-7;

  void validate() const;
};

struct LossBreakdown {
  double total = 0.0;
  double seg = 0.0;
  double dist = 0.0;
};

/// Class-balanced binary cross-entropy of one frame with
/// beta = |background| / |pixels| computed on that frame. When `grad` is
/// non-null, `grad_scale * dL/dp` is added to it.
template <typename T>
double balanced_bce_frame(std::span<const T> probs, std::span<const std::uint8_t> target, double epsilon,
                          T* grad = nullptr, double grad_scale = 1.0);

/// Sum over pixels of categorical cross-entropy between (K, H, W) logits and
/// integer targets. When `grad` is non-null, `grad_scale * dL/dlogits` is
/// added to it.
template <typename T>
double cross_entropy_frame(const Tensor<T>& logits, const Grid<int>& target, T* grad = nullptr,
                           double grad_scale = 1.0);

/// Sum over frames of balanced_bce_frame.
double balanced_bce(std::span<const ProbabilityMap> probs, std::span<const BinaryMask> targets,
                    double epsilon = 1e-7);

/// Mean over pixels and frames of the per-pixel cross-entropy.
double distance_ce(std::span<const Tensor<double>> logits, std::span<const DistanceClassMap> targets);

/// lambda * L_seg + (1 - lambda) * L_dist, with distance targets derived
/// from `seg_targets`.
LossBreakdown total_loss(std::span<const ProbabilityMap> seg_probs, std::span<const Tensor<double>> dist_logits,
                         std::span<const BinaryMask> seg_targets, const LossConfig& config);

/// Differentiable versions over model outputs.
template <typename T>
struct GraphLoss {
  autograd::Var<T> total;
  LossBreakdown values;
};

template <typename T>
autograd::Var<T> balanced_bce_node(const autograd::Var<T>& prob, const BinaryMask& target, double epsilon,
                                   double scale);

template <typename T>
autograd::Var<T> cross_entropy_node(const autograd::Var<T>& logits, const Grid<int>& target, double scale);

template <typename T>
GraphLoss<T> total_loss_graph(std::span<const autograd::Var<T>> seg_probs,
                              std::span<const autograd::Var<T>> dist_logits, std::span<const BinaryMask> seg_targets,
                              const LossConfig& config);

}  // namespace vosmem
