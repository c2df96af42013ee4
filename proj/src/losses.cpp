#include "vosmem/losses.hpp"

#include <algorithm>
#include <cmath>

namespace vosmem {

void LossConfig::validate() const {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw ConfigError("loss lambda must lie in [0, 1]");
  if (!(epsilon > 0.0 && epsilon < 0.5)) throw ConfigError("loss epsilon must lie in (0, 0.5)");
  distance.validate();
}

template <typename T>
double balanced_bce_frame(std::span<const T> probs, std::span<const std::uint8_t> target, double epsilon, T* grad,
                          double grad_scale) {
  if (probs.size() != target.size()) throw DataError("balanced_bce: prediction and target sizes differ");
  const std::size_t n = target.size();
  std::size_t negatives = 0;
  for (auto v : target) negatives += v ? 0 : 1;
  const double beta = static_cast<double>(negatives) / static_cast<double>(n);
  double pos_sum = 0.0;
  double neg_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double raw = probs[i];
    const double p = std::clamp(raw, epsilon, 1.0 - epsilon);
    const bool inside = raw > epsilon && raw < 1.0 - epsilon;
    if (target[i]) {
      pos_sum -= std::log(p);
      if (grad && inside) grad[i] += static_cast<T>(grad_scale * (-beta / p));
    } else {
      neg_sum -= std::log(1.0 - p);
      if (grad && inside) grad[i] += static_cast<T>(grad_scale * ((1.0 - beta) / (1.0 - p)));
    }
  }
  return beta * pos_sum + (1.0 - beta) * neg_sum;
}

template <typename T>
double cross_entropy_frame(const Tensor<T>& logits, const Grid<int>& target, T* grad, double grad_scale) {
  const int k = logits.channels();
  const std::size_t plane = logits.shape().plane();
  if (logits.height() != target.height() || logits.width() != target.width()) {
    throw DataError("distance_ce: logits " + logits.shape().str() + " do not match target size");
  }
  double total = 0.0;
  std::vector<double> e(k);
  for (std::size_t p = 0; p < plane; ++p) {
    const int cls = target[p];
    if (cls < 0 || cls >= k) {
      throw DataError("distance_ce: class " + std::to_string(cls) + " outside [0, " + std::to_string(k) + ")");
    }
    double mx = logits[p];
    for (int c = 1; c < k; ++c) mx = std::max(mx, static_cast<double>(logits[c * plane + p]));
    double sum = 0.0;
    for (int c = 0; c < k; ++c) {
      e[c] = std::exp(static_cast<double>(logits[c * plane + p]) - mx);
      sum += e[c];
    }
    total += std::log(sum) + mx - static_cast<double>(logits[cls * plane + p]);
    if (grad) {
      for (int c = 0; c < k; ++c) {
        const double soft = e[c] / sum - (c == cls ? 1.0 : 0.0);
        grad[c * plane + p] += static_cast<T>(grad_scale * soft);
      }
    }
  }
  return total;
}

double balanced_bce(std::span<const ProbabilityMap> probs, std::span<const BinaryMask> targets, double epsilon) {
  if (probs.size() != targets.size()) throw DataError("balanced_bce: frame count mismatch");
  double sum = 0.0;
  for (std::size_t t = 0; t < probs.size(); ++t) {
    require_same_size(probs[t].size(), targets[t].size(), "balanced_bce");
    sum += balanced_bce_frame<double>(probs[t].values(), targets[t].values(), epsilon);
  }
  return sum;
}

double distance_ce(std::span<const Tensor<double>> logits, std::span<const DistanceClassMap> targets) {
  if (logits.size() != targets.size()) throw DataError("distance_ce: frame count mismatch");
  double sum = 0.0;
  std::size_t pixels = 0;
  for (std::size_t t = 0; t < logits.size(); ++t) {
    if (logits[t].channels() != targets[t].config.class_count()) {
      throw ConfigError("distance_ce: logits carry " + std::to_string(logits[t].channels()) + " classes, config has " +
                        std::to_string(targets[t].config.class_count()));
    }
    sum += cross_entropy_frame<double>(logits[t], targets[t].classes);
    pixels += targets[t].classes.area();
  }
  return pixels ? sum / static_cast<double>(pixels) : 0.0;
}

namespace {

double reduce(double sum, std::size_t count, Reduction r) {
  return r == Reduction::kMean && count > 0 ? sum / static_cast<double>(count) : sum;
}

double reduction_scale(std::size_t count, Reduction r) {
  return r == Reduction::kMean && count > 0 ? 1.0 / static_cast<double>(count) : 1.0;
}

}  // namespace

LossBreakdown total_loss(std::span<const ProbabilityMap> seg_probs, std::span<const Tensor<double>> dist_logits,
                         std::span<const BinaryMask> seg_targets, const LossConfig& config) {
  config.validate();
  if (seg_probs.size() != seg_targets.size() || dist_logits.size() != seg_targets.size()) {
    throw DataError("total_loss: frame count mismatch");
  }
  std::size_t pixels = 0;
  double seg = 0.0;
  double dist = 0.0;
  for (std::size_t t = 0; t < seg_targets.size(); ++t) {
    require_same_size(seg_probs[t].size(), seg_targets[t].size(), "total_loss");
    if (dist_logits[t].channels() != config.distance.class_count()) {
      throw ConfigError("total_loss: logits carry " + std::to_string(dist_logits[t].channels()) +
                        " classes, config has " + std::to_string(config.distance.class_count()));
    }
    seg += balanced_bce_frame<double>(seg_probs[t].values(), seg_targets[t].values(), config.epsilon);
    dist += cross_entropy_frame<double>(dist_logits[t], encode_distance_classes(seg_targets[t], config.distance).classes);
    pixels += seg_targets[t].area();
  }
  LossBreakdown out;
  out.seg = reduce(seg, pixels, config.seg_reduction);
  out.dist = reduce(dist, pixels, config.dist_reduction);
  out.total = config.lambda * out.seg + (1.0 - config.lambda) * out.dist;
  return out;
}

template <typename T>
autograd::Var<T> balanced_bce_node(const autograd::Var<T>& prob, const BinaryMask& target, double epsilon,
                                   double scale) {
  if (prob->value.channels() != 1 || prob->value.height() != target.height() ||
      prob->value.width() != target.width()) {
    throw DataError("balanced_bce: prediction " + prob->value.shape().str() + " does not match target");
  }
  Tensor<T> out(1, 1, 1);
  const double value = balanced_bce_frame<T>(prob->value.values(), target.values(), epsilon);
  out[0] = static_cast<T>(scale * value);
  return autograd::make_node<T>(std::move(out), {prob}, [target, epsilon, scale](autograd::Node<T>& self) {
    auto& in = *self.parents[0];
    if (!in.requires_grad) return;
    balanced_bce_frame<T>(in.value.values(), target.values(), epsilon, in.ensure_grad().data(),
                          scale * static_cast<double>(self.grad[0]));
  });
}

template <typename T>
autograd::Var<T> cross_entropy_node(const autograd::Var<T>& logits, const Grid<int>& target, double scale) {
  Tensor<T> out(1, 1, 1);
  out[0] = static_cast<T>(scale * cross_entropy_frame<T>(logits->value, target));
  return autograd::make_node<T>(std::move(out), {logits}, [target, scale](autograd::Node<T>& self) {
    auto& in = *self.parents[0];
    if (!in.requires_grad) return;
    cross_entropy_frame<T>(in.value, target, in.ensure_grad().data(), scale * static_cast<double>(self.grad[0]));
  });
}

template <typename T>
GraphLoss<T> total_loss_graph(std::span<const autograd::Var<T>> seg_probs,
                              std::span<const autograd::Var<T>> dist_logits, std::span<const BinaryMask> seg_targets,
                              const LossConfig& config) {
  config.validate();
  if (seg_probs.size() != seg_targets.size() || dist_logits.size() != seg_targets.size()) {
    throw DataError("total_loss: frame count mismatch");
  }
  std::size_t pixels = 0;
  for (const auto& t : seg_targets) pixels += t.area();
  const double seg_scale = reduction_scale(pixels, config.seg_reduction);
  const double dist_scale = reduction_scale(pixels, config.dist_reduction);

  std::vector<autograd::Var<T>> terms;
  GraphLoss<T> out;
  for (std::size_t t = 0; t < seg_targets.size(); ++t) {
    if (dist_logits[t]->value.channels() != config.distance.class_count()) {
      throw ConfigError("total_loss: logits carry " + std::to_string(dist_logits[t]->value.channels()) +
                        " classes, config has " + std::to_string(config.distance.class_count()));
    }
    auto seg = balanced_bce_node<T>(seg_probs[t], seg_targets[t], config.epsilon, seg_scale);
    const auto classes = encode_distance_classes(seg_targets[t], config.distance).classes;
    auto dist = cross_entropy_node<T>(dist_logits[t], classes, dist_scale);
    out.values.seg += static_cast<double>(seg->value[0]);
    out.values.dist += static_cast<double>(dist->value[0]);
    if (config.lambda != 0.0) terms.push_back(autograd::scale<T>(seg, config.lambda));
    if (config.lambda != 1.0) terms.push_back(autograd::scale<T>(dist, 1.0 - config.lambda));
  }
  out.values.total = config.lambda * out.values.seg + (1.0 - config.lambda) * out.values.dist;
  out.total = autograd::sum_scalars<T>(terms);
  return out;
}

#define VOSMEM_INSTANTIATE(T)                                                                                     \
  template double balanced_bce_frame<T>(std::span<const T>, std::span<const std::uint8_t>, double, T*, double);    \
  template double cross_entropy_frame<T>(const Tensor<T>&, const Grid<int>&, T*, double);                         \
  template autograd::Var<T> balanced_bce_node<T>(const autograd::Var<T>&, const BinaryMask&, double, double);     \
  template autograd::Var<T> cross_entropy_node<T>(const autograd::Var<T>&, const Grid<int>&, double);             \
  template GraphLoss<T> total_loss_graph<T>(std::span<const autograd::Var<T>>, std::span<const autograd::Var<T>>, \
                                            std::span<const BinaryMask>, const LossConfig&);

VOSMEM_INSTANTIATE(float)
VOSMEM_INSTANTIATE(double)
#undef VOSMEM_INSTANTIATE

}  // namespace vosmem
