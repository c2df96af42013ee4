#pragma once

// Minimal reverse-mode differentiation over Tensor values. Each op creates a
// node holding its value plus a closure that pushes the node's gradient to
// its parents; `backward` walks the graph in reverse topological order.
// Graphs are rebuilt per forward pass and freed when the last handle drops.

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "vosmem/tensor.hpp"

namespace vosmem::autograd {

template <typename T>
struct Node {
  Tensor<T> value;
  Tensor<T> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;

  Tensor<T>& ensure_grad() {
    if (grad.size() != value.size()) grad = Tensor<T>(value.shape());
    return grad;
  }
  bool has_grad() const { return grad.size() == value.size() && value.size() > 0; }
};

template <typename T>
using Var = std::shared_ptr<Node<T>>;

/// Disables graph recording on this thread while alive.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

/// Records which side of every non-differentiable point (ReLU at zero,
/// max-pool ties) the forward pass took. Finite-difference checks compare
/// fingerprints to detect perturbations that cross a kink.
class ActivationFingerprint {
 public:
  ActivationFingerprint();
  ~ActivationFingerprint();
  ActivationFingerprint(const ActivationFingerprint&) = delete;
  ActivationFingerprint& operator=(const ActivationFingerprint&) = delete;

  std::uint64_t value() const { return hash_; }
  void mix(std::uint64_t v);

  static ActivationFingerprint* active();

 private:
  std::uint64_t hash_ = 1469598103934665603ull;
  ActivationFingerprint* previous_;
};

template <typename T>
Var<T> constant(Tensor<T> value);

template <typename T>
Var<T> parameter(Tensor<T> value);

/// Seeds d(root)/d(root) = 1 for a 1x1x1 root and accumulates gradients into
/// every reachable node that requires them.
template <typename T>
void backward(const Var<T>& root);

/// Stride-1 "same" convolution; see kernels.hpp for the weight layout.
template <typename T>
Var<T> conv2d(const Var<T>& input, const Var<T>& weight, const Var<T>& bias, int kernel);

template <typename T>
Var<T> relu(const Var<T>& x);
template <typename T>
Var<T> sigmoid(const Var<T>& x);
template <typename T>
Var<T> tanh(const Var<T>& x);
template <typename T>
Var<T> maxpool2(const Var<T>& x);
template <typename T>
Var<T> upsample2(const Var<T>& x);

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b);
template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b);
template <typename T>
Var<T> scale(const Var<T>& x, double factor);

/// Concatenates along the channel axis.
template <typename T>
Var<T> concat(std::span<const Var<T>> parts);

template <typename T>
Var<T> slice_channels(const Var<T>& x, int begin, int count);

/// Softmax over every element of `x` (used for small weight vectors).
template <typename T>
Var<T> softmax_all(const Var<T>& x);

/// Per-pixel softmax across channels.
template <typename T>
Var<T> softmax_channels(const Var<T>& x);

/// x scaled by the scalar stored at `weights[index]`.
template <typename T>
Var<T> scale_by(const Var<T>& x, const Var<T>& weights, int index);

/// Sum of 1x1x1 scalars.
template <typename T>
Var<T> sum_scalars(std::span<const Var<T>> scalars);

/// Generic node constructor for ops defined elsewhere (loss functions).
template <typename T>
Var<T> make_node(Tensor<T> value, std::vector<Var<T>> parents, std::function<void(Node<T>&)> backward_fn);

}  // namespace vosmem::autograd
