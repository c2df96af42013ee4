#pragma once

// Compute kernels behind the autograd ops. Two implementations share one
// signature set: the OpenMP-parallel, tiled versions in `kernels` are used by
// the model; the naive serial loops in `kernels::reference` exist so tests
// and the benchmark can check the fast path against something obviously
// correct.
//
// Layout conventions:
//   activations  (C, H, W)
//   conv weights (Cout, Cin * k * k, 1), inner index (ci * k + ky) * k + kx
//   conv bias    (Cout, 1, 1)
// Convolutions are stride 1 with zero "same" padding, so k must be odd.
// Every backward routine accumulates into its gradient outputs.

#include <vector>

#include "vosmem/tensor.hpp"

namespace vosmem::kernels {

template <typename T>
void conv2d_forward(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias, int kernel,
                    Tensor<T>& output);

/// `grad_input` may be null when the input does not need a gradient.
template <typename T>
void conv2d_backward(const Tensor<T>& input, const Tensor<T>& weight, int kernel, const Tensor<T>& grad_output,
                     Tensor<T>* grad_input, Tensor<T>& grad_weight, Tensor<T>& grad_bias);

/// 2x2 max pooling, stride 2. `argmax` receives the winning input offset
/// within each channel plane; ties resolve to the first element in scan order.
template <typename T>
void maxpool2_forward(const Tensor<T>& input, Tensor<T>& output, std::vector<int>& argmax);

template <typename T>
void maxpool2_backward(const Tensor<T>& grad_output, const std::vector<int>& argmax, Tensor<T>& grad_input);

/// Bilinear x2 upsampling with half-pixel centres and edge clamping.
template <typename T>
void upsample2_forward(const Tensor<T>& input, Tensor<T>& output);

template <typename T>
void upsample2_backward(const Tensor<T>& grad_output, Tensor<T>& grad_input);

namespace reference {

template <typename T>
void conv2d_forward(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias, int kernel,
                    Tensor<T>& output);

template <typename T>
void conv2d_backward(const Tensor<T>& input, const Tensor<T>& weight, int kernel, const Tensor<T>& grad_output,
                     Tensor<T>* grad_input, Tensor<T>& grad_weight, Tensor<T>& grad_bias);

template <typename T>
void maxpool2_forward(const Tensor<T>& input, Tensor<T>& output, std::vector<int>& argmax);

template <typename T>
void maxpool2_backward(const Tensor<T>& grad_output, const std::vector<int>& argmax, Tensor<T>& grad_input);

template <typename T>
void upsample2_forward(const Tensor<T>& input, Tensor<T>& output);

template <typename T>
void upsample2_backward(const Tensor<T>& grad_output, Tensor<T>& grad_input);

}  // namespace reference

/// Throws ConfigError unless weight/bias/input agree with `kernel`.
template <typename T>
void check_conv_shapes(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias, int kernel);

}  // namespace vosmem::kernels
