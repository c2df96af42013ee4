#include <algorithm>
#include <cmath>

#include "vosmem/kernels.hpp"

namespace vosmem::kernels::reference {

template <typename T>
void conv2d_forward(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias, int kernel,
                    Tensor<T>& output) {
  check_conv_shapes(input, weight, bias, kernel);
  const int ci_count = input.channels();
  const int co_count = weight.channels();
  const int h = input.height();
  const int w = input.width();
  const int pad = kernel / 2;
  output = Tensor<T>(co_count, h, w);
  for (int co = 0; co < co_count; ++co) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        T sum = bias[co];
        for (int ci = 0; ci < ci_count; ++ci) {
          for (int ky = 0; ky < kernel; ++ky) {
            for (int kx = 0; kx < kernel; ++kx) {
              const int sy = y + ky - pad;
              const int sx = x + kx - pad;
              if (sy < 0 || sx < 0 || sy >= h || sx >= w) continue;
              const std::size_t widx =
                  static_cast<std::size_t>(co) * weight.height() + (ci * kernel + ky) * kernel + kx;
              sum += weight[widx] * input.at(ci, sy, sx);
            }
          }
        }
        output.at(co, y, x) = sum;
      }
    }
  }
}

template <typename T>
void conv2d_backward(const Tensor<T>& input, const Tensor<T>& weight, int kernel, const Tensor<T>& grad_output,
                     Tensor<T>* grad_input, Tensor<T>& grad_weight, Tensor<T>& grad_bias) {
  const int ci_count = input.channels();
  const int co_count = weight.channels();
  const int h = input.height();
  const int w = input.width();
  const int pad = kernel / 2;
  for (int co = 0; co < co_count; ++co) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const T g = grad_output.at(co, y, x);
        grad_bias[co] += g;
        for (int ci = 0; ci < ci_count; ++ci) {
          for (int ky = 0; ky < kernel; ++ky) {
            for (int kx = 0; kx < kernel; ++kx) {
              const int sy = y + ky - pad;
              const int sx = x + kx - pad;
              if (sy < 0 || sx < 0 || sy >= h || sx >= w) continue;
              const std::size_t widx =
                  static_cast<std::size_t>(co) * weight.height() + (ci * kernel + ky) * kernel + kx;
              grad_weight[widx] += g * input.at(ci, sy, sx);
              if (grad_input) grad_input->at(ci, sy, sx) += g * weight[widx];
            }
          }
        }
      }
    }
  }
}

template <typename T>
void maxpool2_forward(const Tensor<T>& input, Tensor<T>& output, std::vector<int>& argmax) {
  const int oh = input.height() / 2;
  const int ow = input.width() / 2;
  output = Tensor<T>(input.channels(), oh, ow);
  argmax.assign(output.size(), 0);
  for (int c = 0; c < input.channels(); ++c) {
    for (int y = 0; y < oh; ++y) {
      for (int x = 0; x < ow; ++x) {
        int best = (2 * y) * input.width() + 2 * x;
        T best_value = input.at(c, 2 * y, 2 * x);
        for (int dy = 0; dy < 2; ++dy) {
          for (int dx = 0; dx < 2; ++dx) {
            const T v = input.at(c, 2 * y + dy, 2 * x + dx);
            if (v > best_value) {
              best_value = v;
              best = (2 * y + dy) * input.width() + 2 * x + dx;
            }
          }
        }
        output.at(c, y, x) = best_value;
        argmax[(static_cast<std::size_t>(c) * oh + y) * ow + x] = best;
      }
    }
  }
}

template <typename T>
void maxpool2_backward(const Tensor<T>& grad_output, const std::vector<int>& argmax, Tensor<T>& grad_input) {
  for (int c = 0; c < grad_output.channels(); ++c) {
    for (std::size_t i = 0; i < grad_output.shape().plane(); ++i) {
      const std::size_t o = c * grad_output.shape().plane() + i;
      grad_input.channel(c)[argmax[o]] += grad_output[o];
    }
  }
}

namespace {

/// Source taps of output coordinate `o` along an axis of length `n`.
void bilinear_taps(int o, int n, int& i0, int& i1, double& w0, double& w1) {
  double src = (o + 0.5) / 2.0 - 0.5;
  if (src < 0) src = 0;
  i0 = static_cast<int>(std::floor(src));
  i1 = std::min(i0 + 1, n - 1);
  w1 = src - i0;
  w0 = 1.0 - w1;
}

}  // namespace

template <typename T>
void upsample2_forward(const Tensor<T>& input, Tensor<T>& output) {
  const int h = input.height();
  const int w = input.width();
  output = Tensor<T>(input.channels(), 2 * h, 2 * w);
  for (int c = 0; c < input.channels(); ++c) {
    for (int y = 0; y < 2 * h; ++y) {
      int y0, y1;
      double wy0, wy1;
      bilinear_taps(y, h, y0, y1, wy0, wy1);
      for (int x = 0; x < 2 * w; ++x) {
        int x0, x1;
        double wx0, wx1;
        bilinear_taps(x, w, x0, x1, wx0, wx1);
        const double v = wy0 * (wx0 * input.at(c, y0, x0) + wx1 * input.at(c, y0, x1)) +
                         wy1 * (wx0 * input.at(c, y1, x0) + wx1 * input.at(c, y1, x1));
        output.at(c, y, x) = static_cast<T>(v);
      }
    }
  }
}

template <typename T>
void upsample2_backward(const Tensor<T>& grad_output, Tensor<T>& grad_input) {
  const int h = grad_input.height();
  const int w = grad_input.width();
  for (int c = 0; c < grad_input.channels(); ++c) {
    for (int y = 0; y < 2 * h; ++y) {
      int y0, y1;
      double wy0, wy1;
      bilinear_taps(y, h, y0, y1, wy0, wy1);
      for (int x = 0; x < 2 * w; ++x) {
        int x0, x1;
        double wx0, wx1;
        bilinear_taps(x, w, x0, x1, wx0, wx1);
        const double g = grad_output.at(c, y, x);
        grad_input.at(c, y0, x0) += static_cast<T>(g * wy0 * wx0);
        grad_input.at(c, y0, x1) += static_cast<T>(g * wy0 * wx1);
        grad_input.at(c, y1, x0) += static_cast<T>(g * wy1 * wx0);
        grad_input.at(c, y1, x1) += static_cast<T>(g * wy1 * wx1);
      }
    }
  }
}

#define VOSMEM_INSTANTIATE(T)                                                                                  \
  template void conv2d_forward<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, int, Tensor<T>&);      \
  template void conv2d_backward<T>(const Tensor<T>&, const Tensor<T>&, int, const Tensor<T>&, Tensor<T>*,      \
                                   Tensor<T>&, Tensor<T>&);                                                    \
  template void maxpool2_forward<T>(const Tensor<T>&, Tensor<T>&, std::vector<int>&);                          \
  template void maxpool2_backward<T>(const Tensor<T>&, const std::vector<int>&, Tensor<T>&);                   \
  template void upsample2_forward<T>(const Tensor<T>&, Tensor<T>&);                                            \
  template void upsample2_backward<T>(const Tensor<T>&, Tensor<T>&);

VOSMEM_INSTANTIATE(float)
VOSMEM_INSTANTIATE(double)
#undef VOSMEM_INSTANTIATE

}  // namespace vosmem::kernels::reference
