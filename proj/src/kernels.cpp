#include "vosmem/kernels.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>

namespace vosmem::kernels {

namespace {

constexpr int kRowBlock = 4;
// Target size of one im2col tile; small enough to stay in L2.
constexpr std::size_t kTileBytes = 256 * 1024;

// 64-byte SIMD vectors via the GCC/Clang vector extension; the compiler maps
// them onto whatever the target offers (one zmm, two ymm, ...).
template <typename T>
struct VecOf;
template <>
struct VecOf<float> {
  typedef float type __attribute__((vector_size(64)));
};
template <>
struct VecOf<double> {
  typedef double type __attribute__((vector_size(64)));
};
template <typename T>
using Vec = typename VecOf<T>::type;

template <typename T>
constexpr int kVecLanes = 64 / sizeof(T);

template <typename T>
inline Vec<T> load(const T* p) {
  Vec<T> v;
  std::memcpy(&v, p, sizeof(v));
  return v;
}

template <typename T>
inline void store(T* p, const Vec<T>& v) {
  std::memcpy(p, &v, sizeof(v));
}

std::size_t round_up(std::size_t v, std::size_t m) { return (v + m - 1) / m * m; }

// Pixels per tile: a multiple of the vector width, sized from the im2col depth.
template <typename T>
std::size_t tile_pixels(std::size_t depth, std::size_t n) {
  const std::size_t lanes = kVecLanes<T>;
  std::size_t px = kTileBytes / (depth * sizeof(T));
  px = std::clamp<std::size_t>(px / lanes * lanes, 4 * lanes, 64 * lanes);
  return std::min(px, round_up(n, lanes));
}

// Column block of im2col for flattened pixels [j0, j0 + jn): row r of `col`
// (stride `stride`) holds input channel r / k^2 shifted by tap r % k^2, with
// zeros for padding and for the columns past jn.
template <typename T>
void fill_col_tile(const Tensor<T>& input, int kernel, std::size_t j0, std::size_t jn, std::size_t stride, T* col) {
  const int h = input.height();
  const int w = input.width();
  const int pad = kernel / 2;
  const int kk = kernel * kernel;
  const int rows = input.channels() * kk;
  for (int r = 0; r < rows; ++r) {
    const int ci = r / kk;
    const int ky = (r / kernel) % kernel;
    const int kx = r % kernel;
    const T* src = input.channel(ci);
    T* dst = col + static_cast<std::size_t>(r) * stride;
    std::fill(dst + jn, dst + stride, T{});
    std::size_t j = j0;
    while (j < j0 + jn) {
      const int y = static_cast<int>(j / w);
      const int x_first = static_cast<int>(j % w);
      const int x_last = static_cast<int>(std::min<std::size_t>(w, x_first + (j0 + jn - j)));
      T* drow = dst + (j - j0) - x_first;
      const int sy = y + ky - pad;
      if (sy < 0 || sy >= h) {
        std::fill(drow + x_first, drow + x_last, T{});
      } else {
        const T* srow = src + static_cast<std::size_t>(sy) * w + (kx - pad);
        const int lo = std::clamp(pad - kx, x_first, x_last);
        const int hi = std::clamp(w + pad - kx, lo, x_last);
        std::fill(drow + x_first, drow + lo, T{});
        std::copy(srow + lo, srow + hi, drow + lo);
        std::fill(drow + hi, drow + x_last, T{});
      }
      j += static_cast<std::size_t>(x_last - x_first);
    }
  }
}

// Adds the column block back onto grad_input (inverse of fill_col_tile).
// Channels are independent, so they run in parallel.
template <typename T>
void col_tile_add(const T* col, int kernel, std::size_t j0, std::size_t jn, std::size_t stride,
                  Tensor<T>& grad_input) {
  const int h = grad_input.height();
  const int w = grad_input.width();
  const int pad = kernel / 2;
  const int kk = kernel * kernel;
#pragma omp parallel for schedule(static)
  for (int ci = 0; ci < grad_input.channels(); ++ci) {
    T* dst = grad_input.channel(ci);
    for (int k = 0; k < kk; ++k) {
      const int ky = k / kernel;
      const int kx = k % kernel;
      const T* src = col + static_cast<std::size_t>(ci * kk + k) * stride;
      std::size_t j = j0;
      while (j < j0 + jn) {
        const int y = static_cast<int>(j / w);
        const int x_first = static_cast<int>(j % w);
        const int x_last = static_cast<int>(std::min<std::size_t>(w, x_first + (j0 + jn - j)));
        const T* srow = src + (j - j0) - x_first;
        const int sy = y + ky - pad;
        if (sy >= 0 && sy < h) {
          T* drow = dst + static_cast<std::size_t>(sy) * w + (kx - pad);
          const int lo = std::clamp(pad - kx, x_first, x_last);
          const int hi = std::clamp(w + pad - kx, lo, x_last);
          for (int x = lo; x < hi; ++x) drow[x] += srow[x];
        }
        j += static_cast<std::size_t>(x_last - x_first);
      }
    }
  }
}

// out[b, 0:n] = bias[b] + sum_r weight[b, r] * col[r, 0:n] for NB rows, with
// n a multiple of the vector width. Every element accumulates its terms in
// increasing r, so the result does not depend on the blocking.
template <typename T, int NB>
void gemm_rows(const T* weight, std::size_t depth, const T* col, std::size_t n, const T* bias, T* out) {
  constexpr int L = kVecLanes<T>;
  constexpr int NV = 4;
  std::size_t j = 0;
  for (; j + NV * L <= n; j += NV * L) {
    Vec<T> acc[NB][NV];
    for (int b = 0; b < NB; ++b) {
      const T init = bias ? bias[b] : T{};
      for (int v = 0; v < NV; ++v) acc[b][v] = Vec<T>{} + init;
    }
    for (std::size_t r = 0; r < depth; ++r) {
      const T* c = col + r * n + j;
      Vec<T> cv[NV];
      for (int v = 0; v < NV; ++v) cv[v] = load(c + v * L);
      for (int b = 0; b < NB; ++b) {
        const T wv = weight[b * depth + r];
        for (int v = 0; v < NV; ++v) acc[b][v] += wv * cv[v];
      }
    }
    for (int b = 0; b < NB; ++b) {
      for (int v = 0; v < NV; ++v) store(out + b * n + j + v * L, acc[b][v]);
    }
  }
  for (; j < n; j += L) {
    Vec<T> acc[NB];
    for (int b = 0; b < NB; ++b) acc[b] = Vec<T>{} + (bias ? bias[b] : T{});
    for (std::size_t r = 0; r < depth; ++r) {
      const Vec<T> cv = load(col + r * n + j);
      for (int b = 0; b < NB; ++b) acc[b] += weight[b * depth + r] * cv;
    }
    for (int b = 0; b < NB; ++b) store(out + b * n + j, acc[b]);
  }
}

// Rows [0, rows) of out = weight * col (+ bias), parallel over row blocks.
template <typename T>
void gemm(const T* weight, int rows, std::size_t depth, const T* col, std::size_t n, const T* bias, T* out) {
  const int blocks = (rows + kRowBlock - 1) / kRowBlock;
#pragma omp parallel for schedule(static)
  for (int blk = 0; blk < blocks; ++blk) {
    const int r0 = blk * kRowBlock;
    if (r0 + kRowBlock <= rows) {
      gemm_rows<T, kRowBlock>(weight + r0 * depth, depth, col, n, bias ? bias + r0 : nullptr, out + r0 * n);
    } else {
      for (int r = r0; r < rows; ++r) {
        gemm_rows<T, 1>(weight + r * depth, depth, col, n, bias ? bias + r : nullptr, out + r * n);
      }
    }
  }
}

// result[a][b] = sum_j x[a, j] * y[b, j] for NA rows of x and NB rows of y,
// n a multiple of the vector width. Lane-wise partial sums, then a
// fixed-order horizontal reduction.
template <typename T, int NA, int NB>
void dot_block(const T* x, const T* y, std::size_t n, T (&result)[NA][NB]) {
  constexpr int L = kVecLanes<T>;
  Vec<T> acc[NA][NB];
  for (int a = 0; a < NA; ++a) {
    for (int b = 0; b < NB; ++b) acc[a][b] = Vec<T>{};
  }
  for (std::size_t j = 0; j < n; j += L) {
    Vec<T> yv[NB];
    for (int b = 0; b < NB; ++b) yv[b] = load(y + b * n + j);
    for (int a = 0; a < NA; ++a) {
      const Vec<T> xv = load(x + a * n + j);
      for (int b = 0; b < NB; ++b) acc[a][b] += xv * yv[b];
    }
  }
  for (int a = 0; a < NA; ++a) {
    for (int b = 0; b < NB; ++b) {
      T s{};
      for (int l = 0; l < L; ++l) s += acc[a][b][l];
      result[a][b] = s;
    }
  }
}

// Wide tiles: blocked dot products of gradient rows with im2col rows.
template <typename T>
void weight_grad_dots(const T* gout, int co_count, const T* col, int depth, std::size_t n, T* grad_weight) {
  const int co_blocks = (co_count + kRowBlock - 1) / kRowBlock;
#pragma omp parallel for schedule(static)
  for (int blk = 0; blk < co_blocks; ++blk) {
    const int co0 = blk * kRowBlock;
    const int nb = std::min(kRowBlock, co_count - co0);
    int r = 0;
    for (; r + kRowBlock <= depth; r += kRowBlock) {
      const T* c = col + static_cast<std::size_t>(r) * n;
      if (nb == kRowBlock) {
        T dots[kRowBlock][kRowBlock];
        dot_block<T, kRowBlock, kRowBlock>(gout + co0 * n, c, n, dots);
        for (int b = 0; b < nb; ++b) {
          for (int q = 0; q < kRowBlock; ++q) grad_weight[static_cast<std::size_t>(co0 + b) * depth + r + q] += dots[b][q];
        }
      } else {
        for (int b = 0; b < nb; ++b) {
          T dots[1][kRowBlock];
          dot_block<T, 1, kRowBlock>(gout + (co0 + b) * n, c, n, dots);
          for (int q = 0; q < kRowBlock; ++q) grad_weight[static_cast<std::size_t>(co0 + b) * depth + r + q] += dots[0][q];
        }
      }
    }
    for (; r < depth; ++r) {
      for (int b = 0; b < nb; ++b) {
        T dots[1][1];
        dot_block<T, 1, 1>(gout + (co0 + b) * n, col + static_cast<std::size_t>(r) * n, n, dots);
        grad_weight[static_cast<std::size_t>(co0 + b) * depth + r] += dots[0][0];
      }
    }
  }
}

// grad_weight[co, r] += sum_j gout[co, j] * col[r, j] over one tile. Narrow
// tiles would spend their time in horizontal reductions, so they multiply by
// the transposed tile instead. `col_t` and `partial` are scratch buffers.
template <typename T>
void weight_grad_tile(const T* gout, int co_count, const T* col, int depth, std::size_t stride, std::vector<T>& col_t,
                      std::vector<T>& partial, T* grad_weight) {
  if (stride >= 8 * static_cast<std::size_t>(kVecLanes<T>)) {
    weight_grad_dots(gout, co_count, col, depth, stride, grad_weight);
    return;
  }
  const std::size_t dpad = round_up(static_cast<std::size_t>(depth), kVecLanes<T>);
  col_t.assign(stride * dpad, T{});
  for (int r = 0; r < depth; ++r) {
    const T* src = col + static_cast<std::size_t>(r) * stride;
    for (std::size_t j = 0; j < stride; ++j) col_t[j * dpad + r] = src[j];
  }
  partial.resize(static_cast<std::size_t>(co_count) * dpad);
  gemm<T>(gout, co_count, stride, col_t.data(), dpad, nullptr, partial.data());
  for (int co = 0; co < co_count; ++co) {
    const T* src = partial.data() + co * dpad;
    T* dst = grad_weight + static_cast<std::size_t>(co) * depth;
    for (int r = 0; r < depth; ++r) dst[r] += src[r];
  }
}

}  // namespace

template <typename T>
void check_conv_shapes(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias, int kernel) {
  if (kernel < 1 || kernel % 2 == 0) throw ConfigError("conv kernel must be odd, got " + std::to_string(kernel));
  if (weight.height() != input.channels() * kernel * kernel || weight.width() != 1) {
    throw ConfigError("conv weight " + weight.shape().str() + " does not match input " + input.shape().str() +
                      " with kernel " + std::to_string(kernel));
  }
  if (bias.channels() != weight.channels() || bias.height() != 1 || bias.width() != 1) {
    throw ConfigError("conv bias " + bias.shape().str() + " does not match weight " + weight.shape().str());
  }
}

// Both passes walk the image in pixel tiles: a tile of im2col columns is
// built in a cache-sized buffer, multiplied, and discarded. Forward tiles
// are independent and run in parallel; backward tiles run in order so the
// weight-gradient sums are reproducible, with parallelism inside each tile.

template <typename T>
void conv2d_forward(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias, int kernel,
                    Tensor<T>& output) {
  check_conv_shapes(input, weight, bias, kernel);
  const int co_count = weight.channels();
  const std::size_t depth = weight.height();
  const std::size_t n = input.shape().plane();
  output = Tensor<T>(co_count, input.height(), input.width());
  const std::size_t tile = tile_pixels<T>(depth, n);
  const int tiles = static_cast<int>((n + tile - 1) / tile);

#pragma omp parallel
  {
    std::vector<T> col(depth * tile);
    std::vector<T> out(static_cast<std::size_t>(co_count) * tile);
#pragma omp for schedule(static)
    for (int t = 0; t < tiles; ++t) {
      const std::size_t j0 = static_cast<std::size_t>(t) * tile;
      const std::size_t jn = std::min(tile, n - j0);
      const std::size_t stride = round_up(jn, kVecLanes<T>);
      fill_col_tile(input, kernel, j0, jn, stride, col.data());
      const int blocks = (co_count + kRowBlock - 1) / kRowBlock;
      for (int blk = 0; blk < blocks; ++blk) {
        const int r0 = blk * kRowBlock;
        if (r0 + kRowBlock <= co_count) {
          gemm_rows<T, kRowBlock>(weight.data() + r0 * depth, depth, col.data(), stride, bias.data() + r0,
                                  out.data() + r0 * stride);
        } else {
          for (int r = r0; r < co_count; ++r) {
            gemm_rows<T, 1>(weight.data() + r * depth, depth, col.data(), stride, bias.data() + r,
                            out.data() + r * stride);
          }
        }
      }
      for (int co = 0; co < co_count; ++co) {
        std::copy_n(out.data() + co * stride, jn, output.channel(co) + j0);
      }
    }
  }
}

template <typename T>
void conv2d_backward(const Tensor<T>& input, const Tensor<T>& weight, int kernel, const Tensor<T>& grad_output,
                     Tensor<T>* grad_input, Tensor<T>& grad_weight, Tensor<T>& grad_bias) {
  const int co_count = weight.channels();
  const int depth = weight.height();
  const std::size_t n = input.shape().plane();

  for (int co = 0; co < co_count; ++co) {
    const T* g = grad_output.channel(co);
    T s{};
    for (std::size_t j = 0; j < n; ++j) s += g[j];
    grad_bias[co] += s;
  }

  std::vector<T> weight_t;
  if (grad_input) {
    weight_t.resize(static_cast<std::size_t>(depth) * co_count);
    for (int co = 0; co < co_count; ++co) {
      for (int r = 0; r < depth; ++r) weight_t[static_cast<std::size_t>(r) * co_count + co] = weight[co * depth + r];
    }
  }

  const std::size_t tile = tile_pixels<T>(depth, n);
  std::vector<T> col(static_cast<std::size_t>(depth) * tile);
  std::vector<T> gout(static_cast<std::size_t>(co_count) * tile);
  std::vector<T> col_t;
  std::vector<T> partial;
  for (std::size_t j0 = 0; j0 < n; j0 += tile) {
    const std::size_t jn = std::min(tile, n - j0);
    const std::size_t stride = round_up(jn, kVecLanes<T>);
    for (int co = 0; co < co_count; ++co) {
      T* dst = gout.data() + co * stride;
      std::copy_n(grad_output.channel(co) + j0, jn, dst);
      std::fill(dst + jn, dst + stride, T{});
    }
    fill_col_tile(input, kernel, j0, jn, stride, col.data());
    weight_grad_tile(gout.data(), co_count, col.data(), depth, stride, col_t, partial, grad_weight.data());
    if (grad_input) {
      // grad_col[r, :] = sum_co weight[co, r] * gout[co, :], reusing `col`.
      gemm<T>(weight_t.data(), depth, co_count, gout.data(), stride, nullptr, col.data());
      col_tile_add(col.data(), kernel, j0, jn, stride, *grad_input);
    }
  }
}

template <typename T>
void maxpool2_forward(const Tensor<T>& input, Tensor<T>& output, std::vector<int>& argmax) {
  if (input.height() % 2 != 0 || input.width() % 2 != 0) {
    throw ConfigError("maxpool2 needs even spatial dims, got " + input.shape().str());
  }
  const int oh = input.height() / 2;
  const int ow = input.width() / 2;
  const int w = input.width();
  output = Tensor<T>(input.channels(), oh, ow);
  argmax.assign(output.size(), 0);
#pragma omp parallel for schedule(static)
  for (int c = 0; c < input.channels(); ++c) {
    const T* src = input.channel(c);
    T* dst = output.channel(c);
    int* idx = argmax.data() + static_cast<std::size_t>(c) * oh * ow;
    for (int y = 0; y < oh; ++y) {
      for (int x = 0; x < ow; ++x) {
        const int base = 2 * y * w + 2 * x;
        const std::array<int, 4> cand{base, base + 1, base + w, base + w + 1};
        int best = cand[0];
        for (int k = 1; k < 4; ++k) {
          if (src[cand[k]] > src[best]) best = cand[k];
        }
        dst[y * ow + x] = src[best];
        idx[y * ow + x] = best;
      }
    }
  }
}

template <typename T>
void maxpool2_backward(const Tensor<T>& grad_output, const std::vector<int>& argmax, Tensor<T>& grad_input) {
  const std::size_t plane = grad_output.shape().plane();
#pragma omp parallel for schedule(static)
  for (int c = 0; c < grad_output.channels(); ++c) {
    const T* g = grad_output.channel(c);
    const int* idx = argmax.data() + static_cast<std::size_t>(c) * plane;
    T* dst = grad_input.channel(c);
    for (std::size_t i = 0; i < plane; ++i) dst[idx[i]] += g[i];
  }
}

namespace {

struct Taps {
  std::vector<int> lo, hi;
  std::vector<double> w_lo, w_hi;
};

Taps axis_taps(int n) {
  Taps t;
  for (int o = 0; o < 2 * n; ++o) {
    double src = (o + 0.5) / 2.0 - 0.5;
    if (src < 0) src = 0;
    const int i0 = static_cast<int>(std::floor(src));
    t.lo.push_back(i0);
    t.hi.push_back(std::min(i0 + 1, n - 1));
    t.w_hi.push_back(src - i0);
    t.w_lo.push_back(1.0 - (src - i0));
  }
  return t;
}

}  // namespace

template <typename T>
void upsample2_forward(const Tensor<T>& input, Tensor<T>& output) {
  const int h = input.height();
  const int w = input.width();
  output = Tensor<T>(input.channels(), 2 * h, 2 * w);
  const Taps ty = axis_taps(h);
  const Taps tx = axis_taps(w);
#pragma omp parallel for schedule(static)
  for (int c = 0; c < input.channels(); ++c) {
    // Horizontal pass into a (h, 2w) row buffer, then vertical blend.
    std::vector<T> rows(static_cast<std::size_t>(h) * 2 * w);
    const T* src = input.channel(c);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < 2 * w; ++x) {
        rows[y * 2 * w + x] =
            static_cast<T>(tx.w_lo[x] * src[y * w + tx.lo[x]] + tx.w_hi[x] * src[y * w + tx.hi[x]]);
      }
    }
    T* dst = output.channel(c);
    for (int y = 0; y < 2 * h; ++y) {
      const T a = static_cast<T>(ty.w_lo[y]);
      const T b = static_cast<T>(ty.w_hi[y]);
      const T* r0 = rows.data() + ty.lo[y] * 2 * w;
      const T* r1 = rows.data() + ty.hi[y] * 2 * w;
      for (int x = 0; x < 2 * w; ++x) dst[y * 2 * w + x] = a * r0[x] + b * r1[x];
    }
  }
}

template <typename T>
void upsample2_backward(const Tensor<T>& grad_output, Tensor<T>& grad_input) {
  const int h = grad_input.height();
  const int w = grad_input.width();
  const Taps ty = axis_taps(h);
  const Taps tx = axis_taps(w);
#pragma omp parallel for schedule(static)
  for (int c = 0; c < grad_input.channels(); ++c) {
    std::vector<T> rows(static_cast<std::size_t>(h) * 2 * w, T{});
    const T* g = grad_output.channel(c);
    for (int y = 0; y < 2 * h; ++y) {
      const T a = static_cast<T>(ty.w_lo[y]);
      const T b = static_cast<T>(ty.w_hi[y]);
      T* r0 = rows.data() + ty.lo[y] * 2 * w;
      T* r1 = rows.data() + ty.hi[y] * 2 * w;
      for (int x = 0; x < 2 * w; ++x) {
        r0[x] += a * g[y * 2 * w + x];
        r1[x] += b * g[y * 2 * w + x];
      }
    }
    T* dst = grad_input.channel(c);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < 2 * w; ++x) {
        const T v = rows[y * 2 * w + x];
        dst[y * w + tx.lo[x]] += static_cast<T>(tx.w_lo[x]) * v;
        dst[y * w + tx.hi[x]] += static_cast<T>(tx.w_hi[x]) * v;
      }
    }
  }
}

#define VOSMEM_INSTANTIATE(T)                                                                                  \
  template void check_conv_shapes<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, int);               \
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

}  // namespace vosmem::kernels
