#include "cmsep/kernels.hpp"

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace cmsep::kernels {

ConvGeometry conv_geometry(std::size_t in_channels, std::size_t out_channels, std::size_t in_h,
                           std::size_t in_w, std::size_t kernel, std::size_t stride,
                           Padding padding) {
  if (kernel == 0 || stride == 0) throw std::invalid_argument("conv2d: zero kernel or stride");
  ConvGeometry g;
  g.in_channels = in_channels;
  g.out_channels = out_channels;
  g.in_h = in_h;
  g.in_w = in_w;
  g.kernel = kernel;
  g.stride = stride;
  if (padding == Padding::Same) {
    g.out_h = (in_h + stride - 1) / stride;
    g.out_w = (in_w + stride - 1) / stride;
    const auto total = [&](std::size_t out, std::size_t in) -> std::size_t {
      const std::size_t need = (out - 1) * stride + kernel;
      return need > in ? need - in : 0;
    };
    g.pad_top = total(g.out_h, in_h) / 2;
    g.pad_left = total(g.out_w, in_w) / 2;
  } else {
    if (kernel > in_h || kernel > in_w) {
      throw std::invalid_argument("conv2d: kernel " + std::to_string(kernel) +
                                  " larger than input " + std::to_string(in_h) + "x" +
                                  std::to_string(in_w));
    }
    g.out_h = (in_h - kernel) / stride + 1;
    g.out_w = (in_w - kernel) / stride + 1;
  }
  if (g.out_h == 0 || g.out_w == 0) throw std::invalid_argument("conv2d: empty output");
  return g;
}

namespace {

using Index = std::ptrdiff_t;

// Output indices o in [lo, hi) for which o*stride + tap - pad lands inside
// [0, in).
struct Range {
  std::size_t lo, hi;
};

Range valid_outputs(std::size_t tap, std::size_t pad, std::size_t stride, std::size_t in,
                    std::size_t out) {
  // o*stride >= pad - tap
  std::size_t lo = 0;
  if (pad > tap) lo = (pad - tap + stride - 1) / stride;
  // o*stride + tap - pad <= in - 1
  const Index top = static_cast<Index>(in) - 1 + static_cast<Index>(pad) - static_cast<Index>(tap);
  if (top < 0) return {0, 0};
  std::size_t hi = static_cast<std::size_t>(top) / stride + 1;
  hi = std::min(hi, out);
  if (lo > hi) lo = hi;
  return {lo, hi};
}

}  // namespace

namespace serial {

template <typename T>
void conv2d_forward(const ConvGeometry& g, const T* in, const T* w, const T* bias, T* out) {
  const Index k = static_cast<Index>(g.kernel);
  for (std::size_t co = 0; co < g.out_channels; ++co) {
    for (std::size_t oh = 0; oh < g.out_h; ++oh) {
      for (std::size_t ow = 0; ow < g.out_w; ++ow) {
        T acc = bias ? bias[co] : T(0);
        for (std::size_t ci = 0; ci < g.in_channels; ++ci) {
          for (Index kh = 0; kh < k; ++kh) {
            for (Index kw = 0; kw < k; ++kw) {
              const Index ih = static_cast<Index>(oh * g.stride) + kh - static_cast<Index>(g.pad_top);
              const Index iw = static_cast<Index>(ow * g.stride) + kw - static_cast<Index>(g.pad_left);
              if (ih < 0 || iw < 0 || ih >= static_cast<Index>(g.in_h) ||
                  iw >= static_cast<Index>(g.in_w))
                continue;
              acc += w[((co * g.in_channels + ci) * g.kernel + kh) * g.kernel + kw] *
                     in[(ci * g.in_h + ih) * g.in_w + iw];
            }
          }
        }
        out[(co * g.out_h + oh) * g.out_w + ow] = acc;
      }
    }
  }
}

template <typename T>
void conv2d_backward_input(const ConvGeometry& g, const T* grad_out, const T* w, T* grad_in) {
  const Index k = static_cast<Index>(g.kernel);
  for (std::size_t co = 0; co < g.out_channels; ++co)
    for (std::size_t oh = 0; oh < g.out_h; ++oh)
      for (std::size_t ow = 0; ow < g.out_w; ++ow) {
        const T go = grad_out[(co * g.out_h + oh) * g.out_w + ow];
        for (std::size_t ci = 0; ci < g.in_channels; ++ci)
          for (Index kh = 0; kh < k; ++kh)
            for (Index kw = 0; kw < k; ++kw) {
              const Index ih = static_cast<Index>(oh * g.stride) + kh - static_cast<Index>(g.pad_top);
              const Index iw = static_cast<Index>(ow * g.stride) + kw - static_cast<Index>(g.pad_left);
              if (ih < 0 || iw < 0 || ih >= static_cast<Index>(g.in_h) ||
                  iw >= static_cast<Index>(g.in_w))
                continue;
              grad_in[(ci * g.in_h + ih) * g.in_w + iw] +=
                  go * w[((co * g.in_channels + ci) * g.kernel + kh) * g.kernel + kw];
            }
      }
}

template <typename T>
void conv2d_backward_weights(const ConvGeometry& g, const T* in, const T* grad_out, T* grad_w,
                             T* grad_b) {
  const Index k = static_cast<Index>(g.kernel);
  for (std::size_t co = 0; co < g.out_channels; ++co)
    for (std::size_t oh = 0; oh < g.out_h; ++oh)
      for (std::size_t ow = 0; ow < g.out_w; ++ow) {
        const T go = grad_out[(co * g.out_h + oh) * g.out_w + ow];
        if (grad_b) grad_b[co] += go;
        for (std::size_t ci = 0; ci < g.in_channels; ++ci)
          for (Index kh = 0; kh < k; ++kh)
            for (Index kw = 0; kw < k; ++kw) {
              const Index ih = static_cast<Index>(oh * g.stride) + kh - static_cast<Index>(g.pad_top);
              const Index iw = static_cast<Index>(ow * g.stride) + kw - static_cast<Index>(g.pad_left);
              if (ih < 0 || iw < 0 || ih >= static_cast<Index>(g.in_h) ||
                  iw >= static_cast<Index>(g.in_w))
                continue;
              grad_w[((co * g.in_channels + ci) * g.kernel + kh) * g.kernel + kw] +=
                  go * in[(ci * g.in_h + ih) * g.in_w + iw];
            }
      }
}

template <typename T>
void gemm(bool ta, bool tb, std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b,
          T* c, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      T acc = accumulate ? c[i * n + j] : T(0);
      for (std::size_t p = 0; p < k; ++p) {
        const T av = ta ? a[p * m + i] : a[i * k + p];
        const T bv = tb ? b[j * k + p] : b[p * n + j];
        acc += av * bv;
      }
      c[i * n + j] = acc;
    }
}

}  // namespace serial

namespace parallel {

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapC = Eigen::Map<const RowMat<T>>;
template <typename T>
using Map = Eigen::Map<RowMat<T>>;

bool is_pointwise(const ConvGeometry& g) {
  return g.kernel == 1 && g.stride == 1 && g.pad_top == 0 && g.pad_left == 0;
}

// col[(ci*k + kh)*k + kw][oh*out_w + ow] = padded input sample under that tap.
template <typename T>
void im2col(const ConvGeometry& g, const T* in, T* col) {
  const std::size_t kk = g.kernel * g.kernel;
  const std::size_t plane_out = g.out_h * g.out_w;
  const auto rows = static_cast<Index>(g.in_channels * kk);
#pragma omp parallel for schedule(static)
  for (Index r = 0; r < rows; ++r) {
    const std::size_t ci = static_cast<std::size_t>(r) / kk;
    const std::size_t kh = (static_cast<std::size_t>(r) % kk) / g.kernel;
    const std::size_t kw = static_cast<std::size_t>(r) % g.kernel;
    const T* src = in + ci * g.in_h * g.in_w;
    T* dst = col + static_cast<std::size_t>(r) * plane_out;
    std::fill(dst, dst + plane_out, T(0));
    const Range rh = valid_outputs(kh, g.pad_top, g.stride, g.in_h, g.out_h);
    const Range rw = valid_outputs(kw, g.pad_left, g.stride, g.in_w, g.out_w);
    for (std::size_t oh = rh.lo; oh < rh.hi; ++oh) {
      const T* row = src + (oh * g.stride + kh - g.pad_top) * g.in_w;
      T* orow = dst + oh * g.out_w;
      for (std::size_t ow = rw.lo; ow < rw.hi; ++ow)
        orow[ow] = row[ow * g.stride + kw - g.pad_left];
    }
  }
}

// Adjoint of im2col, accumulating into `in`. Each thread owns one channel.
template <typename T>
void col2im(const ConvGeometry& g, const T* col, T* in) {
  const std::size_t kk = g.kernel * g.kernel;
  const std::size_t plane_out = g.out_h * g.out_w;
  const auto cin = static_cast<Index>(g.in_channels);
#pragma omp parallel for schedule(static)
  for (Index ci = 0; ci < cin; ++ci) {
    T* dst = in + static_cast<std::size_t>(ci) * g.in_h * g.in_w;
    for (std::size_t kh = 0; kh < g.kernel; ++kh) {
      const Range rh = valid_outputs(kh, g.pad_top, g.stride, g.in_h, g.out_h);
      for (std::size_t kw = 0; kw < g.kernel; ++kw) {
        const Range rw = valid_outputs(kw, g.pad_left, g.stride, g.in_w, g.out_w);
        const T* src = col + ((static_cast<std::size_t>(ci) * kk) + kh * g.kernel + kw) * plane_out;
        for (std::size_t oh = rh.lo; oh < rh.hi; ++oh) {
          T* row = dst + (oh * g.stride + kh - g.pad_top) * g.in_w;
          const T* crow = src + oh * g.out_w;
          for (std::size_t ow = rw.lo; ow < rw.hi; ++ow)
            row[ow * g.stride + kw - g.pad_left] += crow[ow];
        }
      }
    }
  }
}

// Eigen picks its vectorized code path (peeling, small-product kernels) from
// operand addresses, so products run on Eigen-owned aligned copies: the
// result then depends only on the shapes.
template <typename T>
RowMat<T> aligned(const T* p, Index rows, Index cols) {
  return MapC<T>(p, rows, cols);
}

template <typename T>
RowMat<T> columns(const ConvGeometry& g, const T* in) {
  const auto K = static_cast<Index>(g.in_channels * g.kernel * g.kernel);
  const auto P = static_cast<Index>(g.out_h * g.out_w);
  if (is_pointwise(g)) return aligned(in, K, P);
  RowMat<T> col(K, P);
  im2col(g, in, col.data());
  return col;
}

template <typename T>
void add_into(T* dst, const RowMat<T>& src) {
  const T* s = src.data();
  const auto n = static_cast<std::size_t>(src.size());
  for (std::size_t i = 0; i < n; ++i) dst[i] += s[i];
}

}  // namespace

template <typename T>
void conv2d_forward(const ConvGeometry& g, const T* in, const T* w, const T* bias, T* out) {
  const auto K = static_cast<Index>(g.in_channels * g.kernel * g.kernel);
  const auto P = static_cast<Index>(g.out_h * g.out_w);
  const auto C = static_cast<Index>(g.out_channels);
  RowMat<T> o(C, P);
  o.noalias() = aligned(w, C, K) * columns(g, in);
  if (bias)
    for (Index c = 0; c < C; ++c) o.row(c).array() += bias[c];
  std::copy_n(o.data(), o.size(), out);
}

template <typename T>
void conv2d_backward_input(const ConvGeometry& g, const T* grad_out, const T* w, T* grad_in) {
  const auto K = static_cast<Index>(g.in_channels * g.kernel * g.kernel);
  const auto P = static_cast<Index>(g.out_h * g.out_w);
  const auto C = static_cast<Index>(g.out_channels);
  RowMat<T> col(K, P);
  col.noalias() = aligned(w, C, K).transpose() * aligned(grad_out, C, P);
  if (is_pointwise(g)) {
    add_into(grad_in, col);
    return;
  }
  col2im(g, col.data(), grad_in);
}

template <typename T>
void conv2d_backward_weights(const ConvGeometry& g, const T* in, const T* grad_out, T* grad_w,
                             T* grad_b) {
  const auto K = static_cast<Index>(g.in_channels * g.kernel * g.kernel);
  const auto P = static_cast<Index>(g.out_h * g.out_w);
  const auto C = static_cast<Index>(g.out_channels);
  const RowMat<T> go = aligned(grad_out, C, P);
  RowMat<T> gw(C, K);
  gw.noalias() = go * columns(g, in).transpose();
  add_into(grad_w, gw);
  if (grad_b)
    for (Index c = 0; c < C; ++c) {
      T acc = T(0);
      for (Index p = 0; p < P; ++p) acc += go(c, p);
      grad_b[c] += acc;
    }
}

template <typename T>
void gemm(bool ta, bool tb, std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b,
          T* c, bool accumulate) {
  const auto M = static_cast<Index>(m), N = static_cast<Index>(n), K = static_cast<Index>(k);
  const RowMat<T> A = ta ? RowMat<T>(aligned(a, K, M).transpose()) : aligned(a, M, K);
  const RowMat<T> B = tb ? RowMat<T>(aligned(b, N, K).transpose()) : aligned(b, K, N);
  RowMat<T> prod(M, N);
  prod.noalias() = A * B;
  if (accumulate) {
    add_into(c, prod);
  } else {
    std::copy_n(prod.data(), prod.size(), c);
  }
}

}  // namespace parallel

#define CMSEP_INSTANTIATE_KERNELS(NS, T)                                                        \
  template void NS::conv2d_forward<T>(const ConvGeometry&, const T*, const T*, const T*, T*);   \
  template void NS::conv2d_backward_input<T>(const ConvGeometry&, const T*, const T*, T*);      \
  template void NS::conv2d_backward_weights<T>(const ConvGeometry&, const T*, const T*, T*, T*); \
  template void NS::gemm<T>(bool, bool, std::size_t, std::size_t, std::size_t, const T*,        \
                            const T*, T*, bool);

CMSEP_INSTANTIATE_KERNELS(serial, float)
CMSEP_INSTANTIATE_KERNELS(serial, double)
CMSEP_INSTANTIATE_KERNELS(parallel, float)
CMSEP_INSTANTIATE_KERNELS(parallel, double)

#undef CMSEP_INSTANTIATE_KERNELS

}  // namespace cmsep::kernels
